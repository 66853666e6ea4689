#include "cnnbound/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "cnnbound/errors.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/rng.hpp"

namespace cnnbound {

void normalize_to(std::vector<double>& x, double chi) {
    const double n = euclidean_norm(x);
    if (n == 0.0) return;
    for (double& v : x) v *= chi / n;
}

std::vector<std::vector<double>> synth_templates(std::uint64_t seed, std::size_t d, std::size_t c,
                                                 std::size_t frequencies) {
    Rng rng = Rng(seed).split(0x7e3a);
    std::vector<std::vector<double>> out;
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<double> t(d * d * c, 0.0);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t fu = 0; fu <= frequencies; ++fu)
                for (std::size_t fv = 0; fv <= frequencies; ++fv) {
                    const double amp = rng.normal() / static_cast<double>(1 + fu + fv);
                    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                    for (std::size_t a = 0; a < d; ++a)
                        for (std::size_t b = 0; b < d; ++b) {
                            const double arg = 2.0 * std::numbers::pi *
                                               static_cast<double>(fu * a + fv * b) / static_cast<double>(d);
                            t[(a * d + b) * c + ch] += amp * std::cos(arg + phase);
                        }
                }
        out.push_back(std::move(t));
    }
    // The networks carry no bias terms, so the pair is centered: the shared
    // mean is subtracted, leaving antipodal templates.
    for (std::size_t i = 0; i < out[0].size(); ++i) {
        const double half = 0.5 * (out[0][i] - out[1][i]);
        out[0][i] = half;
        out[1][i] = -half;
    }
    for (auto& t : out) normalize_to(t, 1.0);
    return out;
}

Examples synth_dataset(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t c, const TaskSpec& task) {
    if (n < 2) throw ArgumentError("synth_dataset needs n >= 2");
    if (d == 0 || c == 0) throw ArgumentError("synth_dataset needs positive d and c");
    if (!(task.label_flip >= 0.0 && task.label_flip <= 1.0)) throw ArgumentError("label_flip must lie in [0, 1]");
    const auto templates = synth_templates(seed, d, c, task.frequencies);
    Rng rng = Rng(seed).split(0x5a3f);
    Examples data(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = i < (n + 1) / 2 ? 0 : 1;
        Example& ex = data[i];
        ex.label = cls == 0 ? 1 : -1;
        ex.x = templates[cls];
        if (task.noise != 0.0) {
            const double scale = task.noise / std::sqrt(static_cast<double>(ex.x.size()));
            for (double& v : ex.x) v += scale * rng.normal();
        }
        normalize_to(ex.x, task.chi);
    }
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(data[i - 1], data[j]);
    }
    if (task.label_flip > 0.0)
        for (Example& ex : data)
            if (rng.uniform() < task.label_flip) ex.label = -ex.label;
    return data;
}

Examples load_cifar10_binary(const std::string& path, const std::vector<int>& class_filter,
                             std::optional<std::size_t> max_per_class, double chi) {
    constexpr std::size_t kRecord = 3073, kPlane = 1024, kSide = 32;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<unsigned char> buf(kRecord);
    std::map<int, std::size_t> counts;
    Examples out;
    std::size_t offset = 0;
    while (true) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(kRecord));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got == 0) break;
        if (got < kRecord)
            throw FormatError(path + ": truncated record at byte offset " + std::to_string(offset) + " (" +
                              std::to_string(got) + " of 3073 bytes)");
        const int label = buf[0];
        if (label > 9) throw FormatError(path + ": label byte " + std::to_string(label) + " at byte offset " +
                                         std::to_string(offset) + " is not in 0..9");
        offset += kRecord;
        if (!class_filter.empty() && std::find(class_filter.begin(), class_filter.end(), label) == class_filter.end())
            continue;
        if (max_per_class && counts[label] >= *max_per_class) continue;
        ++counts[label];
        Example ex;
        ex.label = label;
        ex.x.resize(kPlane * 3);
        for (std::size_t ch = 0; ch < 3; ++ch)
            for (std::size_t p = 0; p < kPlane; ++p) ex.x[p * 3 + ch] = buf[1 + ch * kPlane + p] / 255.0;
        static_assert(kSide * kSide == kPlane);
        normalize_to(ex.x, chi);
        out.push_back(std::move(ex));
    }
    return out;
}

Examples to_binary_labels(Examples data, int positive_class) {
    for (Example& ex : data) ex.label = ex.label == positive_class ? 1 : -1;
    return data;
}

Examples embed_channels(const Examples& data, std::size_t d, std::size_t from, std::size_t to) {
    Examples out;
    out.reserve(data.size());
    for (const Example& ex : data) {
        if (ex.x.size() != d * d * from) throw DimensionError("embed_channels: example does not have d*d*from entries");
        Example e;
        e.label = ex.label;
        e.x.assign(d * d * to, 0.0);
        for (std::size_t p = 0; p < d * d; ++p)
            for (std::size_t ch = 0; ch < std::min(from, to); ++ch) e.x[p * to + ch] = ex.x[p * from + ch];
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace cnnbound
