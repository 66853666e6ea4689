#include "cnnbound/snapshot.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cnnbound/errors.hpp"

namespace cnnbound {

using nlohmann::json;

namespace {

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void put_f64(std::vector<unsigned char>& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

json config_json(const NetworkConfig& c) {
    json conv = json::array();
    for (const auto& l : c.conv)
        conv.push_back({{"kernel_size", l.kernel_size}, {"channels", l.channels}, {"pooling", to_string(l.pooling)}});
    return {{"setting", to_string(c.setting)},
            {"input_size", c.input_size},
            {"input_channels", c.input_channels},
            {"conv", conv},
            {"fc_widths", c.fc_widths},
            {"activation", to_string(c.activation)},
            {"chi", c.chi},
            {"nu", c.nu},
            {"lambda", c.lambda},
            {"loss_range", c.loss_range}};
}

NetworkConfig config_from(const json& j) {
    NetworkConfig c;
    c.setting = parse_setting(j.value("setting", std::string("basic")));
    c.input_size = j.value("input_size", c.input_size);
    c.input_channels = j.value("input_channels", c.input_channels);
    if (j.contains("conv"))
        for (const auto& l : j.at("conv"))
            c.conv.push_back(ConvLayerShape{l.value("kernel_size", std::size_t{1}), l.value("channels", std::size_t{1}),
                                            parse_pooling(l.value("pooling", std::string("none")))});
    c.fc_widths = j.value("fc_widths", std::vector<std::size_t>{});
    c.activation = parse_activation(j.value("activation", std::string("relu")));
    c.chi = j.value("chi", c.chi);
    c.nu = j.value("nu", c.nu);
    c.lambda = j.value("lambda", c.lambda);
    c.loss_range = j.value("loss_range", c.loss_range);
    return c;
}

struct TensorRef {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<const double> values;
};

std::vector<TensorRef> tensor_list(const std::string& prefix, const ParamSet& p) {
    std::vector<TensorRef> out;
    for (std::size_t i = 0; i < p.conv.size(); ++i) {
        const auto& d = p.conv[i].dims();
        out.push_back({prefix + ".conv." + std::to_string(i), {d[0], d[1], d[2], d[3]}, p.conv[i].data()});
    }
    for (std::size_t i = 0; i < p.fc.size(); ++i)
        out.push_back({prefix + ".fc." + std::to_string(i), {p.fc[i].rows(), p.fc[i].cols()}, p.fc[i].data()});
    if (p.last_layer) out.push_back({prefix + ".last_layer", {p.last_layer->size()}, *p.last_layer});
    return out;
}

} // namespace

std::int64_t snapshot_timestamp() {
    const char* env = std::getenv("SOURCE_DATE_EPOCH");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    return end && *end == '\0' ? v : 0;
}

std::string network_config_to_json(const NetworkConfig& config) { return config_json(config).dump(2); }

NetworkConfig network_config_from_json(const std::string& text) {
    try {
        return config_from(json::parse(text));
    } catch (const json::exception& e) {
        throw FormatError(std::string("network config: ") + e.what());
    }
}

std::vector<unsigned char> encode_snapshot(const Snapshot& s) {
    std::vector<TensorRef> tensors = tensor_list("current", s.current);
    if (s.initial) {
        auto more = tensor_list("initial", *s.initial);
        tensors.insert(tensors.end(), more.begin(), more.end());
    }
    json table = json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
        offset += 8 * t.values.size();
    }
    const json header = {{"format", "CNVB"},
                         {"version", kSnapshotVersion},
                         {"config", config_json(s.config)},
                         {"has_initial", s.initial.has_value()},
                         {"metadata", {{"seed", s.metadata.seed}, {"epoch", s.metadata.epoch}, {"created", s.metadata.created}}},
                         {"tensors", table},
                         {"payload_bytes", offset}};
    const std::string text = header.dump();

    std::vector<unsigned char> out(kSnapshotMagic.begin(), kSnapshotMagic.end());
    put_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + offset);
    for (const auto& t : tensors)
        for (double v : t.values) put_f64(out, v);
    return out;
}

Snapshot decode_snapshot(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 16 || !std::equal(kSnapshotMagic.begin(), kSnapshotMagic.end(), bytes.begin()))
        throw FormatError("not a snapshot file (bad magic)");
    const std::uint64_t header_len = get_u64(bytes.data() + 8);
    if (header_len > bytes.size() - 16) throw FormatError("snapshot header is truncated");
    const std::size_t payload_start = 16 + header_len;
    const std::size_t payload_size = bytes.size() - payload_start;

    json header;
    try {
        header = json::parse(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(payload_start));
    } catch (const json::exception& e) {
        throw FormatError(std::string("snapshot header is not valid JSON: ") + e.what());
    }

    Snapshot s;
    try {
        if (header.at("version").get<int>() != kSnapshotVersion)
            throw FormatError("unsupported snapshot version " + header.at("version").dump());
        s.config = config_from(header.at("config"));
        const auto& meta = header.at("metadata");
        s.metadata.seed = meta.at("seed").get<std::uint64_t>();
        s.metadata.epoch = meta.at("epoch").get<std::int64_t>();
        s.metadata.created = meta.at("created").get<std::int64_t>();
        if (header.at("has_initial").get<bool>()) s.initial.emplace();

        std::uint64_t expected_offset = 0;
        for (const auto& t : header.at("tensors")) {
            const std::string name = t.at("name").get<std::string>();
            const auto shape = t.at("shape").get<std::vector<std::size_t>>();
            const auto offset = t.at("offset").get<std::uint64_t>();
            std::uint64_t count = 1;
            for (std::size_t v : shape) count *= v;
            if (offset != expected_offset) throw FormatError("tensor " + name + ": offset does not follow the previous tensor");
            if (offset + 8 * count > payload_size)
                throw FormatError("tensor " + name + ": payload truncated (needs " + std::to_string(8 * count) +
                                  " bytes at offset " + std::to_string(offset) + ", " +
                                  std::to_string(payload_size > offset ? payload_size - offset : 0) + " present)");
            expected_offset = offset + 8 * count;

            std::vector<double> values(count);
            const unsigned char* p = bytes.data() + payload_start + offset;
            for (std::size_t i = 0; i < count; ++i) {
                values[i] = std::bit_cast<double>(get_u64(p + 8 * i));
                if (std::isnan(values[i])) throw NumericError("tensor " + name + ": NaN at element " + std::to_string(i));
            }

            const auto dot = name.find('.');
            if (dot == std::string::npos) throw FormatError("tensor " + name + ": malformed name");
            const std::string owner = name.substr(0, dot), rest = name.substr(dot + 1);
            ParamSet* target = owner == "current" ? &s.current : owner == "initial" && s.initial ? &*s.initial : nullptr;
            if (!target) throw FormatError("tensor " + name + ": unknown parameter set");
            if (rest == "last_layer") {
                if (shape.size() != 1) throw FormatError("tensor " + name + ": expected a vector");
                target->last_layer = std::move(values);
            } else if (rest.rfind("conv.", 0) == 0) {
                if (shape.size() != 4) throw FormatError("tensor " + name + ": expected 4 dimensions");
                if (rest != "conv." + std::to_string(target->conv.size()))
                    throw FormatError("tensor " + name + ": out of order");
                target->conv.emplace_back(RealTensor4::Dims{shape[0], shape[1], shape[2], shape[3]}, std::move(values));
            } else if (rest.rfind("fc.", 0) == 0) {
                if (shape.size() != 2) throw FormatError("tensor " + name + ": expected 2 dimensions");
                if (rest != "fc." + std::to_string(target->fc.size()))
                    throw FormatError("tensor " + name + ": out of order");
                target->fc.emplace_back(shape[0], shape[1], std::move(values));
            } else {
                throw FormatError("tensor " + name + ": unknown tensor kind");
            }
        }
        if (expected_offset != header.at("payload_bytes").get<std::uint64_t>() || expected_offset != payload_size)
            throw FormatError("snapshot payload is " + std::to_string(payload_size) + " bytes, shape table describes " +
                              std::to_string(expected_offset));
    } catch (const json::exception& e) {
        throw FormatError(std::string("snapshot header: ") + e.what());
    }

    try {
        s.config.validate();
        s.current.check_compatible(s.config);
        if (s.initial) s.initial->check_compatible(s.config);
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("snapshot does not match its config: ") + e.what());
    }
    return s;
}

void write_snapshot(const std::string& path, const Snapshot& s) {
    const auto bytes = encode_snapshot(s);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing " + path);
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_snapshot(bytes);
}

bool bitwise_equal(const ParamSet& a, const ParamSet& b) {
    auto same = [](std::span<const double> x, std::span<const double> y) {
        return x.size() == y.size() && (x.empty() || std::memcmp(x.data(), y.data(), 8 * x.size()) == 0);
    };
    if (!a.same_shapes(b) || a.last_layer.has_value() != b.last_layer.has_value()) return false;
    for (std::size_t i = 0; i < a.conv.size(); ++i)
        if (!same(a.conv[i].data(), b.conv[i].data())) return false;
    for (std::size_t i = 0; i < a.fc.size(); ++i)
        if (!same(a.fc[i].data(), b.fc[i].data())) return false;
    return !a.last_layer || same(*a.last_layer, *b.last_layer);
}

} // namespace cnnbound
