#include "cnnbound/norms.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "cnnbound/convspec.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/rng.hpp"

namespace cnnbound {

std::uint64_t content_hash(const RealTensor4& kernel, std::size_t d) noexcept {
    std::uint64_t h = mix64(d);
    for (std::size_t v : kernel.dims()) h = mix64(h ^ v);
    for (double x : kernel.data()) h = mix64(h ^ std::bit_cast<std::uint64_t>(x));
    return h;
}

double OperatorNormCache::operator_norm(const RealTensor4& kernel, std::size_t d) {
    const std::uint64_t key = content_hash(kernel, d);
    auto matches = [&](const Entry& e) {
        return e.dims == kernel.dims() && e.d == d &&
               std::memcmp(e.data.data(), kernel.data().data(), e.data.size() * sizeof(double)) == 0;
    };
    {
        std::shared_lock lock(mutex_);
        auto [lo, hi] = entries_.equal_range(key);
        for (auto it = lo; it != hi; ++it)
            if (matches(it->second)) {
                ++hits_;
                return it->second.value;
            }
    }
    const double value = operator_norm_fft(kernel, d);
    std::unique_lock lock(mutex_);
    auto [lo, hi] = entries_.equal_range(key);
    for (auto it = lo; it != hi; ++it)
        if (matches(it->second)) {
            ++hits_;
            return it->second.value;
        }
    ++misses_;
    entries_.emplace(key, Entry{kernel.dims(), d, kernel.storage(), value});
    return value;
}

std::size_t OperatorNormCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::size_t OperatorNormCache::hits() const { return hits_.load(); }

std::size_t OperatorNormCache::misses() const { return misses_.load(); }

namespace {

void require_same_shapes(const ParamSet& a, const ParamSet& b) {
    if (!a.same_shapes(b)) throw ArgumentError("parameter sets have different shapes");
}

double conv_part(const ParamSet& a, const ParamSet& b, const NetworkConfig& config, OperatorNormCache* cache) {
    if (a.conv.size() != config.conv.size()) throw ArgumentError("parameter set does not match the architecture");
    double total = 0.0;
    for (std::size_t i = 0; i < a.conv.size(); ++i) {
        const RealTensor4 diff = a.conv[i] - b.conv[i];
        const std::size_t d = config.conv_input_size(i);
        total += cache ? cache->operator_norm(diff, d) : operator_norm_fft(diff, d);
    }
    return total;
}

} // namespace

double sigma_dist(const ParamSet& a, const ParamSet& b, const NetworkConfig& config, OperatorNormCache* cache) {
    require_same_shapes(a, b);
    return conv_part(a, b, config, cache);
}

double n_dist(const ParamSet& a, const ParamSet& b, const NetworkConfig& config, OperatorNormCache* cache) {
    require_same_shapes(a, b);
    double total = conv_part(a, b, config, cache);
    for (std::size_t i = 0; i < a.fc.size(); ++i) total += spectral_norm(a.fc[i] - b.fc[i]);
    return total;
}

double vec_l1_dist(const ParamSet& a, const ParamSet& b) {
    require_same_shapes(a, b);
    double total = 0.0;
    for (std::size_t i = 0; i < a.conv.size(); ++i) {
        const auto x = a.conv[i].data();
        const auto y = b.conv[i].data();
        for (std::size_t t = 0; t < x.size(); ++t) total += std::abs(x[t] - y[t]);
    }
    return total;
}

std::vector<double> layer_norms(const ParamSet& params, const NetworkConfig& config) {
    std::vector<double> out;
    for (std::size_t i = 0; i < params.conv.size(); ++i)
        out.push_back(operator_norm_fft(params.conv[i], config.conv_input_size(i)));
    for (const auto& v : params.fc) out.push_back(spectral_norm(v));
    return out;
}

void check_initialization(const ParamSet& initial, const NetworkConfig& config) {
    const auto norms = layer_norms(initial, config);
    for (std::size_t i = 0; i < norms.size(); ++i) {
        const bool ok = config.setting == Setting::basic ? std::abs(norms[i] - 1.0) <= 1e-9
                                                         : norms[i] <= 1.0 + config.nu + 1e-9;
        if (!ok)
            throw ArgumentError("initial layer " + std::to_string(i) + " has operator norm " +
                                std::to_string(norms[i]) + ", outside the initialization contract");
    }
}

} // namespace cnnbound
