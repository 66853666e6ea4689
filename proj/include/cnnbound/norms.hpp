#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "cnnbound/network.hpp"

namespace cnnbound {

/// Memoizes conv operator norms by kernel content. Lookups take a shared lock;
/// inserts are insert-if-absent under an exclusive lock, so concurrent callers
/// racing on the same kernel store one value.
class OperatorNormCache {
public:
    double operator_norm(const RealTensor4& kernel, std::size_t d);

    std::size_t size() const;
    std::size_t hits() const;
    std::size_t misses() const;

private:
    struct Entry {
        RealTensor4::Dims dims;
        std::size_t d;
        std::vector<double> data;
        double value;
    };

    mutable std::shared_mutex mutex_;
    std::unordered_multimap<std::uint64_t, Entry> entries_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
};

std::uint64_t content_hash(const RealTensor4& kernel, std::size_t d) noexcept;

/// sum_i ||op(K^(i)) - op(K~^(i))||_2 over the conv layers.
double sigma_dist(const ParamSet& a, const ParamSet& b, const NetworkConfig& config,
                  OperatorNormCache* cache = nullptr);
/// sigma_dist plus sum_i ||V^(i) - V~^(i)||_2 over the fully connected layers.
double n_dist(const ParamSet& a, const ParamSet& b, const NetworkConfig& config, OperatorNormCache* cache = nullptr);
/// Entrywise L1 distance across all conv kernels.
double vec_l1_dist(const ParamSet& a, const ParamSet& b);

inline double sigma_dist(const InitPair& pair, const NetworkConfig& config, OperatorNormCache* cache = nullptr) {
    return sigma_dist(pair.current, pair.initial, config, cache);
}
inline double n_dist(const InitPair& pair, const NetworkConfig& config, OperatorNormCache* cache = nullptr) {
    return n_dist(pair.current, pair.initial, config, cache);
}
inline double vec_l1_dist(const InitPair& pair) { return vec_l1_dist(pair.current, pair.initial); }

/// Per-layer operator norms ||op(K^(i))||_2 followed by ||V^(i)||_2.
std::vector<double> layer_norms(const ParamSet& params, const NetworkConfig& config);

/// Checks the initialization contract: every initial layer has norm 1 (basic)
/// or at most 1 + nu (general), within 1e-9. Throws ArgumentError otherwise.
void check_initialization(const ParamSet& initial, const NetworkConfig& config);

} // namespace cnnbound
