#pragma once

#include <cstdint>
#include <vector>

namespace cnnbound {

/// Counter-based 64-bit generator.
///
/// The output for draw `i` is a SplitMix64-style finalizer applied to
/// `key + (i + 1) * golden`, so a stream is fully described by its key and
/// position. `split(tag)` derives an independent stream from the key; trial `t`
/// of a seeded suite uses `Rng(seed).split(t)` and is therefore reproducible
/// regardless of the order in which trials are executed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;
    /// Standard normal via Box-Muller (the second variate is cached).
    double normal() noexcept;
    /// Gamma(shape, 1) via Marsaglia-Tsang, used for Dirichlet draws.
    double gamma(double shape) noexcept;
    /// Symmetric Dirichlet(alpha) with `n` components.
    std::vector<double> dirichlet(std::size_t n, double alpha);
    std::vector<double> normal_vector(std::size_t n);

    Rng split(std::uint64_t tag) const noexcept;
    std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

} // namespace cnnbound
