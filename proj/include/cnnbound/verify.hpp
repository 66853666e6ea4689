#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cnnbound/network.hpp"
#include "cnnbound/rng.hpp"

namespace cnnbound {

/// Ratios above this count as violations.
inline constexpr double kRatioTolerance = 1.0 + 1e-9;
/// Trials whose claimed bound is below this are skipped (0/0).
inline constexpr double kSkipDenominator = 1e-12;

struct LipschitzTrialReport {
    std::string suite;
    std::size_t trials = 0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0; // claimed bound below kSkipDenominator
    double max_ratio = 0.0;  // observed |loss difference| / claimed bound
    std::uint64_t worst_trial = 0;
    std::size_t violations = 0; // ratio > kRatioTolerance
    // side audits; each counts failed trials
    std::size_t hybrid_violations = 0; // layer-by-layer path sum below the total difference
    std::size_t chain_violations = 0;  // hidden norm above chi times the running norm product
    std::size_t membership_failures = 0;

    bool passed() const { return violations == 0 && hybrid_violations == 0 && chain_violations == 0; }
};

/// Parameters K with ||K - K0||_sigma <= beta (basic setting, K0 from
/// initialize_params) and a single-layer perturbation that stays in the class;
/// inputs have norm <= 1. Audits
///   |l(f_K(x), y) - l(f_K~(x), y)| <= lambda e^beta ||op(K_j) - op(K~_j)||_2.
LipschitzTrialReport verify_single_layer(const NetworkConfig& config, double beta, std::size_t trials,
                                         std::uint64_t seed);

/// Both K and K~ drawn independently from the beta-ball; audits
///   |l(f_K(x), y) - l(f_K~(x), y)| <= lambda e^beta ||K - K~||_sigma
/// and replays the layer-at-a-time hybrid path.
LipschitzTrialReport verify_all_layers(const NetworkConfig& config, double beta, std::size_t trials,
                                       std::uint64_t seed);

enum class GeneralCheck { conv_layer, fc_layer, full };
std::string_view to_string(GeneralCheck c) noexcept;

/// General setting: Theta0 layers have norm in [1, 1 + nu], inputs have norm
/// <= chi, ||Theta - Theta0||_N <= beta. Audits
///   |l(f_Theta(x), y) - l(f_Theta~(x), y)| <= chi lambda_eff (1 + nu + beta/L)^L * D
/// where D is the changed conv layer's operator distance, the changed fc
/// layer's spectral distance, or ||Theta - Theta~||_N. The norm chain
/// ||u_l|| <= chi prod_{i<=l} ||layer i|| is audited on every forward pass.
/// config.chi and config.nu are used; beta is the class radius.
LipschitzTrialReport verify_general(const NetworkConfig& config, double beta, GeneralCheck check, std::size_t trials,
                                    std::uint64_t seed);

/// Hand-built instances on which the claimed constants are nearly attained:
/// a 1-channel 1x1 identity conv net (basic) or conv + rank-one fc net
/// (general), perturbed along the input direction with margins inside the ramp.
/// Returns the observed ratio.
double constructed_ratio_single_layer(double beta);
double constructed_ratio_all_layers(double beta);
double constructed_ratio_general(double beta, GeneralCheck check);

enum class NormKind { l2, linf };
std::string_view to_string(NormKind k) noexcept;
NormKind parse_norm_kind(std::string_view s);

struct CoverReport {
    std::size_t dimension = 0;
    double radius = 0.0; // kappa
    double granularity = 0.0; // eps
    NormKind norm = NormKind::l2;
    std::size_t cover_size = 0;
    double bound = 0.0;           // (3 kappa / eps)^d
    double volumetric_lower = 0.0; // (kappa / eps)^d
    std::size_t sampled_points = 0;
    std::size_t uncovered = 0;
    double min_center_distance = 0.0; // +inf for a single center
    std::vector<std::vector<double>> centers;

    bool is_packing() const { return min_center_distance > granularity; }
    bool passed() const { return uncovered == 0 && is_packing() && static_cast<double>(cover_size) <= bound; }
};

/// Greedy maximal eps-packing of the kappa-ball: candidates from a grid of
/// spacing eps/4 (ordered by norm, the origin first), then random points of
/// the ball until a full round adds nothing. Validates with `samples` fresh
/// uniform points of the ball. d must be 1, 2 or 3.
CoverReport build_cover(double kappa, double eps, std::size_t d, NormKind norm, std::uint64_t seed,
                        std::size_t samples = 10000);

/// g_theta(z) = clamp(slope * (z - t) + 1/2, 0, 1) with t = (theta + 1) / 2,
/// theta in [-1, 1], z ~ U[0, 1]. The class is (slope / 2, 1)-Lipschitz
/// parameterized with range [0, 1]; slope 0 is the constant class.
struct RampClass {
    double slope = 2.0;
    std::size_t theta_grid = 201;

    double B() const { return slope / 2.0; }
    double value(double theta, double z) const;
    /// Exact expectation under U[0, 1].
    double expectation(double theta) const;
};

struct McRateReport {
    std::vector<std::size_t> n_grid;
    std::vector<double> mean_sup_gap;
    double slope = 0.0; // least-squares slope of log gap against log n
    double intercept = 0.0;
    bool slope_defined = true; // false when some mean gap is 0
    double gap_at_largest_n = 0.0;
    /// C (B sqrt(d/n) + M sqrt(log(1/delta)/n)) at the largest n.
    double rate_bound_at_largest_n = 0.0;
    std::size_t nonincreasing_violations = 0; // adjacent n with a mean gap rise above the tolerance
};

/// Monte-Carlo estimate of E over samples of sup_theta (E_P g - E_S g).
McRateReport mc_gap_rate(const RampClass& cls, const std::vector<std::size_t>& n_grid, std::size_t repetitions,
                         std::uint64_t seed, double constant = 3.0, double delta = 0.05);

struct GradientCheckReport {
    std::size_t networks = 0;
    std::size_t coordinates = 0;
    std::size_t resampled = 0; // draws rejected for sitting near a kink
    double max_rel_error = 0.0;
    std::size_t violations = 0;
};
/// Relative error floor: |a - b| / max(|a|, |b|, kGradientFloor).
inline constexpr double kGradientFloor = 1e-4;
inline constexpr double kGradientStep = 1e-5;
inline constexpr double kGradientTolerance = 1e-5;

/// Random small networks (both settings, ReLU and tanh, all pooling modes,
/// scalar and 3-class outputs); every trainable coordinate's gradient is
/// compared with a central difference of step 1e-5. Draws where any ReLU
/// input, max-pool runner-up gap, multiclass runner-up gap or ramp corner sits
/// within 1e-3 of a kink are redrawn.
GradientCheckReport verify_gradient(std::size_t networks, std::uint64_t seed);

struct OpnormCheckReport {
    std::size_t trials = 0;
    double max_rel_deviation = 0.0;
};
/// FFT-block operator norm against the spectral norm of the materialized
/// operator on random layers (d in 2..8, channels in 1..3, k <= d).
OpnormCheckReport verify_opnorm(std::size_t trials, std::uint64_t seed);

/// Per-layer distance budgets for sampling the beta-ball: a symmetric
/// Dirichlet(1) draw times beta, shrunk by a uniform factor half of the time
/// so both the boundary and the interior are exercised.
std::vector<double> sample_budgets(std::size_t layers, double beta, Rng& rng);

} // namespace cnnbound
