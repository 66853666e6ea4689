#include "cnnbound/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "cnnbound/bounds.hpp"
#include "cnnbound/convspec.hpp"
#include "cnnbound/errors.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/norms.hpp"
#include "cnnbound/train.hpp"

namespace cnnbound {

std::string_view to_string(GeneralCheck c) noexcept {
    switch (c) {
    case GeneralCheck::conv_layer: return "conv-layer";
    case GeneralCheck::fc_layer: return "fc-layer";
    case GeneralCheck::full: return "full";
    }
    return "?";
}

std::string_view to_string(NormKind k) noexcept { return k == NormKind::l2 ? "l2" : "linf"; }

NormKind parse_norm_kind(std::string_view s) {
    if (s == "l2") return NormKind::l2;
    if (s == "linf") return NormKind::linf;
    throw ArgumentError("unknown norm '" + std::string(s) + "' (expected l2 or linf)");
}

std::vector<double> sample_budgets(std::size_t layers, double beta, Rng& rng) {
    std::vector<double> b = rng.dirichlet(layers, 1.0);
    const double shrink = rng.uniform() < 0.5 ? 1.0 : rng.uniform();
    for (double& v : b) v *= beta * shrink;
    return b;
}

namespace {

RealTensor4 kernel_at_distance(const RealTensor4& base, std::size_t d, double dist, Rng& rng) {
    RealTensor4 dir(base.dims());
    for (double& v : dir.storage()) v = rng.normal();
    const double n = operator_norm_fft(dir, d);
    dir *= dist / n;
    return base + dir;
}

RealMatrix matrix_at_distance(const RealMatrix& base, double dist, Rng& rng) {
    RealMatrix dir(base.rows(), base.cols());
    for (double& v : dir.storage()) v = rng.normal();
    dir *= dist / spectral_norm(dir);
    return base + dir;
}

std::vector<double> sample_input(std::size_t dim, double chi, Rng& rng) {
    std::vector<double> x = rng.normal_vector(dim);
    const double r = rng.uniform() < 0.5 ? 1.0 : rng.uniform();
    const double n = euclidean_norm(x);
    for (double& v : x) v *= chi * r / n;
    return x;
}

int sample_label(const NetworkConfig& config, Rng& rng) {
    if (config.binary_output()) return rng.uniform() < 0.5 ? 1 : -1;
    return static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(config.output_dim()) - 1));
}

double loss_at(const ParamSet& p, const NetworkConfig& config, const Example& ex) {
    return ramp_loss(forward(p, config, ex.x), ex.label, config.lambda);
}

/// Parameters in the ball of radius beta around `center`: every trainable
/// layer i moves by exactly budget[i] in its layer norm.
ParamSet sample_in_ball(const ParamSet& center, const NetworkConfig& config, const std::vector<double>& budget,
                        Rng& rng) {
    ParamSet p = center;
    for (std::size_t i = 0; i < p.conv.size(); ++i)
        p.conv[i] = kernel_at_distance(center.conv[i], config.conv_input_size(i), budget[i], rng);
    for (std::size_t i = 0; i < p.fc.size(); ++i)
        p.fc[i] = matrix_at_distance(center.fc[i], budget[p.conv.size() + i], rng);
    return p;
}

void require_member(const ParamSet& p, const ParamSet& center, const NetworkConfig& config, double beta,
                    LipschitzTrialReport& report) {
    const double dist = n_dist(p, center, config);
    if (dist > beta * (1.0 + 1e-9) + 1e-12) {
        ++report.membership_failures;
        throw InternalError("sampled parameters at distance " + std::to_string(dist) + " exceed beta " +
                            std::to_string(beta));
    }
}

void record(LipschitzTrialReport& report, double lhs, double bound, std::uint64_t trial) {
    if (bound < kSkipDenominator) {
        ++report.skipped;
        return;
    }
    ++report.evaluated;
    const double ratio = lhs / bound;
    if (ratio > report.max_ratio) {
        report.max_ratio = ratio;
        report.worst_trial = trial;
    }
    if (ratio > kRatioTolerance) ++report.violations;
}

/// True when every layer's output norm is at most ||x|| times the running
/// product of layer norms.
bool chain_holds(const ParamSet& p, const NetworkConfig& config, std::span<const double> x) {
    const ForwardCache cache = forward_cache(p, config, x);
    const std::vector<double> norms = layer_norms(p, config);
    double bound = euclidean_norm(x);
    std::size_t i = 0;
    auto check = [&](const std::vector<double>& u) {
        bound *= norms[i++];
        return euclidean_norm(u) <= bound * (1.0 + 1e-9) + 1e-15;
    };
    for (const auto& lc : cache.conv)
        if (!check(lc.output)) return false;
    for (const auto& lc : cache.fc)
        if (!check(lc.output)) return false;
    return true;
}

void require_basic(const NetworkConfig& config, double beta) {
    config.validate();
    if (config.setting != Setting::basic) throw ArgumentError("this suite needs the basic setting");
    if (!(beta > 0.0)) throw ArgumentError("beta must be positive");
}

} // namespace

LipschitzTrialReport verify_single_layer(const NetworkConfig& config, double beta, std::size_t trials,
                                         std::uint64_t seed) {
    require_basic(config, beta);
    LipschitzTrialReport report;
    report.suite = "lipschitz-single-layer";
    report.trials = trials;
    const std::size_t L = config.conv.size();
    const double factor = config.lambda * std::exp(beta);
    for (std::uint64_t t = 0; t < trials; ++t) {
        Rng rng = Rng(seed).split(t);
        const ParamSet k0 = initialize_params(config, rng);
        const std::vector<double> budget = sample_budgets(L, beta, rng);
        const ParamSet k = sample_in_ball(k0, config, budget, rng);
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(L) - 1));
        double others = 0.0;
        for (std::size_t i = 0; i < L; ++i)
            if (i != j) others += budget[i];
        ParamSet kt = k;
        const double room = std::max(0.0, beta - others);
        kt.conv[j] = kernel_at_distance(k0.conv[j], config.conv_input_size(j), rng.uniform() * room, rng);
        require_member(k, k0, config, beta, report);
        require_member(kt, k0, config, beta, report);

        Example ex{sample_input(config.input_size * config.input_size * config.input_channels, 1.0, rng),
                   sample_label(config, rng)};
        const double lhs = std::abs(loss_at(k, config, ex) - loss_at(kt, config, ex));
        const double dist = operator_norm_fft(k.conv[j] - kt.conv[j], config.conv_input_size(j));
        record(report, lhs, factor * dist, t);
    }
    return report;
}

LipschitzTrialReport verify_all_layers(const NetworkConfig& config, double beta, std::size_t trials,
                                       std::uint64_t seed) {
    require_basic(config, beta);
    LipschitzTrialReport report;
    report.suite = "lipschitz-all-layers";
    report.trials = trials;
    const std::size_t L = config.conv.size();
    const double factor = config.lambda * std::exp(beta);
    for (std::uint64_t t = 0; t < trials; ++t) {
        Rng rng = Rng(seed).split(t);
        const ParamSet k0 = initialize_params(config, rng);
        const ParamSet k = sample_in_ball(k0, config, sample_budgets(L, beta, rng), rng);
        const ParamSet kt = sample_in_ball(k0, config, sample_budgets(L, beta, rng), rng);
        require_member(k, k0, config, beta, report);
        require_member(kt, k0, config, beta, report);

        Example ex{sample_input(config.input_size * config.input_size * config.input_channels, 1.0, rng),
                   sample_label(config, rng)};
        const double lk = loss_at(k, config, ex), lkt = loss_at(kt, config, ex);
        const double lhs = std::abs(lk - lkt);
        record(report, lhs, factor * sigma_dist(k, kt, config), t);

        // hybrid path: swap layers of k for those of kt one at a time
        ParamSet h = k;
        double prev = lk, path = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            h.conv[i] = kt.conv[i];
            const double cur = loss_at(h, config, ex);
            path += std::abs(cur - prev);
            prev = cur;
        }
        if (path + 1e-12 < lhs) ++report.hybrid_violations;
    }
    return report;
}

LipschitzTrialReport verify_general(const NetworkConfig& config, double beta, GeneralCheck check, std::size_t trials,
                                    std::uint64_t seed) {
    config.validate();
    if (config.setting != Setting::general) throw ArgumentError("verify_general needs the general setting");
    if (!(beta > 0.0)) throw ArgumentError("beta must be positive");
    if (check == GeneralCheck::conv_layer && config.conv.empty()) throw ArgumentError("no conv layer to perturb");
    if (check == GeneralCheck::fc_layer && config.fc_widths.empty()) throw ArgumentError("no fc layer to perturb");

    LipschitzTrialReport report;
    report.suite = "lipschitz-general-" + std::string(to_string(check));
    report.trials = trials;
    const std::size_t Lc = config.conv.size(), L = config.depth();
    const double depth = static_cast<double>(L);
    const double factor = lipschitz_const_general(config.chi, config.lambda_eff(), beta, config.nu, depth) / beta;
    const std::size_t dim = config.input_size * config.input_size * config.input_channels;

    for (std::uint64_t t = 0; t < trials; ++t) {
        Rng rng = Rng(seed).split(t);
        ParamSet theta0 = initialize_params(config, rng);
        for (auto& k : theta0.conv) k *= 1.0 + config.nu * rng.uniform();
        for (auto& v : theta0.fc) v *= 1.0 + config.nu * rng.uniform();

        const std::vector<double> budget = sample_budgets(L, beta, rng);
        const ParamSet theta = sample_in_ball(theta0, config, budget, rng);
        ParamSet other;
        double dist = 0.0;
        if (check == GeneralCheck::full) {
            other = sample_in_ball(theta0, config, sample_budgets(L, beta, rng), rng);
            dist = n_dist(theta, other, config);
        } else {
            const bool conv = check == GeneralCheck::conv_layer;
            const std::size_t count = conv ? Lc : config.fc_widths.size();
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(count) - 1));
            const std::size_t slot = conv ? j : Lc + j;
            double others = 0.0;
            for (std::size_t i = 0; i < L; ++i)
                if (i != slot) others += budget[i];
            const double move = rng.uniform() * std::max(0.0, beta - others);
            other = theta;
            if (conv) {
                other.conv[j] = kernel_at_distance(theta0.conv[j], config.conv_input_size(j), move, rng);
                dist = operator_norm_fft(theta.conv[j] - other.conv[j], config.conv_input_size(j));
            } else {
                other.fc[j] = matrix_at_distance(theta0.fc[j], move, rng);
                dist = spectral_norm(theta.fc[j] - other.fc[j]);
            }
        }
        require_member(theta, theta0, config, beta, report);
        require_member(other, theta0, config, beta, report);

        Example ex{sample_input(dim, config.chi, rng), sample_label(config, rng)};
        const double lhs = std::abs(loss_at(theta, config, ex) - loss_at(other, config, ex));
        record(report, lhs, factor * dist, t);
        if (!chain_holds(theta, config, ex.x) || !chain_holds(other, config, ex.x)) ++report.chain_violations;
    }
    return report;
}

namespace {

struct TinyNet {
    NetworkConfig config;
    ParamSet params;
    Example ex;
};

TinyNet tiny_basic(std::size_t layers) {
    TinyNet n;
    n.config = NetworkConfig::basic(2, 1, 1, layers, Activation::relu, 1.0);
    for (std::size_t i = 0; i < layers; ++i) n.params.conv.push_back(RealTensor4::delta_identity(1, 1));
    n.params.last_layer = default_last_layer(4);
    n.ex = {std::vector<double>(4, 0.5), 1};
    return n;
}

TinyNet tiny_general(double chi) {
    TinyNet n;
    n.config.setting = Setting::general;
    n.config.input_size = 2;
    n.config.input_channels = 1;
    n.config.conv = {ConvLayerShape{1, 1, Pooling::none}};
    n.config.fc_widths = {1};
    n.config.activation = Activation::relu;
    n.config.chi = chi;
    n.config.lambda = 1.0;
    n.params.conv.push_back(RealTensor4::delta_identity(1, 1));
    n.params.fc.emplace_back(1, 4, std::vector<double>(4, 0.5));
    n.ex = {std::vector<double>(4, chi / 2.0), 1};
    return n;
}

} // namespace

double constructed_ratio_single_layer(double beta) {
    // K = K0 gives output 1 (loss 0); shrinking the only layer by t lowers the
    // margin to 1 - t, inside the ramp, so the loss moves by t exactly.
    TinyNet n = tiny_basic(1);
    const double t = std::min(beta, 0.5);
    ParamSet moved = n.params;
    moved.conv[0] *= 1.0 - t;
    const double lhs = std::abs(loss_at(n.params, n.config, n.ex) - loss_at(moved, n.config, n.ex));
    const double dist = operator_norm_fft(n.params.conv[0] - moved.conv[0], 2);
    return lhs / (n.config.lambda * std::exp(beta) * dist);
}

double constructed_ratio_all_layers(double beta) {
    TinyNet n = tiny_basic(2);
    const double t = std::min(beta, 0.5);
    ParamSet moved = n.params;
    for (auto& k : moved.conv) k *= 1.0 - t / 2.0;
    const double lhs = std::abs(loss_at(n.params, n.config, n.ex) - loss_at(moved, n.config, n.ex));
    return lhs / (n.config.lambda * std::exp(beta) * sigma_dist(n.params, moved, n.config));
}

double constructed_ratio_general(double beta, GeneralCheck check) {
    TinyNet n = tiny_general(0.5);
    const double t = std::min(beta, 0.5);
    ParamSet moved = n.params;
    double dist = 0.0;
    switch (check) {
    case GeneralCheck::conv_layer:
        moved.conv[0] *= 1.0 - t;
        dist = operator_norm_fft(n.params.conv[0] - moved.conv[0], 2);
        break;
    case GeneralCheck::fc_layer:
        moved.fc[0] *= 1.0 - t;
        dist = spectral_norm(n.params.fc[0] - moved.fc[0]);
        break;
    case GeneralCheck::full:
        moved.conv[0] *= 1.0 - t / 2.0;
        moved.fc[0] *= 1.0 - t / 2.0;
        dist = n_dist(n.params, moved, n.config);
        break;
    }
    const double lhs = std::abs(loss_at(n.params, n.config, n.ex) - loss_at(moved, n.config, n.ex));
    const double factor = lipschitz_const_general(n.config.chi, n.config.lambda_eff(), beta, n.config.nu, 2.0) / beta;
    return lhs / (factor * dist);
}

namespace {

double distance(std::span<const double> a, std::span<const double> b, NormKind norm) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = std::abs(a[i] - b[i]);
        s = norm == NormKind::l2 ? s + v * v : std::max(s, v);
    }
    return norm == NormKind::l2 ? std::sqrt(s) : s;
}

double norm_of(std::span<const double> a, NormKind norm) {
    const std::vector<double> zero(a.size(), 0.0);
    return distance(a, zero, norm);
}

std::vector<double> uniform_in_ball(std::size_t d, double kappa, NormKind norm, Rng& rng) {
    std::vector<double> p(d);
    if (norm == NormKind::linf) {
        for (double& v : p) v = rng.uniform(-kappa, kappa);
        return p;
    }
    p = rng.normal_vector(d);
    const double r = kappa * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / euclidean_norm(p);
    for (double& v : p) v *= r;
    return p;
}

// Centers bucketed in cubes of side eps: anything within eps (l2 or linf)
// lies in one of the 3^d neighbouring cubes.
class CenterIndex {
public:
    CenterIndex(double eps, std::size_t d, NormKind norm) : eps_(eps), d_(d), norm_(norm) {}

    bool near(std::span<const double> p) const {
        std::array<long, 3> cell{};
        for (std::size_t i = 0; i < d_; ++i) cell[i] = static_cast<long>(std::floor(p[i] / eps_));
        std::array<long, 3> off{};
        for (std::size_t n = 0; n < kNeighbours[d_]; ++n) {
            std::size_t code = n;
            for (std::size_t i = 0; i < d_; ++i, code /= 3) off[i] = cell[i] + static_cast<long>(code % 3) - 1;
            const auto it = buckets_.find(key(off));
            if (it == buckets_.end()) continue;
            for (std::size_t c : it->second)
                if (distance(centers_[c], p, norm_) <= eps_) return true;
        }
        return false;
    }

    void add(std::vector<double> p) {
        std::array<long, 3> cell{};
        for (std::size_t i = 0; i < d_; ++i) cell[i] = static_cast<long>(std::floor(p[i] / eps_));
        buckets_[key(cell)].push_back(centers_.size());
        centers_.push_back(std::move(p));
    }

    std::vector<std::vector<double>>& centers() { return centers_; }

private:
    static constexpr std::array<std::size_t, 4> kNeighbours{1, 3, 9, 27};
    static std::uint64_t key(const std::array<long, 3>& c) {
        std::uint64_t k = 0;
        for (long v : c) k = (k << 21) | (static_cast<std::uint64_t>(v + (1L << 20)) & ((1ULL << 21) - 1));
        return k;
    }

    double eps_;
    std::size_t d_;
    NormKind norm_;
    std::vector<std::vector<double>> centers_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

bool near_center(const std::vector<std::vector<double>>& centers, std::span<const double> p, double eps,
                 NormKind norm) {
    return std::any_of(centers.begin(), centers.end(),
                       [&](const std::vector<double>& c) { return distance(c, p, norm) <= eps; });
}

} // namespace

CoverReport build_cover(double kappa, double eps, std::size_t d, NormKind norm, std::uint64_t seed,
                        std::size_t samples) {
    if (d < 1 || d > 3) throw ArgumentError("build_cover supports d = 1, 2, 3, got " + std::to_string(d));
    if (!(eps > 0.0) || !(kappa >= eps)) throw ArgumentError("build_cover needs kappa >= eps > 0");

    CoverReport rep;
    rep.dimension = d;
    rep.radius = kappa;
    rep.granularity = eps;
    rep.norm = norm;
    rep.bound = covering_bound(kappa, static_cast<double>(d), eps);
    rep.volumetric_lower = std::pow(kappa / eps, static_cast<double>(d));

    // candidate grid, origin first, then by norm
    const double h = eps / 4.0;
    const auto steps = static_cast<long>(std::floor(kappa / h));
    std::vector<std::vector<double>> grid;
    std::vector<long> idx(d, -steps);
    while (true) {
        std::vector<double> p(d);
        for (std::size_t i = 0; i < d; ++i) p[i] = static_cast<double>(idx[i]) * h;
        if (norm_of(p, norm) <= kappa) grid.push_back(std::move(p));
        std::size_t i = 0;
        while (i < d && idx[i] == steps) idx[i++] = -steps;
        if (i == d) break;
        ++idx[i];
    }
    std::stable_sort(grid.begin(), grid.end(), [&](const auto& a, const auto& b) {
        return norm_of(a, NormKind::l2) < norm_of(b, NormKind::l2);
    });
    CenterIndex index(eps, d, norm);
    for (auto& p : grid)
        if (!index.near(p)) index.add(std::move(p));

    // extend to a maximal packing with random points of the ball; a round
    // this large leaves an uncovered remainder of measure well below 1e-6
    Rng rng = Rng(seed).split(1);
    constexpr std::size_t kRound = 1000000;
    for (bool added = true; added;) {
        added = false;
        for (std::size_t s = 0; s < kRound; ++s) {
            auto p = uniform_in_ball(d, kappa, norm, rng);
            if (!index.near(p)) {
                index.add(std::move(p));
                added = true;
            }
        }
    }
    rep.centers = std::move(index.centers());
    rep.cover_size = rep.centers.size();

    rep.min_center_distance = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < rep.centers.size(); ++a)
        for (std::size_t b = a + 1; b < rep.centers.size(); ++b)
            rep.min_center_distance = std::min(rep.min_center_distance, distance(rep.centers[a], rep.centers[b], norm));

    Rng check = Rng(seed).split(2);
    rep.sampled_points = samples;
    for (std::size_t s = 0; s < samples; ++s)
        if (!near_center(rep.centers, uniform_in_ball(d, kappa, norm, check), eps, norm)) ++rep.uncovered;
    return rep;
}

double RampClass::value(double theta, double z) const {
    const double t = (theta + 1.0) / 2.0;
    return std::clamp(slope * (z - t) + 0.5, 0.0, 1.0);
}

double RampClass::expectation(double theta) const {
    if (slope == 0.0) return 0.5;
    const double t = (theta + 1.0) / 2.0;
    // the ramp rises from 0 at z0 to 1 at z1
    const double z0 = t - 0.5 / slope, z1 = t + 0.5 / slope;
    const double a = std::clamp(z0, 0.0, 1.0), b = std::clamp(z1, 0.0, 1.0);
    auto antiderivative = [&](double z) { return slope * (0.5 * z * z - t * z) + 0.5 * z; };
    return (antiderivative(b) - antiderivative(a)) + (1.0 - b);
}

McRateReport mc_gap_rate(const RampClass& cls, const std::vector<std::size_t>& n_grid, std::size_t repetitions,
                         std::uint64_t seed, double constant, double delta) {
    if (!(cls.slope >= 0.0) || !std::isfinite(cls.slope)) throw ArgumentError("ramp class slope must be finite and >= 0");
    if (cls.theta_grid < 2) throw ArgumentError("ramp class needs at least 2 grid points");
    if (n_grid.size() < 2 || repetitions < 1) throw ArgumentError("mc_gap_rate needs >= 2 sample sizes and >= 1 repetition");
    for (std::size_t n : n_grid)
        if (n < 1) throw ArgumentError("sample sizes must be positive");

    std::vector<double> thetas(cls.theta_grid), exact(cls.theta_grid);
    for (std::size_t i = 0; i < cls.theta_grid; ++i) {
        thetas[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(cls.theta_grid - 1);
        exact[i] = cls.expectation(thetas[i]);
    }

    McRateReport rep;
    rep.n_grid = n_grid;
    std::vector<double> stderr_(n_grid.size());
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        const std::size_t n = n_grid[g];
        double sum = 0.0, sumsq = 0.0;
        std::vector<double> z(n);
        for (std::size_t r = 0; r < repetitions; ++r) {
            Rng rng = Rng(seed).split(g * 1000003 + r);
            for (double& v : z) v = rng.uniform();
            double sup = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < thetas.size(); ++i) {
                double s = 0.0;
                for (double v : z) s += cls.value(thetas[i], v);
                sup = std::max(sup, exact[i] - s / static_cast<double>(n));
            }
            sum += sup;
            sumsq += sup * sup;
        }
        const double reps = static_cast<double>(repetitions);
        const double mean = sum / reps;
        rep.mean_sup_gap.push_back(mean);
        stderr_[g] = repetitions > 1 ? std::sqrt(std::max(0.0, (sumsq / reps - mean * mean) / (reps - 1.0))) : 0.0;
    }

    // least squares on (log n, log gap)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        if (!(rep.mean_sup_gap[g] > 0.0)) rep.slope_defined = false;
        const double x = std::log(static_cast<double>(n_grid[g]));
        const double y = rep.slope_defined ? std::log(rep.mean_sup_gap[g]) : 0.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(n_grid.size());
    if (rep.slope_defined) {
        rep.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        rep.intercept = (sy - rep.slope * sx) / m;
    } else {
        rep.slope = std::numeric_limits<double>::quiet_NaN();
        rep.intercept = std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t g = 0; g + 1 < n_grid.size(); ++g) {
        const double tol = 3.0 * std::hypot(stderr_[g], stderr_[g + 1]);
        if (n_grid[g + 1] > n_grid[g] && rep.mean_sup_gap[g + 1] > rep.mean_sup_gap[g] + tol)
            ++rep.nonincreasing_violations;
    }
    const auto largest = static_cast<std::size_t>(
        std::max_element(n_grid.begin(), n_grid.end()) - n_grid.begin());
    const double nl = static_cast<double>(n_grid[largest]);
    rep.gap_at_largest_n = rep.mean_sup_gap[largest];
    rep.rate_bound_at_largest_n = constant * (cls.B() * std::sqrt(1.0 / nl) + std::sqrt(std::log(1.0 / delta) / nl));
    return rep;
}

namespace {

NetworkConfig random_small_config(Rng& rng) {
    const Activation act = rng.uniform() < 0.5 ? Activation::relu : Activation::tanh;
    if (rng.uniform() < 0.4) {
        const auto d = static_cast<std::size_t>(rng.uniform_int(3, 4));
        const auto c = static_cast<std::size_t>(rng.uniform_int(1, 2));
        const auto k = static_cast<std::size_t>(rng.uniform_int(1, 3));
        const auto L = static_cast<std::size_t>(rng.uniform_int(1, 2));
        return NetworkConfig::basic(d, c, k, L, act, rng.uniform() < 0.5 ? 1.0 : 2.0);
    }
    NetworkConfig cfg;
    cfg.setting = Setting::general;
    cfg.input_size = 4;
    cfg.input_channels = static_cast<std::size_t>(rng.uniform_int(1, 2));
    cfg.activation = act;
    cfg.lambda = rng.uniform() < 0.5 ? 1.0 : 2.0;
    const auto layers = static_cast<std::size_t>(rng.uniform_int(1, 2));
    std::size_t d = 4;
    for (std::size_t i = 0; i < layers; ++i) {
        ConvLayerShape s;
        s.kernel_size = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(std::min<std::size_t>(d, 3))));
        s.channels = static_cast<std::size_t>(rng.uniform_int(1, 3));
        const auto pick = rng.uniform_int(0, 2);
        s.pooling = d % 2 == 0 && d >= 2 ? static_cast<Pooling>(pick) : Pooling::none;
        if (s.pooling != Pooling::none) d /= 2;
        cfg.conv.push_back(s);
    }
    const std::size_t out = rng.uniform() < 0.5 ? 1 : 3;
    if (rng.uniform() < 0.5) cfg.fc_widths.push_back(static_cast<std::size_t>(rng.uniform_int(2, 4)));
    cfg.fc_widths.push_back(out);
    return cfg;
}

bool away_from_kinks(const ParamSet& p, const NetworkConfig& config, const Example& ex) {
    constexpr double kGap = 1e-3;
    const ForwardCache cache = forward_cache(p, config, ex.x);
    if (config.activation == Activation::relu) {
        for (const auto& lc : cache.conv)
            for (double z : lc.preact)
                if (std::abs(z) < kGap) return false;
        for (std::size_t i = 0; i + 1 < cache.fc.size(); ++i)
            for (double z : cache.fc[i].preact)
                if (std::abs(z) < kGap) return false;
    }
    for (std::size_t i = 0; i < cache.conv.size(); ++i) {
        if (config.conv[i].pooling != Pooling::max2x2) continue;
        const auto& m = cache.conv[i].activated;
        const std::size_t d = config.conv_input_size(i), ch = config.conv[i].channels, h = d / 2;
        for (std::size_t a = 0; a < h; ++a)
            for (std::size_t b = 0; b < h; ++b)
                for (std::size_t c = 0; c < ch; ++c) {
                    double v[4] = {m[((2 * a) * d + 2 * b) * ch + c], m[((2 * a) * d + 2 * b + 1) * ch + c],
                                   m[((2 * a + 1) * d + 2 * b) * ch + c], m[((2 * a + 1) * d + 2 * b + 1) * ch + c]};
                    std::sort(v, v + 4);
                    if (v[3] - v[2] < kGap) return false;
                }
    }
    const auto& y = cache.output;
    if (y.size() > 1) {
        std::vector<double> others;
        for (std::size_t j = 0; j < y.size(); ++j)
            if (static_cast<int>(j) != ex.label) others.push_back(y[j]);
        std::sort(others.rbegin(), others.rend());
        if (others.size() > 1 && others[0] - others[1] < kGap) return false;
    }
    const double margin = margin_of(y, ex.label);
    return std::abs(margin) >= kGap && std::abs(margin - 1.0 / config.lambda) >= kGap;
}

} // namespace

GradientCheckReport verify_gradient(std::size_t networks, std::uint64_t seed) {
    GradientCheckReport rep;
    for (std::uint64_t t = 0; t < networks; ++t) {
        Rng rng = Rng(seed).split(t);
        NetworkConfig config;
        ParamSet params;
        Examples batch;
        for (bool ok = false; !ok;) {
            config = random_small_config(rng);
            params = initialize_params(config, rng);
            for (auto& k : params.conv)
                for (double& v : k.storage()) v += 0.3 * rng.normal();
            for (auto& m : params.fc)
                for (double& v : m.storage()) v += 0.3 * rng.normal();
            batch.clear();
            ok = true;
            const std::size_t dim = config.input_size * config.input_size * config.input_channels;
            for (int e = 0; e < 3 && ok; ++e) {
                Example ex{sample_input(dim, 1.0, rng), sample_label(config, rng)};
                ok = away_from_kinks(params, config, ex);
                batch.push_back(std::move(ex));
            }
            if (!ok) ++rep.resampled;
        }
        ++rep.networks;
        const Gradient g = grad(params, config, batch, config.lambda);
        auto check_coordinate = [&](double& slot, double analytic) {
            const double saved = slot;
            slot = saved + kGradientStep;
            const double up = mean_loss(params, config, batch, config.lambda);
            slot = saved - kGradientStep;
            const double down = mean_loss(params, config, batch, config.lambda);
            slot = saved;
            const double fd = (up - down) / (2.0 * kGradientStep);
            const double err =
                std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), kGradientFloor});
            rep.max_rel_error = std::max(rep.max_rel_error, err);
            if (err > kGradientTolerance) ++rep.violations;
            ++rep.coordinates;
        };
        for (std::size_t i = 0; i < params.conv.size(); ++i) {
            const auto an = g.grads.conv[i].data();
            for (std::size_t s = 0; s < an.size(); ++s) check_coordinate(params.conv[i].storage()[s], an[s]);
        }
        for (std::size_t i = 0; i < params.fc.size(); ++i) {
            const auto an = g.grads.fc[i].data();
            for (std::size_t s = 0; s < an.size(); ++s) check_coordinate(params.fc[i].storage()[s], an[s]);
        }
    }
    return rep;
}

OpnormCheckReport verify_opnorm(std::size_t trials, std::uint64_t seed) {
    OpnormCheckReport rep;
    for (std::uint64_t t = 0; t < trials; ++t) {
        Rng rng = Rng(seed).split(t);
        const auto d = static_cast<std::size_t>(rng.uniform_int(2, 8));
        const auto cin = static_cast<std::size_t>(rng.uniform_int(1, 3));
        const auto cout = static_cast<std::size_t>(rng.uniform_int(1, 3));
        const auto k = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(d)));
        RealTensor4 kernel({k, k, cin, cout});
        for (double& v : kernel.storage()) v = rng.normal();
        const double fast = operator_norm_fft(kernel, d);
        const double dense = spectral_norm(materialize_operator(kernel, d));
        rep.max_rel_deviation = std::max(rep.max_rel_deviation, std::abs(fast - dense) / dense);
        ++rep.trials;
    }
    return rep;
}

} // namespace cnnbound
