#include "cnnbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cnnbound/convspec.hpp"
#include "cnnbound/errors.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/tensor.hpp"

namespace cnnbound {

double BoundReport::term(const std::string& key) const {
    for (const auto& [k, v] : terms)
        if (k == key) return v;
    throw ArgumentError("bound report '" + name + "' has no term '" + key + "'");
}

bool BoundReport::has_flag(const std::string& flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

double ScenarioResult::value(const std::string& key) const {
    for (const auto& [k, v] : rows)
        if (k == key) return v;
    throw ArgumentError("scenario '" + name + "' has no quantity '" + key + "'");
}

namespace {

void validate(const BoundInput& in) {
    if (!(in.delta > 0.0 && in.delta < 1.0)) throw ArgumentError("delta must lie in (0, 1)");
    if (!(in.n >= 1.0)) throw ArgumentError("n must be at least 1");
    if (!(in.W >= 0.0)) throw ArgumentError("W must be nonnegative");
    if (!(in.beta >= 0.0)) throw ArgumentError("beta must be nonnegative");
    if (!(in.constant > 0.0)) throw ArgumentError("C must be positive");
    if (!(in.eta >= 0.0)) throw ArgumentError("eta must be nonnegative");
    if (!(in.lambda > 0.0)) throw ArgumentError("lambda must be positive");
    if (!(in.loss_range > 0.0)) throw ArgumentError("M must be positive");
    if (!(in.train_loss >= 0.0 && in.train_loss <= in.loss_range))
        throw ArgumentError("train loss must lie in [0, M]");
}

/// log(x), or 0 with a flag when x <= 0 (a degenerate single-function class).
double floored_log(double x, BoundReport& report) {
    if (x > 0.0) return std::log(x);
    if (!report.has_flag("log-term-floored")) report.flags.emplace_back("log-term-floored");
    return 0.0;
}

double floored_sqrt(double x, BoundReport& report) {
    if (x >= 0.0) return std::sqrt(x);
    report.flags.emplace_back("radicand-floored");
    return 0.0;
}

} // namespace

double lipschitz_const_basic(double beta, double lambda) {
    if (!(beta >= 0.0) || !(lambda >= 0.0)) throw ArgumentError("beta and lambda must be nonnegative");
    return beta * lambda * std::exp(beta);
}

double lipschitz_const_general(double chi, double lambda, double beta, double nu, double depth) {
    if (!(depth >= 1.0)) throw ArgumentError("lipschitz_const_general: L must be at least 1");
    if (!(chi >= 0.0) || !(lambda >= 0.0) || !(beta >= 0.0) || !(nu >= 0.0))
        throw ArgumentError("lipschitz_const_general: arguments must be nonnegative");
    if (chi == 0.0 || lambda == 0.0 || beta == 0.0) return 0.0;
    return std::exp(std::log(chi) + std::log(lambda) + std::log(beta) + depth * std::log1p(nu + beta / depth));
}

double covering_log_bound(double radius, double dim, double eps) {
    if (!(radius > 0.0) || !(eps > 0.0) || !(dim >= 1.0))
        throw ArgumentError("covering bound needs B, eps > 0 and d >= 1");
    return dim * (std::log(3.0) + std::log(radius) - std::log(eps));
}

double covering_bound(double radius, double dim, double eps) { return std::exp(covering_log_bound(radius, dim, eps)); }

std::array<BoundReport, 3> theorem1_bounds(const BoundInput& in) {
    validate(in);
    if (!(in.lambda >= 1.0)) throw ArgumentError("theorem 1 requires lambda >= 1");
    const double log_inv_delta = -std::log(in.delta);
    std::array<BoundReport, 3> out;

    auto& rel = out[0];
    rel.name = "theorem1.relative";
    const double excess1 =
        in.constant * (in.W * (in.beta + floored_log(in.lambda * in.n, rel)) + log_inv_delta) / in.n;
    rel.value = (1.0 + in.eta) * in.train_loss + std::max(excess1, 0.0);
    rel.terms = {{"train_term", (1.0 + in.eta) * in.train_loss}, {"excess", excess1}};

    auto& large = out[1];
    large.name = "theorem1.large-beta";
    large.applicable = in.beta >= 5.0;
    large.flags.emplace_back(large.applicable ? "beta>=5 branch" : "inapplicable: beta<5");
    const double radicand = (in.W * (in.beta + floored_log(in.lambda, large)) + log_inv_delta) / in.n;
    const double excess2 = in.constant * floored_sqrt(radicand, large);
    large.value = in.train_loss + excess2;
    large.terms = {{"train_term", in.train_loss}, {"excess", excess2}};

    auto& small = out[2];
    small.name = "theorem1.small-beta";
    small.flags.emplace_back("all beta");
    const double lip_term = in.beta * in.lambda * std::sqrt(in.W / in.n);
    const double conf_term = std::sqrt(log_inv_delta / in.n);
    small.value = in.train_loss + in.constant * (lip_term + conf_term);
    small.terms = {{"train_term", in.train_loss}, {"lipschitz_term", lip_term}, {"confidence_term", conf_term}};
    return out;
}

std::array<BoundReport, 3> theorem2_bounds(const BoundInput& in) {
    validate(in);
    if (!(in.chi > 0.0)) throw ArgumentError("chi must be positive");
    if (!(in.nu >= 0.0)) throw ArgumentError("nu must be nonnegative");
    const double log_inv_delta = -std::log(in.delta);
    const double lip = lipschitz_const_general(in.chi, in.lambda, in.beta, in.nu, in.depth);
    const double cm = in.constant * in.loss_range;
    std::array<BoundReport, 3> out;

    auto& rel = out[0];
    rel.name = "theorem2.relative";
    const double inner1 = in.beta + in.nu * in.depth + floored_log(in.chi * in.lambda * in.beta * in.n, rel);
    const double excess1 = cm * (in.W * inner1 + log_inv_delta) / in.n;
    rel.value = (1.0 + in.eta) * in.train_loss + std::max(excess1, 0.0);
    rel.terms = {{"train_term", (1.0 + in.eta) * in.train_loss}, {"excess", excess1}, {"lipschitz", lip}};

    auto& large = out[1];
    large.name = "theorem2.large-lipschitz";
    large.applicable = lip >= 5.0;
    large.flags.emplace_back(large.applicable ? "lipschitz>=5 branch" : "inapplicable: lipschitz<5");
    const double inner2 = in.beta + in.nu * in.depth + floored_log(in.chi * in.lambda * in.beta, large);
    const double excess2 = cm * floored_sqrt((in.W * inner2 + log_inv_delta) / in.n, large);
    large.value = in.train_loss + excess2;
    large.terms = {{"train_term", in.train_loss}, {"excess", excess2}, {"lipschitz", lip}};

    auto& small = out[2];
    small.name = "theorem2.all-lipschitz";
    small.flags.emplace_back("all beta");
    const double lip_term = lip * std::sqrt(in.W / in.n);
    const double conf_term = in.loss_range * std::sqrt(log_inv_delta / in.n);
    small.value = in.train_loss + in.constant * (lip_term + conf_term);
    small.terms = {{"train_term", in.train_loss},
                   {"lipschitz_term", lip_term},
                   {"confidence_term", conf_term},
                   {"lipschitz", lip}};
    return out;
}

NonuniformLevel nonuniform_level(double dist, double delta) {
    if (!(dist >= 0.0) || !std::isfinite(dist)) throw ArgumentError("distance must be finite and nonnegative");
    if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in (0, 1)");
    NonuniformLevel level;
    while (level.beta_j < dist) {
        ++level.j;
        level.beta_j = 5.0 * std::ldexp(1.0, level.j);
    }
    const double jj = static_cast<double>(level.j + 1);
    level.delta_j = 6.0 * delta / (std::numbers::pi * std::numbers::pi * jj * jj);
    return level;
}

std::array<BoundReport, 2> nonuniform_bound(double dist, const BoundInput& in) {
    validate(in);
    if (!(in.lambda >= 1.0)) throw ArgumentError("the distance-adaptive bound requires lambda >= 1");
    const NonuniformLevel level = nonuniform_level(dist, in.delta);
    const double log_inv = -std::log(level.delta_j);
    std::array<BoundReport, 2> out;

    auto relative = [&](double radius) {
        return (1.0 + in.eta) * in.train_loss +
               in.constant * (in.W * (radius + std::log(in.lambda * in.n)) + log_inv) / in.n;
    };
    auto regret = [&](double radius) {
        return in.train_loss + in.constant * std::sqrt((in.W * (radius + std::log(in.lambda)) + log_inv) / in.n);
    };
    const std::vector<std::pair<std::string, double>> level_terms = {
        {"j", static_cast<double>(level.j)}, {"beta_j", level.beta_j}, {"delta_j", level.delta_j}};

    out[0].name = "nonuniform.relative";
    out[0].value = relative(level.beta_j);
    out[0].terms = level_terms;
    out[0].terms.emplace_back("value_at_2dist", relative(2.0 * dist));

    out[1].name = "nonuniform.regret";
    out[1].value = regret(level.beta_j);
    out[1].terms = level_terms;
    out[1].terms.emplace_back("value_at_2dist", regret(2.0 * dist));
    return out;
}

namespace {

/// log of lambda * prod ||op|| * (sum op21^(2/3) / ||op||^(2/3))^(3/2).
double bft_log_main(const std::vector<LayerNormPair>& layers, double lambda) {
    double log_prod = 0.0;
    double sum = 0.0;
    for (const auto& layer : layers) {
        if (!(layer.op_norm > 0.0)) throw ArgumentError("bft_bound: layer operator norm must be positive");
        if (!(layer.op21_diff >= 0.0)) throw ArgumentError("bft_bound: (2,1) norm must be nonnegative");
        log_prod += std::log(layer.op_norm);
        sum += std::cbrt(layer.op21_diff * layer.op21_diff) / std::cbrt(layer.op_norm * layer.op_norm);
    }
    if (sum == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(lambda) + log_prod + 1.5 * std::log(sum);
}

} // namespace

double bft_main_term(const std::vector<LayerNormPair>& layers, double lambda, double n, double d, double c,
                     double depth) {
    if (!(n >= 1.0) || !(lambda > 0.0)) throw ArgumentError("bft_bound: n >= 1 and lambda > 0 required");
    const double log_main = bft_log_main(layers, lambda);
    const double log_factor = std::log(std::pow(d, 4) * c * c * depth);
    return std::exp(log_main + std::log(log_factor) - 0.5 * std::log(n));
}

double bft_bound(const std::vector<LayerNormPair>& layers, double lambda, double n, double delta, double d, double c,
                 double depth) {
    if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in (0, 1)");
    return bft_main_term(layers, lambda, n, d, c, depth) + std::sqrt(-std::log(delta) / n);
}

double golowich_bound(const std::vector<double>& frobenius_norms, double lambda, double depth, double n) {
    if (!(n >= 1.0) || !(lambda > 0.0) || !(depth >= 1.0))
        throw ArgumentError("golowich_bound: n >= 1, lambda > 0 and L >= 1 required");
    double log_prod = 0.0;
    for (double f : frobenius_norms) {
        if (!(f > 0.0)) throw ArgumentError("golowich_bound: norms must be positive");
        log_prod += std::log(f);
    }
    return std::exp(std::log(lambda) + 0.5 * std::log(depth) + log_prod - 0.5 * std::log(n));
}

std::map<std::string, double> parse_dims(const std::string& text) {
    std::map<std::string, double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ArgumentError("malformed dimension '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(val, &used);
        } catch (const std::exception&) {
            throw ArgumentError("malformed value for '" + key + "'");
        }
        if (used != val.size()) throw ArgumentError("malformed value for '" + key + "'");
        out[key] = v;
    }
    return out;
}

namespace {

double get(const std::map<std::string, double>& dims, const std::string& key) {
    const auto it = dims.find(key);
    if (it == dims.end()) throw ArgumentError("scenario needs dimension '" + key + "'");
    return it->second;
}

double get_or(const std::map<std::string, double>& dims, const std::string& key, double fallback) {
    const auto it = dims.find(key);
    return it == dims.end() ? fallback : it->second;
}

std::size_t get_count(const std::map<std::string, double>& dims, const std::string& key) {
    const double v = get(dims, key);
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e6)
        throw ArgumentError("dimension '" + key + "' must be a positive integer");
    return static_cast<std::size_t>(v);
}

ScenarioResult conv_eps_scenario(const std::map<std::string, double>& dims) {
    const std::size_t k = get_count(dims, "k"), c = get_count(dims, "c"), d = get_count(dims, "d"),
                      layers = get_count(dims, "L");
    if (k > d) throw ArgumentError("conv-eps scenario needs k <= d");
    const double eps = get_or(dims, "eps", 1.0 / static_cast<double>(k * k));
    const double lambda = get_or(dims, "lambda", 1.0), n = get_or(dims, "n", 10000.0),
                 delta = get_or(dims, "delta", 0.05);

    const RealTensor4 initial = RealTensor4::delta_identity(k, c);
    RealTensor4 current = initial;
    for (double& v : current.storage()) v += eps;
    const ConvLayerSpec layer{current, d};
    const ConvLayerSpec init_layer{initial, d};

    const double op_norm = operator_norm_fft(layer);
    const double op_norm_diff = operator_norm_fft(current - initial, d);
    const std::size_t side = d * d * c;
    const double op21 =
        side <= kMaterializeLimit ? operator_21_norm(layer, init_layer) : operator_21_norm_structured(layer, init_layer);
    const double frob = operator_frobenius(current, d);
    const auto L = static_cast<double>(layers);
    const double sigma = L * op_norm_diff;
    const double W = L * static_cast<double>(k * k * c * c);

    const std::vector<LayerNormPair> per_layer(layers, LayerNormPair{op_norm, op21});
    const double log_inv_delta = -std::log(delta);
    const double ours_main = std::sqrt(W * (sigma + std::log(lambda)) + log_inv_delta) / std::sqrt(n);

    ScenarioResult r;
    r.name = "conv-eps";
    r.rows = {{"k", static_cast<double>(k)},
              {"c", static_cast<double>(c)},
              {"d", static_cast<double>(d)},
              {"L", L},
              {"eps", eps},
              {"W", W},
              {"op_norm", op_norm},
              {"op_norm_closed_form", 1.0 + eps * static_cast<double>(k * k * c)},
              {"sigma_dist", sigma},
              {"sigma_dist_closed_form", eps * static_cast<double>(k * k * c) * L},
              {"op21_diff", op21},
              {"op21_diff_closed_form", eps * std::pow(static_cast<double>(c), 1.5) * static_cast<double>(d * d * k)},
              {"op_frobenius", frob},
              {"ours_main_term", ours_main},
              {"bft_main_term", bft_main_term(per_layer, lambda, n, static_cast<double>(d), static_cast<double>(c), L)},
              {"bft_bound", bft_bound(per_layer, lambda, n, delta, static_cast<double>(d), static_cast<double>(c), L)},
              {"golowich_bound", golowich_bound(std::vector<double>(layers, frob), lambda, L, n)}};
    return r;
}

ScenarioResult hadamard_scenario(const std::map<std::string, double>& dims) {
    const std::size_t D = get_count(dims, "D"), layers = get_count(dims, "L");
    const double lambda = get_or(dims, "lambda", 1.0), n = get_or(dims, "n", 10000.0),
                 delta = get_or(dims, "delta", 0.05);
    const RealMatrix h = hadamard_sylvester(D);
    RealMatrix scaled = h;
    scaled *= 1.0 / std::sqrt(static_cast<double>(D));
    const RealMatrix initial = RealMatrix::identity(D);
    const RealMatrix current = initial + scaled;
    const RealMatrix diff = current - initial;

    const double v_norm = spectral_norm(current);
    const double diff_norm = spectral_norm(diff);
    const double diff21 = norm_21(transpose(diff));
    const double frob = frobenius(current);
    const auto L = static_cast<double>(layers);
    const double beta = L * diff_norm;
    const double W = static_cast<double>(D) * static_cast<double>(D) * L;

    BoundInput in;
    in.beta = beta;
    in.W = W;
    in.n = n;
    in.delta = delta;
    in.lambda = lambda;
    in.depth = L;
    const auto thm2 = theorem2_bounds(in);

    // The fc comparison uses D = c d^2 with d = 1, so log(d^4 c^2 L) = log(D^2 L).
    const std::vector<LayerNormPair> per_layer(layers, LayerNormPair{v_norm, diff21});
    const double dd = static_cast<double>(D);
    const double log_inv_delta = -std::log(delta);

    ScenarioResult r;
    r.name = "hadamard";
    r.rows = {{"D", dd},
              {"L", L},
              {"W", W},
              {"V_norm", v_norm},
              {"V_minus_V0_norm", diff_norm},
              {"V_minus_V0_21", diff21},
              {"beta", beta},
              {"V_frobenius", frob},
              {"ours_main_term", thm2[1].term("excess")},
              // proportional form only: drops the log(beta) inside the root
              {"ours_simplified", (dd * L + dd * std::sqrt(L * std::log(std::max(lambda, 1.0))) +
                                    std::sqrt(log_inv_delta)) /
                                       std::sqrt(n)},
              {"bft_main_term", bft_main_term(per_layer, lambda, n, 1.0, dd, L)},
              {"bft_bound", bft_bound(per_layer, lambda, n, delta, 1.0, dd, L)},
              {"golowich_bound", golowich_bound(std::vector<double>(layers, frob), lambda, L, n)}};
    return r;
}

} // namespace

ScenarioResult scenario_eval(const std::string& name, const std::map<std::string, double>& dims) {
    if (name == "conv-eps") return conv_eps_scenario(dims);
    if (name == "hadamard") return hadamard_scenario(dims);
    throw ArgumentError("unknown scenario '" + name + "'");
}

} // namespace cnnbound
