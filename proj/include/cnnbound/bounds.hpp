#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cnnbound {

/// Scalars consumed by the bound formulas. `constant` is the unspecified
/// absolute constant C of the theorems; every reported value is "modulo C".
struct BoundInput {
    double beta = 0.0;
    double W = 1.0;
    double n = 1.0;
    double delta = 0.05;
    double lambda = 1.0;
    double eta = 0.0;
    double constant = 1.0; // C
    double loss_range = 1.0; // M
    double chi = 1.0;
    double nu = 0.0;
    double depth = 1.0; // L
    double train_loss = 0.0;
};

struct BoundReport {
    std::string name;
    double value = 0.0;
    bool applicable = true;
    std::vector<std::string> flags;
    std::vector<std::pair<std::string, double>> terms;

    double term(const std::string& key) const;
    bool has_flag(const std::string& flag) const;
};

/// beta * lambda * e^beta.
double lipschitz_const_basic(double beta, double lambda);
/// chi * lambda * beta * (1 + nu + beta / L)^L, evaluated in log space.
double lipschitz_const_general(double chi, double lambda, double beta, double nu, double depth);

/// d * log(3B / eps).
double covering_log_bound(double radius, double dim, double eps);
/// (3B / eps)^d; may be +inf when the value exceeds the double range.
double covering_bound(double radius, double dim, double eps);

std::array<BoundReport, 3> theorem1_bounds(const BoundInput& in);
std::array<BoundReport, 3> theorem2_bounds(const BoundInput& in);

/// The dyadic level used by the distance-adaptive bound: the least j >= 0
/// with 5 * 2^j >= dist, its radius, and the confidence share
/// delta_j = 6 delta / (pi^2 (j + 1)^2), which sums to delta over all levels.
struct NonuniformLevel {
    int j = 0;
    double beta_j = 5.0;
    double delta_j = 0.0;
};
NonuniformLevel nonuniform_level(double dist, double delta);

/// Both distance-adaptive displays, evaluated at the level's beta_j and
/// delta_j. The term breakdown also carries the value obtained by
/// substituting 2 * dist for beta_j.
std::array<BoundReport, 2> nonuniform_bound(double dist, const BoundInput& in);

struct LayerNormPair {
    double op_norm = 0.0;   // ||op(K^(i))||_2
    double op21_diff = 0.0; // ||op(K^(i))^T - op(K0^(i))^T||_{2,1}
};

/// Spectrally-normalized margin comparison bound translated to conv layers:
/// [lambda (prod ||op||) (sum op21^(2/3) / ||op||^(2/3))^(3/2) log(d^4 c^2 L)
///  + sqrt(log(1/delta))] / sqrt(n).
double bft_bound(const std::vector<LayerNormPair>& layers, double lambda, double n, double delta, double d, double c,
                 double depth);
/// The first summand of bft_bound's numerator divided by sqrt(n).
double bft_main_term(const std::vector<LayerNormPair>& layers, double lambda, double n, double d, double c,
                     double depth);

/// Size-independent comparison bound: lambda sqrt(L) prod ||op(K^(i))||_F / sqrt(n).
double golowich_bound(const std::vector<double>& frobenius_norms, double lambda, double depth, double n);

struct ScenarioResult {
    std::string name;
    std::vector<std::pair<std::string, double>> rows;
    double value(const std::string& key) const;
};

/// Builds the comparison scenario explicitly and evaluates all norms and
/// bounds on it.
///
/// "conv-eps": identity kernels K0, K = K0 + eps in every entry; keys k, c, d,
/// L and optionally eps (default 1/k^2).
/// "hadamard": fully connected V0 = I, V = I + H / sqrt(D); keys D, L.
/// Both accept lambda, n and delta (defaults 1, 10000, 0.05).
ScenarioResult scenario_eval(const std::string& name, const std::map<std::string, double>& dims);

/// Parses "k=3,c=2,d=8,L=3" style dimension lists.
std::map<std::string, double> parse_dims(const std::string& text);

} // namespace cnnbound
