#include "cnnbound/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <numeric>

#include "cnnbound/convspec.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/norms.hpp"

namespace cnnbound {

RealMatrix random_orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
    const bool by_rows = rows <= cols;
    const std::size_t count = by_rows ? rows : cols;
    const std::size_t len = by_rows ? cols : rows;
    std::vector<std::vector<double>> basis;
    while (basis.size() < count) {
        std::vector<double> v = rng.normal_vector(len);
        // two Gram-Schmidt passes for orthogonality to roundoff
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) {
                const double dot = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
                for (std::size_t t = 0; t < len; ++t) v[t] -= dot * b[t];
            }
        const double n = euclidean_norm(v);
        if (n < 1e-8) continue;
        for (auto& x : v) x /= n;
        basis.push_back(std::move(v));
    }
    RealMatrix m(rows, cols);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t t = 0; t < len; ++t) {
            if (by_rows)
                m(i, t) = basis[i][t];
            else
                m(t, i) = basis[i][t];
        }
    return m;
}

ParamSet initialize_params(const NetworkConfig& config, Rng& rng) {
    config.validate();
    ParamSet p;
    for (std::size_t i = 0; i < config.conv.size(); ++i) {
        const std::size_t k = config.conv[i].kernel_size;
        RealTensor4 kernel({k, k, config.conv_input_channels(i), config.conv[i].channels});
        for (double& v : kernel.storage()) v = rng.normal();
        kernel *= 1.0 / operator_norm_fft(kernel, config.conv_input_size(i));
        p.conv.push_back(std::move(kernel));
    }
    for (std::size_t i = 0; i < config.fc_widths.size(); ++i)
        p.fc.push_back(random_orthogonal(config.fc_widths[i], config.fc_input_dim(i), rng));
    if (config.setting == Setting::basic) p.last_layer = default_last_layer(config.flattened_size());
    return p;
}

ParamSet zeros_like(const ParamSet& like) {
    ParamSet z;
    for (const auto& k : like.conv) z.conv.emplace_back(k.dims());
    for (const auto& v : like.fc) z.fc.emplace_back(v.rows(), v.cols());
    return z;
}

std::string_view to_string(Surrogate s) noexcept { return s == Surrogate::ramp ? "ramp" : "hinge"; }

Surrogate parse_surrogate(std::string_view s) {
    if (s == "ramp") return Surrogate::ramp;
    if (s == "hinge") return Surrogate::hinge;
    throw ArgumentError("unknown surrogate '" + std::string(s) + "' (expected ramp or hinge)");
}

namespace {

double surrogate_loss(double margin, double lambda, Surrogate s) {
    return s == Surrogate::ramp ? ramp(margin, lambda) : std::max(0.0, 1.0 - lambda * margin);
}

/// d(loss)/d(yhat) for one example, with zero subgradient at kinks.
std::vector<double> loss_gradient(std::span<const double> yhat, int label, double lambda, Surrogate s) {
    std::vector<double> g(yhat.size(), 0.0);
    const double margin = margin_of(yhat, label);
    const bool sloped = s == Surrogate::ramp ? margin > 0.0 && margin < 1.0 / lambda : margin < 1.0 / lambda;
    if (!sloped) return g;
    if (yhat.size() == 1) {
        g[0] = -lambda * label;
        return g;
    }
    std::size_t other = yhat.size();
    for (std::size_t j = 0; j < yhat.size(); ++j) {
        if (j == static_cast<std::size_t>(label)) continue;
        if (other == yhat.size() || yhat[j] > yhat[other]) other = j;
    }
    g[static_cast<std::size_t>(label)] = -lambda;
    g[other] = lambda;
    return g;
}

} // namespace

Gradient grad(const ParamSet& params, const NetworkConfig& config, std::span<const Example> batch, double lambda,
              Surrogate surrogate) {
    if (batch.empty()) throw ArgumentError("grad: empty batch");
    Gradient out;
    out.grads = zeros_like(params);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;

    for (const Example& ex : batch) {
        const ForwardCache cache = forward_cache(params, config, ex.x);
        loss += surrogate_loss(margin_of(cache.output, ex.label), lambda, surrogate);
        std::vector<double> g = loss_gradient(cache.output, ex.label, lambda, surrogate);
        if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
        for (auto& v : g) v *= scale;

        if (config.setting == Setting::basic) {
            const auto& w = *params.last_layer;
            std::vector<double> gh(w.size());
            for (std::size_t t = 0; t < w.size(); ++t) gh[t] = w[t] * g[0];
            g = std::move(gh);
        }
        for (std::size_t i = params.fc.size(); i-- > 0;) {
            const LayerCache& lc = cache.fc[i];
            const bool last = i + 1 == params.fc.size();
            if (!last)
                for (std::size_t t = 0; t < g.size(); ++t) g[t] *= activate_derivative(config.activation, lc.preact[t]);
            RealMatrix& gv = out.grads.fc[i];
            const RealMatrix& v = params.fc[i];
            std::vector<double> gin(v.cols(), 0.0);
            for (std::size_t r = 0; r < v.rows(); ++r) {
                const double gr = g[r];
                if (gr == 0.0) continue;
                for (std::size_t c = 0; c < v.cols(); ++c) {
                    gv(r, c) += gr * lc.input[c];
                    gin[c] += v(r, c) * gr;
                }
            }
            g = std::move(gin);
        }
        for (std::size_t i = params.conv.size(); i-- > 0;) {
            const LayerCache& lc = cache.conv[i];
            const std::size_t d = config.conv_input_size(i);
            g = pool_backward(lc.activated, d, params.conv[i].c_out(), config.conv[i].pooling, g);
            for (std::size_t t = 0; t < g.size(); ++t) g[t] *= activate_derivative(config.activation, lc.preact[t]);
            g = conv_circular_backward(params.conv[i], d, lc.input, g, out.grads.conv[i]);
        }
    }
    out.loss = loss * scale;
    for (const auto& k : out.grads.conv)
        if (!all_finite(k.data())) throw NumericError("non-finite conv gradient");
    for (const auto& v : out.grads.fc)
        if (!all_finite(v.data())) throw NumericError("non-finite fc gradient");
    return out;
}

double mean_loss(const ParamSet& params, const NetworkConfig& config, std::span<const Example> data, double lambda) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (const Example& ex : data) total += ramp(margin_of(forward(params, config, ex.x), ex.label), lambda);
    return total / static_cast<double>(data.size());
}

double error_rate(const ParamSet& params, const NetworkConfig& config, std::span<const Example> data) {
    if (data.empty()) return 0.0;
    std::size_t wrong = 0;
    for (const Example& ex : data)
        if (misclassified(forward(params, config, ex.x), ex.label)) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

void apply_step(ParamSet& params, const ParamSet& g, double step) {
    for (std::size_t i = 0; i < params.conv.size(); ++i) {
        auto dst = params.conv[i].data();
        const auto src = g.conv[i].data();
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] -= step * src[t];
        if (!all_finite(dst)) throw NumericError("non-finite conv kernel after step");
    }
    for (std::size_t i = 0; i < params.fc.size(); ++i) {
        auto dst = params.fc[i].data();
        const auto src = g.fc[i].data();
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] -= step * src[t];
        if (!all_finite(dst)) throw NumericError("non-finite fc weight after step");
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ArgumentError("learning rate must be nonnegative");
    if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
    if (epochs < 0) throw ArgumentError("epochs must be nonnegative");
    if (schedule == Schedule::exponential && !(decay_rate > 0.0 && decay_rate <= 1.0))
        throw ArgumentError("decay rate must lie in (0, 1]");
    if (!(lambda >= 1.0)) throw ArgumentError("margin lambda must be at least 1");
}

double TrainConfig::rate_at(int epoch) const {
    return schedule == Schedule::constant ? learning_rate : learning_rate * std::pow(decay_rate, epoch);
}

TrainResult train(const ParamSet& initial, const NetworkConfig& net, const TrainConfig& config,
                  std::span<const Example> train_set, std::span<const Example> test_set) {
    config.validate();
    net.validate();
    initial.check_compatible(net);
    if (train_set.empty()) throw ArgumentError("training set is empty");

    TrainResult result;
    result.params = initial;
    ParamSet& params = result.params;
    OperatorNormCache cache;
    Rng rng(config.seed);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Example> batch;

    ExperimentRecord& rec = result.record;
    rec.seed = config.seed;
    rec.W = net.trainable_parameters();
    rec.width = net.conv.empty() ? 0 : net.conv.front().channels;
    rec.beta_trace.push_back(0.0);
    rec.loss_trace.push_back(mean_loss(params, net, train_set, config.lambda));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle = rng.split(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i - 1)));
            std::swap(order[i - 1], order[j]);
        }
        const double step = config.rate_at(epoch);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            for (std::size_t t = start; t < std::min(order.size(), start + config.batch_size); ++t)
                batch.push_back(train_set[order[t]]);
            Gradient g;
            try {
                g = grad(params, net, batch, config.lambda, config.surrogate);
            } catch (const NumericError& e) {
                throw TrainingError(std::string("training diverged: ") + e.what(), epoch);
            }
            if (!std::isfinite(g.loss)) throw TrainingError("training loss is not finite", epoch);
            try {
                apply_step(params, g.grads, step);
            } catch (const NumericError& e) {
                throw TrainingError(std::string("training diverged: ") + e.what(), epoch);
            }
        }
        double epoch_loss, beta;
        try {
            epoch_loss = mean_loss(params, net, train_set, config.lambda);
            beta = sigma_dist(params, initial, net, &cache);
        } catch (const NumericError& e) {
            throw TrainingError(std::string("training diverged: ") + e.what(), epoch);
        }
        if (!std::isfinite(epoch_loss)) throw TrainingError("training loss is not finite", epoch);
        if (!std::isfinite(beta)) throw TrainingError("distance from initialization is not finite", epoch);
        rec.loss_trace.push_back(epoch_loss);
        rec.beta_trace.push_back(beta);
    }

    rec.beta = rec.beta_trace.back();
    rec.train_error = error_rate(params, net, train_set);
    rec.test_error = error_rate(params, net, test_set);
    rec.gap = rec.test_error - rec.train_error;
    rec.train_loss = rec.loss_trace.back();
    rec.test_loss = mean_loss(params, net, test_set, config.lambda);
    return result;
}

} // namespace cnnbound
