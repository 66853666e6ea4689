#include "cnnbound/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cnnbound/linalg.hpp"

namespace cnnbound {

std::string_view to_string(Setting s) noexcept { return s == Setting::basic ? "basic" : "general"; }
std::string_view to_string(Activation a) noexcept { return a == Activation::relu ? "relu" : "tanh"; }
std::string_view to_string(Pooling p) noexcept {
    switch (p) {
    case Pooling::none: return "none";
    case Pooling::average2x2: return "average2x2";
    case Pooling::max2x2: return "max2x2";
    }
    return "none";
}

Setting parse_setting(std::string_view s) {
    if (s == "basic") return Setting::basic;
    if (s == "general") return Setting::general;
    throw ArgumentError("unknown setting '" + std::string(s) + "'");
}

Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ArgumentError("unknown activation '" + std::string(s) + "'");
}

Pooling parse_pooling(std::string_view s) {
    if (s == "none") return Pooling::none;
    if (s == "average2x2") return Pooling::average2x2;
    if (s == "max2x2") return Pooling::max2x2;
    throw ArgumentError("unknown pooling '" + std::string(s) + "'");
}

NetworkConfig NetworkConfig::basic(std::size_t d, std::size_t c, std::size_t k, std::size_t layers, Activation act,
                                   double lambda) {
    NetworkConfig cfg;
    cfg.setting = Setting::basic;
    cfg.input_size = d;
    cfg.input_channels = c;
    cfg.conv.assign(layers, ConvLayerShape{k, c, Pooling::none});
    cfg.activation = act;
    cfg.lambda = lambda;
    return cfg;
}

void NetworkConfig::validate() const {
    if (input_size == 0 || input_channels == 0) throw ArgumentError("input size and channels must be positive");
    if (!(chi > 0.0) || !(nu >= 0.0) || !(lambda > 0.0) || !(loss_range > 0.0))
        throw ArgumentError("chi, lambda and M must be positive and nu nonnegative");
    std::size_t d = input_size;
    for (std::size_t i = 0; i < conv.size(); ++i) {
        const auto& layer = conv[i];
        if (layer.channels == 0 || layer.kernel_size == 0)
            throw ArgumentError("conv layer " + std::to_string(i) + " has zero channels or kernel size");
        if (layer.kernel_size > d)
            throw ArgumentError("conv layer " + std::to_string(i) + " kernel exceeds its " + std::to_string(d) +
                                "-pixel input");
        if (layer.pooling != Pooling::none) {
            if (d % 2 != 0)
                throw ArgumentError("conv layer " + std::to_string(i) + " pools an odd " + std::to_string(d) +
                                    "-pixel map");
            d /= 2;
        }
    }
    for (std::size_t i = 0; i < fc_widths.size(); ++i)
        if (fc_widths[i] == 0) throw ArgumentError("fc layer " + std::to_string(i) + " has zero width");
    if (setting == Setting::basic) {
        if (conv.empty()) throw ArgumentError("basic setting needs at least one conv layer");
        if (!fc_widths.empty()) throw ArgumentError("basic setting has no fully connected layers");
        for (const auto& layer : conv) {
            if (layer.channels != input_channels || layer.kernel_size != conv.front().kernel_size)
                throw ArgumentError("basic setting requires equal channels and kernel sizes in every layer");
            if (layer.pooling != Pooling::none) throw ArgumentError("basic setting has no pooling");
        }
        if (chi != 1.0 || loss_range != 1.0 || nu != 0.0)
            throw ArgumentError("basic setting fixes chi = 1, M = 1 and nu = 0");
    } else if (depth() == 0) {
        throw ArgumentError("general setting needs at least one layer");
    }
}

std::size_t NetworkConfig::conv_input_size(std::size_t layer) const {
    std::size_t d = input_size;
    for (std::size_t i = 0; i < layer; ++i)
        if (conv[i].pooling != Pooling::none) d /= 2;
    return d;
}

std::size_t NetworkConfig::conv_input_channels(std::size_t layer) const {
    return layer == 0 ? input_channels : conv[layer - 1].channels;
}

std::size_t NetworkConfig::conv_output_size(std::size_t layer) const {
    const std::size_t d = conv_input_size(layer);
    return conv[layer].pooling == Pooling::none ? d : d / 2;
}

std::size_t NetworkConfig::flattened_size() const {
    if (conv.empty()) return input_size * input_size * input_channels;
    const std::size_t d = conv_output_size(conv.size() - 1);
    return d * d * conv.back().channels;
}

std::size_t NetworkConfig::fc_input_dim(std::size_t layer) const {
    return layer == 0 ? flattened_size() : fc_widths[layer - 1];
}

std::size_t NetworkConfig::output_dim() const {
    if (setting == Setting::basic) return 1;
    return fc_widths.empty() ? flattened_size() : fc_widths.back();
}

std::size_t NetworkConfig::trainable_parameters() const {
    std::size_t w = 0;
    for (std::size_t i = 0; i < conv.size(); ++i)
        w += conv[i].kernel_size * conv[i].kernel_size * conv_input_channels(i) * conv[i].channels;
    for (std::size_t i = 0; i < fc_widths.size(); ++i) w += fc_widths[i] * fc_input_dim(i);
    return w;
}

void ParamSet::check_compatible(const NetworkConfig& config) const {
    if (conv.size() != config.conv.size())
        throw ArgumentError("expected " + std::to_string(config.conv.size()) + " conv kernels, got " +
                            std::to_string(conv.size()));
    if (fc.size() != config.fc_widths.size())
        throw ArgumentError("expected " + std::to_string(config.fc_widths.size()) + " fc matrices, got " +
                            std::to_string(fc.size()));
    for (std::size_t i = 0; i < conv.size(); ++i) {
        const std::size_t k = config.conv[i].kernel_size;
        const RealTensor4::Dims want{k, k, config.conv_input_channels(i), config.conv[i].channels};
        if (conv[i].dims() != want) throw ArgumentError("conv kernel " + std::to_string(i) + " has the wrong shape");
    }
    for (std::size_t i = 0; i < fc.size(); ++i)
        if (fc[i].rows() != config.fc_widths[i] || fc[i].cols() != config.fc_input_dim(i))
            throw ArgumentError("fc matrix " + std::to_string(i) + " has the wrong shape");
    if (config.setting == Setting::basic) {
        if (!last_layer) throw ArgumentError("basic setting requires the fixed last-layer vector");
        if (last_layer->size() != config.flattened_size())
            throw ArgumentError("last-layer vector has length " + std::to_string(last_layer->size()) +
                                ", expected " + std::to_string(config.flattened_size()));
        const double n = euclidean_norm(*last_layer);
        if (std::abs(n - 1.0) > 1e-12) throw ArgumentError("last-layer vector must have unit norm");
    }
}

bool ParamSet::same_shapes(const ParamSet& other) const {
    if (conv.size() != other.conv.size() || fc.size() != other.fc.size()) return false;
    for (std::size_t i = 0; i < conv.size(); ++i)
        if (conv[i].dims() != other.conv[i].dims()) return false;
    for (std::size_t i = 0; i < fc.size(); ++i)
        if (!fc[i].same_shape(other.fc[i])) return false;
    return true;
}

std::size_t ParamSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& k : conv) n += k.size();
    for (const auto& v : fc) n += v.size();
    return n;
}

std::vector<double> default_last_layer(std::size_t dim) {
    return std::vector<double>(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
}

std::vector<double> conv_circular(const RealTensor4& kernel, std::size_t d, std::span<const double> x) {
    const std::size_t cin = kernel.c_in(), cout = kernel.c_out();
    if (x.size() != d * d * cin)
        throw DimensionError("conv input has length " + std::to_string(x.size()) + ", expected " +
                             std::to_string(d * d * cin));
    std::vector<double> out(d * d * cout, 0.0);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            double* dst = &out[(a * d + b) * cout];
            for (std::size_t p = 0; p < kernel.k1(); ++p)
                for (std::size_t q = 0; q < kernel.k2(); ++q) {
                    const double* src = &x[(((a + p) % d) * d + (b + q) % d) * cin];
                    for (std::size_t i = 0; i < cin; ++i) {
                        const double xi = src[i];
                        if (xi == 0.0) continue;
                        for (std::size_t o = 0; o < cout; ++o) dst[o] += kernel(p, q, i, o) * xi;
                    }
                }
        }
    return out;
}

std::vector<double> conv_circular_backward(const RealTensor4& kernel, std::size_t d, std::span<const double> x,
                                           std::span<const double> grad_out, RealTensor4& kernel_grad) {
    const std::size_t cin = kernel.c_in(), cout = kernel.c_out();
    std::vector<double> grad_in(d * d * cin, 0.0);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            const double* g = &grad_out[(a * d + b) * cout];
            for (std::size_t p = 0; p < kernel.k1(); ++p)
                for (std::size_t q = 0; q < kernel.k2(); ++q) {
                    const std::size_t src = (((a + p) % d) * d + (b + q) % d) * cin;
                    for (std::size_t i = 0; i < cin; ++i) {
                        double acc = 0.0;
                        const double xi = x[src + i];
                        for (std::size_t o = 0; o < cout; ++o) {
                            acc += kernel(p, q, i, o) * g[o];
                            kernel_grad(p, q, i, o) += g[o] * xi;
                        }
                        grad_in[src + i] += acc;
                    }
                }
        }
    return grad_in;
}

double activate(Activation a, double z) noexcept { return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

double activate_derivative(Activation a, double z) noexcept {
    if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

std::vector<double> pool(std::span<const double> map, std::size_t d, std::size_t channels, Pooling mode) {
    if (mode == Pooling::none) return {map.begin(), map.end()};
    if (d % 2 != 0) throw ArgumentError("2x2 pooling needs even spatial dims, got " + std::to_string(d));
    if (map.size() != d * d * channels) throw DimensionError("pool: map size does not match dims");
    const std::size_t h = d / 2;
    std::vector<double> out(h * h * channels);
    for (std::size_t a = 0; a < h; ++a)
        for (std::size_t b = 0; b < h; ++b)
            for (std::size_t c = 0; c < channels; ++c) {
                const double v00 = map[((2 * a) * d + 2 * b) * channels + c];
                const double v01 = map[((2 * a) * d + 2 * b + 1) * channels + c];
                const double v10 = map[((2 * a + 1) * d + 2 * b) * channels + c];
                const double v11 = map[((2 * a + 1) * d + 2 * b + 1) * channels + c];
                out[(a * h + b) * channels + c] = mode == Pooling::average2x2
                                                      ? (v00 + v01 + v10 + v11) / 2.0
                                                      : std::max(std::max(v00, v01), std::max(v10, v11));
            }
    return out;
}

std::vector<double> pool_backward(std::span<const double> map, std::size_t d, std::size_t channels, Pooling mode,
                                  std::span<const double> grad_out) {
    if (mode == Pooling::none) return {grad_out.begin(), grad_out.end()};
    const std::size_t h = d / 2;
    std::vector<double> grad(d * d * channels, 0.0);
    for (std::size_t a = 0; a < h; ++a)
        for (std::size_t b = 0; b < h; ++b)
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t idx[4] = {((2 * a) * d + 2 * b) * channels + c,
                                            ((2 * a) * d + 2 * b + 1) * channels + c,
                                            ((2 * a + 1) * d + 2 * b) * channels + c,
                                            ((2 * a + 1) * d + 2 * b + 1) * channels + c};
                const double g = grad_out[(a * h + b) * channels + c];
                if (mode == Pooling::average2x2) {
                    for (std::size_t i : idx) grad[i] += g / 2.0;
                } else {
                    std::size_t best = idx[0];
                    for (std::size_t i : idx)
                        if (map[i] > map[best]) best = i;
                    grad[best] += g;
                }
            }
    return grad;
}

namespace {

void require_finite(const std::vector<double>& v, const std::string& where) {
    if (!all_finite(v)) throw NumericError("non-finite value in " + where);
}

} // namespace

ForwardCache forward_cache(const ParamSet& params, const NetworkConfig& config, std::span<const double> x) {
    const std::size_t expected = config.input_size * config.input_size * config.input_channels;
    if (x.size() != expected)
        throw ArgumentError("input has length " + std::to_string(x.size()) + ", expected " + std::to_string(expected));
    if (params.conv.size() != config.conv.size() || params.fc.size() != config.fc_widths.size())
        throw ArgumentError("parameters do not match the architecture");

    ForwardCache cache;
    std::vector<double> h(x.begin(), x.end());
    for (std::size_t i = 0; i < params.conv.size(); ++i) {
        const std::size_t d = config.conv_input_size(i);
        LayerCache lc;
        lc.input = h;
        lc.preact = conv_circular(params.conv[i], d, h);
        lc.activated.resize(lc.preact.size());
        for (std::size_t t = 0; t < lc.preact.size(); ++t) lc.activated[t] = activate(config.activation, lc.preact[t]);
        lc.output = pool(lc.activated, d, params.conv[i].c_out(), config.conv[i].pooling);
        require_finite(lc.output, "conv layer " + std::to_string(i));
        h = lc.output;
        cache.conv.push_back(std::move(lc));
    }
    for (std::size_t i = 0; i < params.fc.size(); ++i) {
        LayerCache lc;
        lc.input = h;
        lc.preact = matvec(params.fc[i], h);
        const bool last = i + 1 == params.fc.size();
        lc.activated = lc.preact;
        if (!last)
            for (auto& v : lc.activated) v = activate(config.activation, v);
        lc.output = lc.activated;
        require_finite(lc.output, "fc layer " + std::to_string(i));
        h = lc.output;
        cache.fc.push_back(std::move(lc));
    }
    if (config.setting == Setting::basic) {
        if (!params.last_layer || params.last_layer->size() != h.size())
            throw ArgumentError("basic setting requires a last-layer vector matching the feature map");
        double s = 0.0;
        for (std::size_t t = 0; t < h.size(); ++t) s += (*params.last_layer)[t] * h[t];
        if (!std::isfinite(s)) throw NumericError("non-finite value in the output layer");
        cache.output = {s};
    } else {
        cache.output = std::move(h);
    }
    return cache;
}

std::vector<double> forward(const ParamSet& params, const NetworkConfig& config, std::span<const double> x) {
    return forward_cache(params, config, x).output;
}

double ramp(double margin, double lambda) noexcept {
    if (margin <= 0.0) return 1.0;
    const double v = 1.0 - lambda * margin;
    return v > 0.0 ? v : 0.0;
}

double margin_of(std::span<const double> yhat, int label) {
    if (yhat.empty()) throw ArgumentError("empty prediction");
    if (yhat.size() == 1) {
        if (label != 1 && label != -1) throw ArgumentError("binary label must be +1 or -1, got " + std::to_string(label));
        return label * yhat[0];
    }
    if (label < 0 || static_cast<std::size_t>(label) >= yhat.size())
        throw ArgumentError("class label " + std::to_string(label) + " out of range");
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < yhat.size(); ++j)
        if (j != static_cast<std::size_t>(label)) other = std::max(other, yhat[j]);
    return yhat[static_cast<std::size_t>(label)] - other;
}

double ramp_loss(std::span<const double> yhat, int label, double lambda) {
    if (!(lambda >= 1.0)) throw ArgumentError("ramp loss requires lambda >= 1");
    return ramp(margin_of(yhat, label), lambda);
}

bool misclassified(std::span<const double> yhat, int label) { return margin_of(yhat, label) <= 0.0; }

} // namespace cnnbound
