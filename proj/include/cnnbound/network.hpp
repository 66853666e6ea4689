#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cnnbound/tensor.hpp"

namespace cnnbound {

enum class Setting { basic, general };
enum class Activation { relu, tanh };
enum class Pooling { none, average2x2, max2x2 };

std::string_view to_string(Setting s) noexcept;
std::string_view to_string(Activation a) noexcept;
std::string_view to_string(Pooling p) noexcept;
Setting parse_setting(std::string_view s);
Activation parse_activation(std::string_view s);
Pooling parse_pooling(std::string_view s);

struct ConvLayerShape {
    std::size_t kernel_size = 1;
    std::size_t channels = 1; // output channels of this layer
    Pooling pooling = Pooling::none;
};

/// Architecture plus the constants that enter the bounds.
///
/// In the basic setting every conv layer maps c channels to c channels with a
/// k x k kernel, there is no pooling, and the scalar output is the inner
/// product of the last feature map with the fixed unit vector stored in
/// `ParamSet::last_layer`. In the general setting conv layers are followed by
/// `fc_widths.size()` fully connected layers; the last fc width is the output
/// dimension (or, with no fc layers, the flattened conv output is).
struct NetworkConfig {
    Setting setting = Setting::basic;
    std::size_t input_size = 1;     // d
    std::size_t input_channels = 1; // c
    std::vector<ConvLayerShape> conv;
    std::vector<std::size_t> fc_widths;
    Activation activation = Activation::relu;
    double chi = 1.0;
    double nu = 0.0;
    double lambda = 1.0;
    double loss_range = 1.0; // M

    static NetworkConfig basic(std::size_t d, std::size_t c, std::size_t k, std::size_t layers,
                               Activation act = Activation::relu, double lambda = 1.0);

    /// Throws ArgumentError if the architecture is inconsistent.
    void validate() const;

    std::size_t conv_input_size(std::size_t layer) const;
    std::size_t conv_input_channels(std::size_t layer) const;
    /// Spatial size after conv layer `layer` and its pooling.
    std::size_t conv_output_size(std::size_t layer) const;
    std::size_t flattened_size() const;
    std::size_t fc_input_dim(std::size_t layer) const;
    std::size_t output_dim() const;
    std::size_t depth() const noexcept { return conv.size() + fc_widths.size(); }
    /// W, the number of trainable parameters (the basic setting's w is fixed).
    std::size_t trainable_parameters() const;
    bool binary_output() const { return output_dim() == 1; }
    /// Lipschitz constant of the ramp loss in the network output: lambda for a
    /// scalar output, 2 lambda for the multiclass margin.
    double lambda_eff() const { return binary_output() ? lambda : 2.0 * lambda; }
};

/// Network parameters Theta = (K^(1..Lc), V^(1..Lf)) plus, in the basic setting,
/// the fixed last-layer vector w. fc matrices are (out x in).
struct ParamSet {
    std::vector<RealTensor4> conv;
    std::vector<RealMatrix> fc;
    std::optional<std::vector<double>> last_layer;

    /// Throws ArgumentError naming the first tensor that does not fit `config`.
    void check_compatible(const NetworkConfig& config) const;
    bool same_shapes(const ParamSet& other) const;
    std::size_t parameter_count() const;

    friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Trained parameters together with their initialization.
struct InitPair {
    ParamSet current;
    ParamSet initial;
};

/// Unit-norm all-ones vector, the default fixed last layer.
std::vector<double> default_last_layer(std::size_t dim);

struct Example {
    std::vector<double> x; // d x d x c, vectorized (a * d + b) * c + channel
    int label = 0;         // +-1 for scalar-output networks, class index otherwise
};
using Examples = std::vector<Example>;

// Layer primitives. Feature maps use the layout described in convspec.hpp.

std::vector<double> conv_circular(const RealTensor4& kernel, std::size_t d, std::span<const double> x);
/// Accumulates dL/dkernel into `kernel_grad` and returns dL/dx.
std::vector<double> conv_circular_backward(const RealTensor4& kernel, std::size_t d, std::span<const double> x,
                                           std::span<const double> grad_out, RealTensor4& kernel_grad);

double activate(Activation a, double z) noexcept;
double activate_derivative(Activation a, double z) noexcept;

/// Non-overlapping 2x2 pooling on a d x d x c map. average2x2 returns the
/// window sum divided by 2, which makes it nonexpansive with norm exactly 1.
std::vector<double> pool(std::span<const double> map, std::size_t d, std::size_t channels, Pooling mode);
std::vector<double> pool_backward(std::span<const double> map, std::size_t d, std::size_t channels, Pooling mode,
                                  std::span<const double> grad_out);

struct LayerCache {
    std::vector<double> input;     // what the linear map is applied to
    std::vector<double> preact;    // linear map output
    std::vector<double> activated; // after the nonlinearity (== preact for the linear output layer)
    std::vector<double> output;    // after pooling (conv layers) or == activated
};

struct ForwardCache {
    std::vector<LayerCache> conv;
    std::vector<LayerCache> fc;
    std::vector<double> output;
};

ForwardCache forward_cache(const ParamSet& params, const NetworkConfig& config, std::span<const double> x);
std::vector<double> forward(const ParamSet& params, const NetworkConfig& config, std::span<const double> x);

double ramp(double margin, double lambda) noexcept;
/// Binary (scalar output, label +-1): margin y * yhat. Multiclass: yhat_y -
/// max_{j != y} yhat_j. The 1/lambda-margin ramp is applied to the margin.
double margin_of(std::span<const double> yhat, int label);
double ramp_loss(std::span<const double> yhat, int label, double lambda);
/// 0-1 classification error of a single prediction.
bool misclassified(std::span<const double> yhat, int label);

} // namespace cnnbound
