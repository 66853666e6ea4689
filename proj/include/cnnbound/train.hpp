#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cnnbound/network.hpp"
#include "cnnbound/rng.hpp"

namespace cnnbound {

/// Random initialization honoring the initialization contract: each conv
/// kernel is Gaussian divided by its own operator norm (so ||op(K0)||_2 = 1 up
/// to roundoff) and each fc matrix has orthonormal rows or columns (norm 1).
/// The basic setting's last layer is `default_last_layer`.
ParamSet initialize_params(const NetworkConfig& config, Rng& rng);

/// Matrix with orthonormal rows (rows <= cols) or columns, from Gram-Schmidt
/// on a Gaussian draw.
RealMatrix random_orthogonal(std::size_t rows, std::size_t cols, Rng& rng);

/// A ParamSet of zeros shaped like `like`, without the last layer.
ParamSet zeros_like(const ParamSet& like);

/// Objective minimized by SGD. The ramp loss is flat below margin 0, so a
/// misclassified example contributes no gradient; hinge, max(0, 1 - lambda m),
/// shares the ramp's slope on (0, 1/lambda) and keeps pushing below 0.
enum class Surrogate { ramp, hinge };
std::string_view to_string(Surrogate s) noexcept;
Surrogate parse_surrogate(std::string_view s);

struct Gradient {
    ParamSet grads; // last_layer is never set: w is not trainable
    double loss = 0.0; // mean ramp loss over the batch
};

/// Exact reverse-mode gradient of the mean loss over `batch` (ramp unless
/// another surrogate is asked for). The subgradient at every kink (loss
/// corners, ReLU at 0, max-pool ties) is taken as 0 / the first maximizer.
Gradient grad(const ParamSet& params, const NetworkConfig& config, std::span<const Example> batch, double lambda,
              Surrogate surrogate = Surrogate::ramp);

/// Mean ramp loss over a data set.
double mean_loss(const ParamSet& params, const NetworkConfig& config, std::span<const Example> data, double lambda);
/// Fraction of misclassified examples.
double error_rate(const ParamSet& params, const NetworkConfig& config, std::span<const Example> data);

/// params -= step * g for every trainable tensor.
void apply_step(ParamSet& params, const ParamSet& g, double step);

enum class Schedule { constant, exponential };

struct TrainConfig {
    double learning_rate = 0.1;
    Schedule schedule = Schedule::constant;
    double decay_rate = 1.0; // per-epoch multiplier for Schedule::exponential
    std::size_t batch_size = 16;
    int epochs = 10;
    std::uint64_t seed = 0;
    double lambda = 1.0;
    Surrogate surrogate = Surrogate::ramp;

    void validate() const;
    double rate_at(int epoch) const;
};

struct ExperimentRecord {
    std::size_t width = 0;
    std::size_t W = 0;
    std::uint64_t seed = 0;
    double train_error = 0.0;
    double test_error = 0.0;
    double gap = 0.0; // test_error - train_error
    double beta = 0.0; // sigma distance at the end of training
    double train_loss = 0.0;
    double test_loss = 0.0;
    std::vector<double> beta_trace; // beta after epoch e, index 0 = initialization
    std::vector<double> loss_trace; // mean train ramp loss, same indexing

    double w_times_beta() const { return static_cast<double>(W) * beta; }
};

struct TrainResult {
    ParamSet params;
    ExperimentRecord record;
};

/// Minibatch SGD from `initial`. Deterministic given `config.seed`. Throws
/// TrainingError naming the epoch if the loss becomes non-finite.
TrainResult train(const ParamSet& initial, const NetworkConfig& net, const TrainConfig& config,
                  std::span<const Example> train_set, std::span<const Example> test_set);

} // namespace cnnbound
