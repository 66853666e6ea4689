#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cnnbound/dataset.hpp"
#include "cnnbound/train.hpp"

namespace cnnbound {

/// A width sweep in the basic setting. Every width c builds the network
/// NetworkConfig::basic(d, c, kernel_size, layers, activation, lambda); the
/// data (generated or loaded with `data_channels` channels) is zero-padded to
/// c channels, so all widths see the same inputs.
struct ExperimentSpec {
    std::size_t input_size = 6;
    std::size_t data_channels = 1;
    std::size_t kernel_size = 3;
    std::size_t layers = 2;
    Activation activation = Activation::tanh;
    /// Fixed last layer: normalized all-ones, or a unit Gaussian draw per run
    /// (the all-ones readout makes the network translation invariant).
    bool gaussian_last_layer = true;
    std::vector<std::size_t> widths;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    TrainConfig train; // train.seed is replaced by each entry of `seeds`

    // synthetic data (ignored when explicit data is passed)
    std::size_t n_train = 100;
    std::size_t n_test = 1000;
    std::uint64_t data_seed = 0;
    TaskSpec task;

    unsigned threads = 1;

    void validate() const;
};

struct ExperimentRun {
    NetworkConfig net;
    ParamSet initial;
    ParamSet final_params;
    ExperimentRecord record;
};

/// Every run with its parameters, sorted by width then seed.
std::vector<ExperimentRun> run_experiment_runs(const ExperimentSpec& spec, const Examples& train_set,
                                               const Examples& test_set);

/// Reads a sweep description (JSON object; absent keys keep their defaults):
/// input_size, data_channels, kernel_size, layers, activation, last_layer
/// ("ones" | "gaussian"), widths, seeds,
/// learning_rate, schedule ("constant" | "exponential"), decay_rate,
/// batch_size, epochs, lambda, surrogate ("ramp" | "hinge"), n_train, n_test, data_seed, noise, label_flip,
/// frequencies, threads. Throws FormatError on malformed JSON or bad values.
ExperimentSpec experiment_spec_from_json(const std::string& text);
std::string experiment_spec_to_json(const ExperimentSpec& spec);

/// One record per (width, seed), sorted by width then seed. Every run of a
/// given seed starts from its own initialization stream, so records do not
/// depend on the thread count.
std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec);
std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec, const Examples& train_set,
                                             const Examples& test_set);

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either input is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct WidthSummary {
    std::size_t width = 0;
    std::size_t W = 0;
    double median_beta = 0.0;
    double median_gap = 0.0;
};
/// Per-width medians over seeds, ordered by width.
std::vector<WidthSummary> summarize_by_width(const std::vector<ExperimentRecord>& records);

double median(std::vector<double> v);

/// Writes records.csv plus the three figure datasets (gap_vs_w_beta.csv,
/// gap_vs_w.csv, beta_vs_w.csv) into `dir`.
void write_experiment_outputs(const std::vector<ExperimentRecord>& records, const std::string& dir);

} // namespace cnnbound
