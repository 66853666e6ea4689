#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cnnbound/network.hpp"

namespace cnnbound {

struct TaskSpec {
    double noise = 0.5;         // Gaussian noise amplitude relative to a unit-norm template
    double chi = 1.0;           // every input is scaled to norm chi
    double label_flip = 0.0;    // fraction of labels flipped after generation
    std::size_t frequencies = 2; // highest spatial frequency in the templates
};

/// Two-class synthetic images: two smooth random templates (low-frequency
/// sinusoids per channel, drawn from `seed`, then centered so the pair is
/// antipodal), each example one template plus Gaussian noise, rescaled to
/// norm chi. Labels are +1 / -1, balanced
/// (the first ceil(n/2) examples are +1, then the set is shuffled).
Examples synth_dataset(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t c, const TaskSpec& task = {});

/// The two unit-norm templates synth_dataset uses for (seed, d, c).
std::vector<std::vector<double>> synth_templates(std::uint64_t seed, std::size_t d, std::size_t c,
                                                 std::size_t frequencies = 2);

/// Reads the CIFAR-10 binary format: 3073-byte records, one label byte then
/// 1024 red, 1024 green and 1024 blue bytes in row-major order. Pixels are
/// scaled to [0, 1], reordered to (row, col, channel) and each example is
/// rescaled to norm chi. With a class filter only those labels are kept (labels
/// stay as stored); at most `max_per_class` examples per label are kept when
/// set. A trailing partial record is a FormatError naming its byte offset.
Examples load_cifar10_binary(const std::string& path, const std::vector<int>& class_filter = {},
                             std::optional<std::size_t> max_per_class = std::nullopt, double chi = 1.0);

/// Maps `positive_class` to +1 and every other label to -1.
Examples to_binary_labels(Examples data, int positive_class);

/// Copies d x d images with `from` channels into `to` channels, zero-filling
/// new channels or dropping surplus ones.
Examples embed_channels(const Examples& data, std::size_t d, std::size_t from, std::size_t to);

/// Rescales x to norm chi (no-op for a zero vector).
void normalize_to(std::vector<double>& x, double chi);

} // namespace cnnbound
