#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cnnbound/network.hpp"

namespace cnnbound {

/// "CNVB1\n\0\0"
inline constexpr std::array<unsigned char, 8> kSnapshotMagic{0x43, 0x4E, 0x56, 0x42, 0x31, 0x0A, 0x00, 0x00};
inline constexpr int kSnapshotVersion = 1;

struct SnapshotMetadata {
    std::uint64_t seed = 0;
    std::int64_t epoch = 0;
    /// Seconds since the epoch. Writers fill it from SOURCE_DATE_EPOCH (0 when
    /// unset) so identical inputs give identical files.
    std::int64_t created = 0;

    friend bool operator==(const SnapshotMetadata&, const SnapshotMetadata&) = default;
};

struct Snapshot {
    NetworkConfig config;
    ParamSet current;
    std::optional<ParamSet> initial;
    SnapshotMetadata metadata;
};

/// Layout: the 8 magic bytes, a little-endian u64 header length, a UTF-8 JSON
/// header (config, tensor names, shapes and payload offsets, metadata), then
/// every tensor as little-endian float64 in row-major order, in header order.
std::vector<unsigned char> encode_snapshot(const Snapshot& s);
/// Throws FormatError (bad magic, malformed header, payload that does not match
/// the shape table, naming the first incomplete tensor) or NumericError (NaN).
Snapshot decode_snapshot(const std::vector<unsigned char>& bytes);

void write_snapshot(const std::string& path, const Snapshot& s);
Snapshot read_snapshot(const std::string& path);

/// Creation time used by writers: SOURCE_DATE_EPOCH if set, otherwise 0.
std::int64_t snapshot_timestamp();

std::string network_config_to_json(const NetworkConfig& config);
/// Accepts the object written by network_config_to_json; missing fields take
/// their defaults. Throws FormatError on malformed input.
NetworkConfig network_config_from_json(const std::string& text);

/// Byte-level equality of the parameter payloads (bitwise on doubles).
bool bitwise_equal(const ParamSet& a, const ParamSet& b);

} // namespace cnnbound
