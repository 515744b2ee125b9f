#pragma once

// Binary state file, little-endian:
//
//   offset  size      field
//   0       8         magic "QBEBSTAT"
//   8       4         u32 format version (1)
//   12      4         u32 k, number of coordinates (1 for the scalar engine)
//   16      8         u64 d, base grid size
//   24      8         u64 n, observations consumed
//   32      8         f64 alpha
//   40      8         f64 gamma
//   48      8*d       f64 base grid points
//   ...     8*d^k     f64 weights, lexicographic over the product grid
//   ...     4         u32 CRC-32 of every preceding byte
//
// Only power-schedule states can be written.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "qbeb/newton.hpp"

namespace qbeb {

inline constexpr std::uint32_t kStateFormatVersion = 1;

/// Decoded contents of a state file, before it is turned into an engine.
struct StateRecord {
  std::uint32_t k = 1;
  std::vector<double> base_grid;
  std::uint64_t n = 0;
  double alpha = 1.0;
  double gamma = 1.0;
  std::vector<double> weights;
};

std::vector<std::byte> encode_state(const StateRecord& record);
/// Throws FormatError on bad magic, version mismatch, truncation, size
/// inconsistencies or checksum failure.
StateRecord decode_state(std::span<const std::byte> bytes);

/// Throws ConfigError for states driven by a custom schedule.
std::vector<std::byte> serialize_state(const NewtonState& state);
/// Throws FormatError, or ConfigError when the file holds a k > 1 state.
NewtonState deserialize_state(std::span<const std::byte> bytes);

void save_state(const NewtonState& state, const std::filesystem::path& path);
NewtonState load_state(const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

/// One JSON object per line: {"j":..,"theta":..,"weight":..}.
void dump_weights_jsonl(const MixingWeights& g, std::ostream& out);

}  // namespace qbeb
