#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "quarc/autodiff.hpp"

namespace quarc {

// File layout (little-endian):
//   "QRC1"
//   per parameter: u32 name length, name bytes, u32 rank, u32 dims[rank],
//                  f64 payload[prod(dims)]
//   u32 CRC-32 of every preceding byte
// Quaternion tensors are written as [4, shape...], i.e. their four planes.
struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  bool operator==(const CheckpointEntry&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params);
// Malformed or corrupted input raises IngestionError with the byte offset.
std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path);

// Copies entries into a parameter set with exactly the same names and
// shapes; anything else is a DataError.
void apply_checkpoint(ParameterSet& params, const std::vector<CheckpointEntry>& entries);

}  // namespace quarc
