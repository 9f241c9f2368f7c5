// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "farnet/adamw.hpp"
#include "farnet/arm.hpp"
#include "farnet/nn.hpp"
#include "farnet/rng.hpp"

// Binary checkpoint, all integers and floats little-endian:
//
//   "FARN" | u32 format_version
//   u64 config_length | config text (key = value lines)
//   u64 parameter_count, then per parameter:
//     u32 name_length | name | u32 rank | u64 dims[rank] | f64 values (row-major)
//   optimizer: u64 step | u64 count | per parameter f64 m[size], f64 v[size]
//   u64 epoch
//   rng: u64 seed | u64 counter
//   running target stats: u8 initialized | f64 mean | f64 stddev
namespace farnet {

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
  bool operator==(const NamedArray&) const = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string config_text;
  std::vector<NamedArray> parameters;
  AdamWState optimizer;
  std::uint64_t epoch = 0;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_counter = 0;
  bool stats_initialized = false;
  arm::TargetStats running_stats;

  std::vector<std::uint8_t> serialize() const;
  /// Throws CheckpointError on bad magic, version mismatch, truncation or trailing bytes.
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  /// Snapshot of a parameter list (deep copy of values).
  static std::vector<NamedArray> capture(const NamedParameters& params);
  /// Copies values into `params` in order; names and shapes must match exactly.
  void restore_parameters(const NamedParameters& params) const;
};

}  // namespace farnet
