// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fdnet/nn.hpp"

namespace fdnet {

inline constexpr std::string_view kCheckpointMagic = "FDNETCKPT";
inline constexpr uint32_t kCheckpointFormatVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> data;

  bool operator==(const TensorRecord&) const = default;
};

struct EpochRecord {
  int64_t epoch = 0;
  int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

/// Container layout (little endian):
///   "FDNETCKPT" | u32 format_version | u64 n + config JSON bytes |
///   i64 epoch | i64 optimizer_step | params | adam first moments |
///   adam second moments | u32 n + n * {i64 epoch, i64 step, f64 lr, f64 loss}
/// where each tensor block is u32 count + count * {u32 n + name, u32 rank,
/// rank * i64 dim, numel * f32}.
struct Checkpoint {
  uint32_t format_version = kCheckpointFormatVersion;
  std::string config_json;
  int64_t epoch = 0;
  int64_t optimizer_step = 0;
  std::vector<TensorRecord> parameters;
  std::vector<TensorRecord> adam_m;
  std::vector<TensorRecord> adam_v;
  std::vector<EpochRecord> history;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);

/// Throws IOError on truncated data, bad magic, or unsupported version.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws IOError naming the path when it cannot be read.
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
std::vector<TensorRecord> snapshot_parameters(const ParameterStore<T>& store);

/// Copies records whose name starts with `prefix` into same-named
/// parameters. Every store parameter under the prefix must be present with
/// a matching shape, otherwise WeightLoadError.
template <typename T>
void restore_parameters(ParameterStore<T>& store, const std::vector<TensorRecord>& records,
                        std::string_view prefix = "");

extern template std::vector<TensorRecord> snapshot_parameters<float>(const ParameterStore<float>&);
extern template std::vector<TensorRecord> snapshot_parameters<double>(
    const ParameterStore<double>&);
extern template void restore_parameters<float>(ParameterStore<float>&,
                                               const std::vector<TensorRecord>&, std::string_view);
extern template void restore_parameters<double>(ParameterStore<double>&,
                                                const std::vector<TensorRecord>&,
                                                std::string_view);

}  // namespace fdnet
