// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fdnet/checkpoint.hpp"
#include "fdnet/data.hpp"
#include "fdnet/model.hpp"

namespace fdnet {

struct TrainConfig {
  double lr0 = 1e-3;
  int batch_size = 8;
  int epochs = 400;
  int decay_period = 100;
  double decay_factor = 0.5;
  int64_t resize_height = 1024;
  int64_t resize_width = 1024;
  uint64_t seed = 0;
  ModelConfig model;
  std::string dataset_root;
  Split split = Split::kTrain;
  bool augment_flips = false;
  /// Write a checkpoint every N epochs (0: only the final one).
  int checkpoint_every = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws ConfigError on non-positive values.
  void validate() const;
};

/// lr0 * factor^floor(epoch / period).
double lr_schedule(int64_t epoch, double lr0, int period = 100, double factor = 0.5);

inline constexpr double kBceClamp = 1e-7;

/// Sum over the three coarse and three final maps of the per-pixel mean
/// BCE against gt [B,1,H,W]. Throws ValidationError when gt is not binary,
/// ShapeError when its size differs from the predictions.
template <typename T>
Var<T> compute_loss(const PredictionSet<T>& preds, const Tensor<T>& gt);

/// Adaptive-moment optimiser with bias correction.
template <typename T>
class Adam {
 public:
  Adam(const ParameterStore<T>& store, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  /// Applies one update from the parameters' current gradients. Parameters
  /// whose name starts with a skipped prefix are left untouched.
  void step(ParameterStore<T>& store, double lr, const std::vector<std::string>& skip_prefixes = {});

  int64_t steps() const noexcept { return t_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }
  void restore(int64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v);

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

struct LogEntry {
  int64_t epoch = 0;
  int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double wall_time = 0.0;
};

/// JSON object on one line: {"epoch":..,"step":..,"lr":..,"loss":..,"wall_time":..}.
std::string log_entry_json(const LogEntry& entry);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogEntry> log;
};

struct TrainOptions {
  /// Artifacts (train_log.jsonl, checkpoints) go here; empty disables writing.
  std::filesystem::path out_dir;
  /// Stop after this many optimiser steps (0: run all epochs).
  int64_t max_steps = 0;
  /// Called after each epoch with the latest log entry.
  std::function<void(const LogEntry&)> on_epoch;
  /// JSON object stored under "provenance" in the checkpoint's config snapshot.
  std::string provenance_json;
};

/// Trains on an already-resolved dataset. Throws NumericsError on a
/// non-finite loss after writing nonfinite_dump.json to out_dir.
TrainResult train(const TrainConfig& config, const DatasetHandle& data,
                  const TrainOptions& options = {});

/// Resolves config.dataset_root / config.split from disk first.
TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view json);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(std::string_view json);

/// Rebuilds the network described by the checkpoint's config snapshot and
/// loads its parameters.
FdNet<float> model_from_checkpoint(const Checkpoint& ckpt);
TrainConfig train_config_of(const Checkpoint& ckpt);

}  // namespace fdnet
