// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "fdnet/phantom.hpp"
#include "fdnet/training.hpp"

namespace fdnet::cli {

using nlohmann::json;

/// Everything a command needs, resolved from defaults < file < flags.
///
/// Top-level keys: seed, train, model, phantom, eval. `train` takes the
/// TrainConfig keys except seed and model; `phantom` takes the PhantomSpec
/// fields (no seed) plus train_count / test_count; `eval` takes threshold.
struct RunConfig {
  uint64_t seed = 0;
  TrainConfig train;
  PhantomSpec phantom;
  int train_count = 24;
  int test_count = 8;
  double threshold = 0.5;

  /// Fully populated form of the above, echoed into artifacts.
  json effective() const;
};

/// Small-model defaults for a single CPU: tiny backbone, 256x256, 40 epochs.
json desk_defaults();

/// Parses a JSON file, ConfigError on syntax errors, IOError if unreadable.
json read_config_file(const std::filesystem::path& path);

/// Merges the layers (later wins, objects merge recursively) and validates.
/// Unknown keys at any level raise ConfigError.
RunConfig resolve_run_config(const json& defaults, const std::optional<json>& file,
                             const json& overrides);

json phantom_to_json(const PhantomSpec& spec);

}  // namespace fdnet::cli
