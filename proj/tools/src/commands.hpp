// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fdnet/metrics.hpp"
#include "run_config.hpp"

namespace fdnet::cli {

namespace fs = std::filesystem;

struct SynthResult {
  int train = 0;
  int test = 0;
  std::vector<std::string> warnings;
};

/// Writes <out>/images|masks/{train,test}/*.png and <out>/phantom_meta.json.
/// A non-empty `out` is refused (RefusalError) unless `force`.
SynthResult cmd_synth(const RunConfig& rc, const fs::path& out, bool force, std::ostream& log);

/// Trains on <dataset>/.../train; writes final.fdnet, train_log.jsonl and
/// run_config.json into `out`.
TrainResult cmd_train(const RunConfig& rc, const fs::path& dataset, const fs::path& out,
                      int64_t max_steps, std::ostream& log);

/// Evaluates a checkpoint on one split; writes <out>/metrics.json when
/// `out` is non-empty and prints the comparison table.
MetricsReport cmd_eval(const fs::path& checkpoint, const fs::path& dataset, Split split,
                       double threshold, const fs::path& out, std::ostream& log);

struct PredictResult {
  fs::path mask;
  fs::path overlay;
  int64_t foreground = 0;
};

/// Writes <out>/mask.png (0/255) and <out>/overlay.png (prediction contour
/// in red over the input). Unreadable checkpoint or image: IOError.
PredictResult cmd_predict(const fs::path& checkpoint, const fs::path& image, const fs::path& out,
                          double threshold, std::ostream& log);

struct AblationRow {
  std::string name;
  bool cif = false;
  bool ab = false;
  bool ftb = false;
  int64_t parameters = 0;
  std::vector<std::string> architecture;
  bool ok = false;
  std::string error;
  double miou = 0.0;
  double dice = 0.0;
  double seconds = 0.0;
  ReferenceScore reference;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  json config;

  json to_json() const;
  std::string render_table() const;
};

/// Trains and evaluates the five component settings in order. A failing row
/// is recorded and the remaining rows still run.
AblationReport run_ablation(const RunConfig& rc, const DatasetHandle& train,
                            const DatasetHandle& test, const fs::path& out, std::ostream& log);

AblationReport cmd_ablate(const RunConfig& rc, const fs::path& dataset, const fs::path& out,
                          std::ostream& log);

}  // namespace fdnet::cli
