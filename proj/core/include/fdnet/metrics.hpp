// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdnet/checkpoint.hpp"
#include "fdnet/data.hpp"
#include "fdnet/model.hpp"

namespace fdnet {

/// Per-class pixel confusion counts of a binary prediction.
struct Confusion {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t tn = 0;
};

/// Throws ShapeError on size mismatch, ValidationError on non-binary input.
Confusion confusion(const BinaryMask& pred, const BinaryMask& gt);

/// 2|P∩G| / (|P|+|G|); 1 when both are empty.
double dice(const BinaryMask& pred, const BinaryMask& gt);
/// Foreground IoU; 1 when both are empty.
double iou_foreground(const BinaryMask& pred, const BinaryMask& gt);
double iou_background(const BinaryMask& pred, const BinaryMask& gt);
/// Mean of foreground and background IoU.
double miou(const BinaryMask& pred, const BinaryMask& gt);

struct ImageMetrics {
  std::string id;
  double iou_fg = 0.0;
  double iou_bg = 0.0;
  double miou = 0.0;
  double dice = 0.0;
};

ImageMetrics image_metrics(const std::string& id, const BinaryMask& pred, const BinaryMask& gt);

/// Published scores in percent, carried as context only.
struct ReferenceScore {
  std::string method;
  double miou = 0.0;
  double dice = 0.0;
};

/// Comparison table of the original benchmark (reference, not reproduced).
const std::vector<ReferenceScore>& reference_comparison();
/// Component ablation of the original benchmark, rows No.1..No.4, Ours.
const std::vector<ReferenceScore>& reference_ablation();

inline constexpr const char* kReferenceLabel = "reference, not reproduced";

struct MetricsReport {
  std::vector<ImageMetrics> per_image;
  double miou = 0.0;  // mean over per_image
  double dice = 0.0;
  double threshold = 0.5;
  std::string config_json;
  std::vector<ReferenceScore> reference_scores;

  /// Values in [0,1]; references in percent under a labelled block.
  std::string to_json() const;
  /// Aligned text table (Method, mIoU, Dice) with scores x100.
  std::string render_table(const std::string& method = "FDNet (this run)") const;
};

/// Aggregates per-image entries. Throws ValidationError when empty.
MetricsReport summarize(std::vector<ImageMetrics> per_image, double threshold,
                        std::string config_json);

/// Predicts each sample at height x width (image bilinear, mask nearest)
/// and scores it against the resampled ground truth.
MetricsReport evaluate(const FdNet<float>& model, const DatasetHandle& dataset, double threshold,
                       int64_t height, int64_t width, std::string config_json = {});

/// Rebuilds the model from the checkpoint and evaluates at its training
/// resolution.
MetricsReport evaluate(const Checkpoint& ckpt, const DatasetHandle& dataset,
                       double threshold = 0.5);

}  // namespace fdnet
