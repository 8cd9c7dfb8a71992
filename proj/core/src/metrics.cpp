// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "fdnet/training.hpp"
#include <nlohmann/json.hpp>

namespace fdnet {
using nlohmann::json;

Confusion confusion(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width ||
      pred.pixels.size() != gt.pixels.size()) {
    throw ShapeError("metric masks differ in shape: " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " vs " + std::to_string(gt.height) + "x" +
                     std::to_string(gt.width));
  }
  Confusion c;
  for (size_t i = 0; i < pred.pixels.size(); ++i) {
    const uint8_t p = pred.pixels[i], g = gt.pixels[i];
    if (p > 1 || g > 1) throw ValidationError("metric masks must be binary");
    if (p && g) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

namespace {

double ratio_or_one(int64_t num, int64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  const Confusion c = confusion(pred, gt);
  return ratio_or_one(2 * c.tp, 2 * c.tp + c.fp + c.fn);
}

double iou_foreground(const BinaryMask& pred, const BinaryMask& gt) {
  const Confusion c = confusion(pred, gt);
  return ratio_or_one(c.tp, c.tp + c.fp + c.fn);
}

double iou_background(const BinaryMask& pred, const BinaryMask& gt) {
  const Confusion c = confusion(pred, gt);
  return ratio_or_one(c.tn, c.tn + c.fp + c.fn);
}

double miou(const BinaryMask& pred, const BinaryMask& gt) {
  return 0.5 * (iou_foreground(pred, gt) + iou_background(pred, gt));
}

ImageMetrics image_metrics(const std::string& id, const BinaryMask& pred, const BinaryMask& gt) {
  const Confusion c = confusion(pred, gt);
  ImageMetrics m;
  m.id = id;
  m.iou_fg = ratio_or_one(c.tp, c.tp + c.fp + c.fn);
  m.iou_bg = ratio_or_one(c.tn, c.tn + c.fp + c.fn);
  m.miou = 0.5 * (m.iou_fg + m.iou_bg);
  m.dice = ratio_or_one(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

const std::vector<ReferenceScore>& reference_comparison() {
  static const std::vector<ReferenceScore> rows{
      {"UNet", 67.1, 74.3},     {"Deeplab", 58.4, 63.5},    {"UNet++", 60.2, 68.4},
      {"TransUnet", 56.8, 61.0}, {"PraNet", 70.6, 77.9},    {"SwinUnet", 53.7, 59.4},
      {"UCtransNet", 75.7, 82.1}, {"FDNet", 80.8, 86.2},
  };
  return rows;
}

const std::vector<ReferenceScore>& reference_ablation() {
  static const std::vector<ReferenceScore> rows{
      {"No.1", 50.4, 54.7}, {"No.2", 58.1, 61.3}, {"No.3", 68.5, 73.8},
      {"No.4", 69.7, 74.1}, {"Ours", 80.8, 86.2},
  };
  return rows;
}

MetricsReport summarize(std::vector<ImageMetrics> per_image, double threshold,
                        std::string config_json) {
  if (per_image.empty()) throw ValidationError("cannot evaluate an empty dataset");
  MetricsReport r;
  r.threshold = threshold;
  r.config_json = std::move(config_json);
  r.reference_scores = reference_comparison();
  double miou_sum = 0.0, dice_sum = 0.0;
  for (const auto& m : per_image) {
    miou_sum += m.miou;
    dice_sum += m.dice;
  }
  const auto n = static_cast<double>(per_image.size());
  r.miou = miou_sum / n;
  r.dice = dice_sum / n;
  r.per_image = std::move(per_image);
  return r;
}

std::string MetricsReport::to_json() const {
  json j;
  j["aggregate"] = {{"miou", miou}, {"dice", dice}, {"count", per_image.size()}};
  j["threshold"] = threshold;
  json rows = json::array();
  for (const auto& m : per_image) {
    rows.push_back({{"id", m.id},
                    {"iou_fg", m.iou_fg},
                    {"iou_bg", m.iou_bg},
                    {"miou", m.miou},
                    {"dice", m.dice}});
  }
  j["per_image"] = rows;
  json refs = json::array();
  for (const auto& s : reference_scores) {
    refs.push_back({{"method", s.method}, {"miou_percent", s.miou}, {"dice_percent", s.dice}});
  }
  j["reference_scores"] = {{"label", kReferenceLabel}, {"rows", refs}};
  j["config"] = config_json.empty() ? json(nullptr) : json::parse(config_json);
  return j.dump(2);
}

std::string MetricsReport::render_table(const std::string& method) const {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%-28s %8s %8s\n", "Method", "mIoU^", "Dice^");
  os << line;
  std::snprintf(line, sizeof(line), "%-28s %8.1f %8.1f\n", method.c_str(), 100.0 * miou,
                100.0 * dice);
  os << line;
  if (!reference_scores.empty()) {
    os << "-- " << kReferenceLabel << " --\n";
    for (const auto& s : reference_scores) {
      std::snprintf(line, sizeof(line), "%-28s %8.1f %8.1f\n", s.method.c_str(), s.miou, s.dice);
      os << line;
    }
  }
  return os.str();
}

MetricsReport evaluate(const FdNet<float>& model, const DatasetHandle& dataset, double threshold,
                       int64_t height, int64_t width, std::string config_json) {
  if (dataset.empty()) throw ValidationError("cannot evaluate an empty dataset");
  std::vector<ImageMetrics> per_image;
  per_image.reserve(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    const SegmentationSample s = resize_sample(dataset.sample(i), height, width);
    const Tensor<float> images = replicate_gray(stack_images<float>({s}));
    const Tensor<uint8_t> mask = model.predict_mask(images, threshold);
    BinaryMask pred(height, width);
    std::copy(mask.values().begin(), mask.values().end(), pred.pixels.begin());
    per_image.push_back(image_metrics(s.id, pred, s.mask));
  }
  return summarize(std::move(per_image), threshold, std::move(config_json));
}

MetricsReport evaluate(const Checkpoint& ckpt, const DatasetHandle& dataset, double threshold) {
  if (dataset.empty()) throw ValidationError("cannot evaluate an empty dataset");
  const TrainConfig tc = train_config_of(ckpt);
  const FdNet<float> model = model_from_checkpoint(ckpt);
  return evaluate(model, dataset, threshold, tc.resize_height, tc.resize_width, ckpt.config_json);
}

}  // namespace fdnet
