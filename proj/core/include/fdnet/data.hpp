// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fdnet/tensor.hpp"

namespace fdnet {

/// Grayscale intensities in [0,1], row-major.
struct GrayImage {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<float> pixels;

  float at(int64_t y, int64_t x) const { return pixels[static_cast<size_t>(y * width + x)]; }
  bool operator==(const GrayImage&) const = default;
};

/// Values exactly 0 or 1, row-major.
struct BinaryMask {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(int64_t h, int64_t w, uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<size_t>(h * w), fill) {}

  uint8_t at(int64_t y, int64_t x) const { return pixels[static_cast<size_t>(y * width + x)]; }
  int64_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

struct SegmentationSample {
  std::string id;
  GrayImage image;
  BinaryMask mask;

  /// Throws ValidationError unless shapes agree, the mask is binary and
  /// intensities lie in [0,1].
  void validate() const;
  bool operator==(const SegmentationSample&) const = default;
};

enum class Split { kTrain, kTest };
enum class DataSource { kDisk, kSynthetic };

std::string_view split_name(Split split);
/// Throws ConfigError for anything but "train" / "test".
Split parse_split(std::string_view name);

/// An ordered split. Disk-backed handles decode files on access.
class DatasetHandle {
 public:
  /// In-memory handle; samples are ordered by id. Throws ValidationError on
  /// duplicate ids or invalid samples.
  static DatasetHandle from_samples(Split split, std::vector<SegmentationSample> samples);

  Split split() const noexcept { return split_; }
  DataSource source() const noexcept { return source_; }
  size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  SegmentationSample sample(size_t index) const;

 private:
  friend DatasetHandle load_dataset(const std::filesystem::path& root, Split split);

  Split split_ = Split::kTrain;
  DataSource source_ = DataSource::kSynthetic;
  std::vector<std::string> ids_;
  std::vector<std::filesystem::path> image_paths_;
  std::vector<std::filesystem::path> mask_paths_;
  std::shared_ptr<const std::vector<SegmentationSample>> memory_;
};

/// Mask pixels above this 8-bit value are foreground.
inline constexpr uint8_t kMaskThreshold = 127;

/// Indexes root/images/<split>/*.png and root/masks/<split>/*.png.
/// Throws DatasetNotFound if either directory is missing or holds no PNGs,
/// PairingError naming the first orphan id otherwise.
DatasetHandle load_dataset(const std::filesystem::path& root, Split split);

/// Decodes one image/mask pair from disk.
SegmentationSample load_sample(const std::string& id, const std::filesystem::path& image_path,
                               const std::filesystem::path& mask_path);

/// Writes <root>/images/<split>/<id>.png and masks likewise (mask as 0/255).
void write_sample(const std::filesystem::path& root, Split split, const SegmentationSample& sample,
                  const std::string& provenance_json = {});

/// Bilinear image / nearest-neighbour mask resampling. Target sides must be
/// positive multiples of 32 (ShapeError otherwise).
SegmentationSample resize_sample(const SegmentationSample& sample, int64_t target_height,
                                 int64_t target_width);

/// Bilinear resize with half-pixel centres; identity when sizes match.
GrayImage resize_bilinear(const GrayImage& image, int64_t height, int64_t width);
BinaryMask resize_nearest(const BinaryMask& mask, int64_t height, int64_t width);

/// [B,1,H,W] intensities and [B,1,H,W] 0/1 targets for a batch of samples
/// of equal size.
template <typename T>
Tensor<T> stack_images(const std::vector<SegmentationSample>& batch);
template <typename T>
Tensor<T> stack_masks(const std::vector<SegmentationSample>& batch);

/// Horizontal / vertical mirror of image and mask.
SegmentationSample flip_sample(const SegmentationSample& sample, bool horizontal, bool vertical);

}  // namespace fdnet
