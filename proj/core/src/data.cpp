// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fdnet/image_io.hpp"

namespace fdnet {
namespace fs = std::filesystem;

int64_t BinaryMask::count() const {
  return std::count(pixels.begin(), pixels.end(), uint8_t{1});
}

void SegmentationSample::validate() const {
  if (image.height != mask.height || image.width != mask.width) {
    throw ValidationError("sample " + id + ": image and mask shapes differ");
  }
  if (static_cast<int64_t>(image.pixels.size()) != image.height * image.width ||
      static_cast<int64_t>(mask.pixels.size()) != mask.height * mask.width) {
    throw ValidationError("sample " + id + ": pixel buffer size mismatch");
  }
  for (uint8_t v : mask.pixels) {
    if (v > 1) throw ValidationError("sample " + id + ": mask is not binary");
  }
  for (float v : image.pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("sample " + id + ": intensity outside [0,1]");
  }
}

std::string_view split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw ConfigError("split must be train or test, got " + std::string(name));
}

DatasetHandle DatasetHandle::from_samples(Split split, std::vector<SegmentationSample> samples) {
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  DatasetHandle h;
  h.split_ = split;
  h.source_ = DataSource::kSynthetic;
  for (size_t i = 0; i < samples.size(); ++i) {
    samples[i].validate();
    if (i > 0 && samples[i].id == samples[i - 1].id) {
      throw ValidationError("duplicate sample id " + samples[i].id);
    }
    h.ids_.push_back(samples[i].id);
  }
  h.memory_ = std::make_shared<const std::vector<SegmentationSample>>(std::move(samples));
  return h;
}

SegmentationSample DatasetHandle::sample(size_t index) const {
  if (index >= ids_.size()) throw Error("dataset index out of range");
  if (memory_) return (*memory_)[index];
  return load_sample(ids_[index], image_paths_[index], mask_paths_[index]);
}

namespace {

std::map<std::string, fs::path> list_pngs(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension() == ".png") out.emplace(p.stem().string(), p);
  }
  return out;
}

}  // namespace

DatasetHandle load_dataset(const fs::path& root, Split split) {
  const std::string name(split_name(split));
  const fs::path image_dir = root / "images" / name;
  const fs::path mask_dir = root / "masks" / name;
  for (const auto& dir : {image_dir, mask_dir}) {
    if (!fs::is_directory(dir)) throw DatasetNotFound("missing dataset directory " + dir.string());
  }
  const auto images = list_pngs(image_dir);
  const auto masks = list_pngs(mask_dir);
  if (images.empty() && masks.empty()) {
    throw DatasetNotFound("no PNG files under " + image_dir.string());
  }
  for (const auto& [id, path] : images) {
    if (!masks.contains(id)) {
      throw PairingError("image " + path.string() + " has no matching mask (id " + id + ")", id);
    }
  }
  for (const auto& [id, path] : masks) {
    if (!images.contains(id)) {
      throw PairingError("mask " + path.string() + " has no matching image (id " + id + ")", id);
    }
  }
  DatasetHandle h;
  h.split_ = split;
  h.source_ = DataSource::kDisk;
  for (const auto& [id, path] : images) {  // std::map iterates lexicographically
    h.ids_.push_back(id);
    h.image_paths_.push_back(path);
    h.mask_paths_.push_back(masks.at(id));
  }
  return h;
}

SegmentationSample load_sample(const std::string& id, const fs::path& image_path,
                               const fs::path& mask_path) {
  const Raster8 img = read_png_gray(image_path);
  const Raster8 msk = read_png_gray(mask_path);
  if (img.height != msk.height || img.width != msk.width) {
    throw ValidationError("sample " + id + ": image and mask sizes differ");
  }
  SegmentationSample s;
  s.id = id;
  s.image.height = img.height;
  s.image.width = img.width;
  s.image.pixels.resize(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) s.image.pixels[i] = static_cast<float>(img.data[i]) / 255.0f;
  s.mask = BinaryMask(msk.height, msk.width);
  for (size_t i = 0; i < msk.data.size(); ++i) s.mask.pixels[i] = msk.data[i] > kMaskThreshold ? 1 : 0;
  return s;
}

void write_sample(const fs::path& root, Split split, const SegmentationSample& sample,
                  const std::string& provenance_json) {
  const std::string name(split_name(split));
  fs::create_directories(root / "images" / name);
  fs::create_directories(root / "masks" / name);
  Raster8 img{sample.image.height, sample.image.width, 1, {}};
  img.data.resize(sample.image.pixels.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = static_cast<uint8_t>(std::lround(std::clamp(sample.image.pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  Raster8 msk{sample.mask.height, sample.mask.width, 1, {}};
  msk.data.resize(sample.mask.pixels.size());
  for (size_t i = 0; i < msk.data.size(); ++i) msk.data[i] = sample.mask.pixels[i] ? 255 : 0;
  PngText text;
  if (!provenance_json.empty()) text.emplace_back("fdnet-config", provenance_json);
  write_png(root / "images" / name / (sample.id + ".png"), img, text);
  write_png(root / "masks" / name / (sample.id + ".png"), msk, text);
}

namespace {

struct Taps {
  std::vector<int64_t> lo, hi;
  std::vector<float> frac;
};

Taps linear_taps(int64_t in, int64_t out) {
  Taps t;
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    double src = std::max(0.0, (static_cast<double>(o) + 0.5) * ratio - 0.5);
    auto lo = std::min(static_cast<int64_t>(std::floor(src)), in - 1);
    t.lo.push_back(lo);
    t.hi.push_back(std::min(lo + 1, in - 1));
    t.frac.push_back(static_cast<float>(src - static_cast<double>(lo)));
  }
  return t;
}

void check_target(int64_t h, int64_t w) {
  if (h < 32 || w < 32 || h % 32 != 0 || w % 32 != 0) {
    throw ShapeError("resize target " + std::to_string(h) + "x" + std::to_string(w) +
                     " must be positive multiples of 32");
  }
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& image, int64_t height, int64_t width) {
  if (image.height == height && image.width == width) return image;
  const Taps ty = linear_taps(image.height, height);
  const Taps tx = linear_taps(image.width, width);
  GrayImage out{height, width, std::vector<float>(static_cast<size_t>(height * width))};
  for (int64_t y = 0; y < height; ++y) {
    const auto yi = static_cast<size_t>(y);
    for (int64_t x = 0; x < width; ++x) {
      const auto xi = static_cast<size_t>(x);
      const float a = image.at(ty.lo[yi], tx.lo[xi]), b = image.at(ty.lo[yi], tx.hi[xi]);
      const float c = image.at(ty.hi[yi], tx.lo[xi]), d = image.at(ty.hi[yi], tx.hi[xi]);
      const float top = a + tx.frac[xi] * (b - a);
      const float bot = c + tx.frac[xi] * (d - c);
      out.pixels[static_cast<size_t>(y * width + x)] = std::clamp(top + ty.frac[yi] * (bot - top), 0.0f, 1.0f);
    }
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int64_t height, int64_t width) {
  if (mask.height == height && mask.width == width) return mask;
  BinaryMask out(height, width);
  for (int64_t y = 0; y < height; ++y) {
    const int64_t sy = std::min(mask.height - 1, (2 * y + 1) * mask.height / (2 * height));
    for (int64_t x = 0; x < width; ++x) {
      const int64_t sx = std::min(mask.width - 1, (2 * x + 1) * mask.width / (2 * width));
      out.pixels[static_cast<size_t>(y * width + x)] = mask.at(sy, sx);
    }
  }
  return out;
}

SegmentationSample resize_sample(const SegmentationSample& sample, int64_t target_height,
                                 int64_t target_width) {
  check_target(target_height, target_width);
  SegmentationSample out;
  out.id = sample.id;
  out.image = resize_bilinear(sample.image, target_height, target_width);
  out.mask = resize_nearest(sample.mask, target_height, target_width);
  return out;
}

template <typename T>
Tensor<T> stack_images(const std::vector<SegmentationSample>& batch) {
  if (batch.empty()) throw ShapeError("stack_images: empty batch");
  const int64_t h = batch.front().image.height, w = batch.front().image.width;
  Tensor<T> out({static_cast<int64_t>(batch.size()), 1, h, w});
  for (size_t n = 0; n < batch.size(); ++n) {
    const auto& img = batch[n].image;
    if (img.height != h || img.width != w) throw ShapeError("stack_images: mixed sizes in batch");
    std::transform(img.pixels.begin(), img.pixels.end(), out.data() + static_cast<int64_t>(n) * h * w,
                   [](float v) { return static_cast<T>(v); });
  }
  return out;
}

template <typename T>
Tensor<T> stack_masks(const std::vector<SegmentationSample>& batch) {
  if (batch.empty()) throw ShapeError("stack_masks: empty batch");
  const int64_t h = batch.front().mask.height, w = batch.front().mask.width;
  Tensor<T> out({static_cast<int64_t>(batch.size()), 1, h, w});
  for (size_t n = 0; n < batch.size(); ++n) {
    const auto& m = batch[n].mask;
    if (m.height != h || m.width != w) throw ShapeError("stack_masks: mixed sizes in batch");
    std::transform(m.pixels.begin(), m.pixels.end(), out.data() + static_cast<int64_t>(n) * h * w,
                   [](uint8_t v) { return static_cast<T>(v); });
  }
  return out;
}

SegmentationSample flip_sample(const SegmentationSample& sample, bool horizontal, bool vertical) {
  SegmentationSample out = sample;
  const int64_t h = sample.image.height, w = sample.image.width;
  for (int64_t y = 0; y < h; ++y) {
    const int64_t sy = vertical ? h - 1 - y : y;
    for (int64_t x = 0; x < w; ++x) {
      const int64_t sx = horizontal ? w - 1 - x : x;
      out.image.pixels[static_cast<size_t>(y * w + x)] = sample.image.at(sy, sx);
      out.mask.pixels[static_cast<size_t>(y * w + x)] = sample.mask.at(sy, sx);
    }
  }
  return out;
}

template Tensor<float> stack_images<float>(const std::vector<SegmentationSample>&);
template Tensor<double> stack_images<double>(const std::vector<SegmentationSample>&);
template Tensor<float> stack_masks<float>(const std::vector<SegmentationSample>&);
template Tensor<double> stack_masks<double>(const std::vector<SegmentationSample>&);

}  // namespace fdnet
