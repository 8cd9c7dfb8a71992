// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fdnet/data.hpp"
#include "fdnet/image_io.hpp"
#include "fdnet/phantom.hpp"
#include "fdnet/random.hpp"

namespace fdnet {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

SegmentationSample small_sample(const std::string& id, int64_t h, int64_t w, uint64_t seed) {
  Rng rng(seed);
  SegmentationSample s;
  s.id = id;
  s.image = GrayImage{h, w, std::vector<float>(static_cast<size_t>(h * w))};
  s.mask = BinaryMask(h, w);
  for (auto& v : s.image.pixels) v = static_cast<float>(std::lround(rng.uniform() * 255.0)) / 255.0f;
  for (auto& v : s.mask.pixels) v = rng.uniform() < 0.3 ? 1 : 0;
  return s;
}

TEST(Data, WriteThenLoadRoundTrips) {
  TempDir dir("fdnet_data_roundtrip");
  for (const char* id : {"b", "a", "c"}) write_sample(dir.path(), Split::kTrain, small_sample(id, 32, 40, id[0]));
  const auto ds = load_dataset(dir.path(), Split::kTrain);
  EXPECT_EQ(ds.source(), DataSource::kDisk);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.ids(), (std::vector<std::string>{"a", "b", "c"}));
  const auto s = ds.sample(1);
  EXPECT_EQ(s, small_sample("b", 32, 40, 'b'));
}

TEST(Data, MaskBinarisedAbove127) {
  TempDir dir("fdnet_data_threshold");
  fs::create_directories(dir.path() / "images" / "test");
  fs::create_directories(dir.path() / "masks" / "test");
  Raster8 img{1, 4, 1, {0, 64, 128, 255}};
  Raster8 msk{1, 4, 1, {0, 127, 128, 255}};
  write_png(dir.path() / "images" / "test" / "x.png", img);
  write_png(dir.path() / "masks" / "test" / "x.png", msk);
  const auto s = load_dataset(dir.path(), Split::kTest).sample(0);
  EXPECT_EQ(s.mask.pixels, (std::vector<uint8_t>{0, 0, 1, 1}));
  EXPECT_FLOAT_EQ(s.image.pixels[3], 1.0f);
  EXPECT_FLOAT_EQ(s.image.pixels[1], 64.0f / 255.0f);
}

TEST(Data, MissingOrEmptyDirectoriesRaise) {
  TempDir dir("fdnet_data_missing");
  EXPECT_THROW(load_dataset(dir.path(), Split::kTrain), DatasetNotFound);
  fs::create_directories(dir.path() / "images" / "train");
  fs::create_directories(dir.path() / "masks" / "train");
  EXPECT_THROW(load_dataset(dir.path(), Split::kTrain), DatasetNotFound);
}

TEST(Data, OrphanIsNamed) {
  TempDir dir("fdnet_data_orphan");
  for (const char* id : {"p0", "p1", "p2"}) write_sample(dir.path(), Split::kTrain, small_sample(id, 32, 32, 1));
  fs::remove(dir.path() / "masks" / "train" / "p1.png");
  try {
    load_dataset(dir.path(), Split::kTrain);
    FAIL() << "expected PairingError";
  } catch (const PairingError& e) {
    EXPECT_EQ(e.orphan(), "p1");
    EXPECT_NE(std::string(e.what()).find("p1"), std::string::npos);
  }
}

TEST(Data, SampleValidation) {
  auto s = small_sample("v", 8, 8, 2);
  EXPECT_NO_THROW(s.validate());
  s.mask.pixels[3] = 2;
  EXPECT_THROW(s.validate(), ValidationError);
  s = small_sample("v", 8, 8, 2);
  s.image.pixels[0] = 1.5f;
  EXPECT_THROW(s.validate(), ValidationError);
  s = small_sample("v", 8, 8, 2);
  s.mask = BinaryMask(8, 7);
  EXPECT_THROW(s.validate(), ValidationError);
  EXPECT_THROW(DatasetHandle::from_samples(Split::kTrain, {small_sample("d", 8, 8, 1), small_sample("d", 8, 8, 2)}),
               ValidationError);
  EXPECT_EQ(parse_split("test"), Split::kTest);
  EXPECT_THROW(parse_split("val"), ConfigError);
}

TEST(Data, ResizeContract) {
  const auto s = small_sample("r", 64, 96, 3);
  const auto same = resize_sample(s, 64, 96);
  EXPECT_EQ(same, s);
  EXPECT_THROW(resize_sample(s, 48, 64), ShapeError);
  EXPECT_THROW(resize_sample(s, 0, 64), ShapeError);

  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t h = 32 * rng.uniform_int(1, 4), w = 32 * rng.uniform_int(1, 4);
    const auto r = resize_sample(s, h, w);
    EXPECT_EQ(r.id, "r");
    EXPECT_EQ(r.image.height, h);
    EXPECT_EQ(r.mask.width, w);
    EXPECT_NO_THROW(r.validate());
    EXPECT_EQ(resize_sample(r, h, w).mask, r.mask);
  }
  const auto big = resize_sample(small_sample("x", 1040, 1408, 5), 1024, 1024);
  EXPECT_EQ(big.image.height, 1024);
  EXPECT_EQ(big.image.width, 1024);
}

TEST(Data, BilinearOfConstantIsConstant) {
  const GrayImage g{10, 14, std::vector<float>(140, 0.25f)};
  for (float v : resize_bilinear(g, 32, 64).pixels) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Data, StackAndFlip) {
  const auto a = small_sample("a", 4, 6, 1), b = small_sample("b", 4, 6, 2);
  const auto x = stack_images<float>({a, b});
  const auto y = stack_masks<float>({a, b});
  EXPECT_EQ(x.shape(), (Shape{2, 1, 4, 6}));
  EXPECT_EQ(x[24 + 7], b.image.pixels[7]);
  EXPECT_EQ(y[5], static_cast<float>(a.mask.pixels[5]));
  const auto f = flip_sample(a, true, false);
  EXPECT_EQ(f.image.at(1, 0), a.image.at(1, 5));
  EXPECT_EQ(f.mask.at(2, 5), a.mask.at(2, 0));
  EXPECT_EQ(flip_sample(flip_sample(a, true, true), true, true), a);
}

TEST(ImageIo, PngRoundTripIsExact) {
  TempDir dir("fdnet_png");
  Raster8 r{3, 5, 1, {}};
  for (int i = 0; i < 15; ++i) r.data.push_back(static_cast<uint8_t>(i * 17));
  write_png(dir.path() / "g.png", r, {{"fdnet", "{}"}});
  const auto back = read_png_gray(dir.path() / "g.png");
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.data, r.data);
  EXPECT_THROW(read_png_gray(dir.path() / "missing.png"), IOError);
}

TEST(ImageIo, OutputIsByteStable) {
  TempDir dir("fdnet_png_stable");
  Raster8 rgb{2, 2, 3, std::vector<uint8_t>(12, 200)};
  write_png(dir.path() / "a.png", rgb);
  write_png(dir.path() / "b.png", rgb);
  EXPECT_EQ(fs::file_size(dir.path() / "a.png"), fs::file_size(dir.path() / "b.png"));
  const auto g = read_png_gray(dir.path() / "a.png");
  EXPECT_EQ(g.channels, 1);
  EXPECT_EQ(g.data[0], 200);
}

}  // namespace
}  // namespace fdnet
