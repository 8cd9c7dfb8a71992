// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fdnet {

/// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct Raster8 {
  int64_t height = 0;
  int64_t width = 0;
  int channels = 1;
  std::vector<uint8_t> data;
};

using PngText = std::vector<std::pair<std::string, std::string>>;

/// Reads any PNG and converts it to 8-bit grayscale. Throws IOError.
Raster8 read_png_gray(const std::filesystem::path& path);

/// Writes a gray or RGB PNG with optional tEXt chunks. Output bytes depend
/// only on the inputs (no timestamps). Throws IOError.
void write_png(const std::filesystem::path& path, const Raster8& raster, const PngText& text = {});

}  // namespace fdnet
