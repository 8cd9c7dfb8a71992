// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdnet/data.hpp"

// Synthetic microscopy phantoms: a smooth textured background, faint lobed
// "astrocyte" cells, and salient interference blobs drawn on top. Cells
// mostly hidden by interference are left out of the ground truth.

namespace fdnet {

struct PhantomSpec {
  int64_t height = 256;
  int64_t width = 256;
  int cell_count = 6;
  int interference_count = 2;
  double cell_contrast = 0.12;
  double interference_contrast = 0.4;
  double cell_radius_min = 14.0;
  double cell_radius_max = 22.0;
  double interference_radius_min = 10.0;
  double interference_radius_max = 24.0;
  /// A cell whose covered area fraction exceeds this is dropped.
  double overlap_threshold = 0.5;
  double background_amplitude = 0.1;
  double noise_sigma = 0.02;
  /// Peak-to-peak amplitude of a random linear illumination ramp.
  double illumination_drift = 0.0;
  uint64_t seed = 0;

  /// Throws ConfigError on invalid counts, sizes or contrasts.
  void validate() const;
};

/// Lobed star: r(theta) = radius * (1 + lobe_amplitude * cos(lobes * (theta - phase))).
struct CellShape {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
  int lobes = 4;
  double lobe_amplitude = 0.3;
  double phase = 0.0;

  bool contains(double x, double y) const;
};

/// Rotated ellipse with a flat core and a cosine rim.
struct InterferenceBlob {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 0.0;
  double ry = 0.0;
  double angle = 0.0;
  double polarity = 1.0;  // +1 bright debris, -1 dark dead cell

  /// Normalised elliptical distance; the footprint is distance < 1.
  double distance(double x, double y) const;
  bool covers(double x, double y) const { return distance(x, y) < 1.0; }
  /// Opacity in [0,1]: 1 inside half radius, 0 outside the footprint.
  double opacity(double x, double y) const;
};

struct PhantomLayout {
  std::vector<CellShape> cells;
  std::vector<InterferenceBlob> blobs;
};

struct PhantomMeta {
  std::vector<int> dropped_cells;
  std::vector<double> overlap_ratio;  // per cell, covered / area
  std::vector<int64_t> cell_area;     // per cell, pixels
};

struct Phantom {
  SegmentationSample sample;
  PhantomLayout layout;
  PhantomMeta meta;
};

/// Pixel (x, y) is sampled at its centre (x + 0.5, y + 0.5).
PhantomLayout plan_phantom(const PhantomSpec& spec);

Phantom render_phantom(const PhantomSpec& spec, const PhantomLayout& layout, std::string id);

/// plan + render; a pure function of the spec (including its seed).
Phantom generate_phantom(const PhantomSpec& spec);

/// `count` phantoms with ids "<prefix>_0000".., seeds derived from base.seed.
std::vector<Phantom> generate_phantom_set(const PhantomSpec& base, int count,
                                          const std::string& prefix);

}  // namespace fdnet
