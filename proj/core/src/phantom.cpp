// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "fdnet/random.hpp"

namespace fdnet {
namespace {

constexpr double kPi = std::numbers::pi;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise on a lattice with `cell` pixel spacing, values in [-1,1].
class ValueNoise {
 public:
  ValueNoise(int64_t h, int64_t w, double cell, Rng& rng)
      : cell_(cell),
        rows_(static_cast<int64_t>(std::ceil(static_cast<double>(h) / cell)) + 2),
        cols_(static_cast<int64_t>(std::ceil(static_cast<double>(w) / cell)) + 2),
        lattice_(static_cast<size_t>(rows_ * cols_)) {
    for (auto& v : lattice_) v = rng.uniform(-1.0, 1.0);
  }

  double at(double x, double y) const {
    const double gx = x / cell_, gy = y / cell_;
    const auto x0 = static_cast<int64_t>(std::floor(gx));
    const auto y0 = static_cast<int64_t>(std::floor(gy));
    const double tx = smoothstep(gx - static_cast<double>(x0));
    const double ty = smoothstep(gy - static_cast<double>(y0));
    const double a = node(y0, x0), b = node(y0, x0 + 1);
    const double c = node(y0 + 1, x0), d = node(y0 + 1, x0 + 1);
    return (a + tx * (b - a)) + ty * ((c + tx * (d - c)) - (a + tx * (b - a)));
  }

 private:
  double node(int64_t r, int64_t c) const {
    r = std::clamp<int64_t>(r, 0, rows_ - 1);
    c = std::clamp<int64_t>(c, 0, cols_ - 1);
    return lattice_[static_cast<size_t>(r * cols_ + c)];
  }
  double cell_;
  int64_t rows_, cols_;
  std::vector<double> lattice_;
};

}  // namespace

void PhantomSpec::validate() const {
  if (height < 64 || width < 64) throw ConfigError("phantom canvas must be at least 64x64");
  if (cell_count < 0 || interference_count < 0) throw ConfigError("phantom counts must be >= 0");
  if (!(cell_contrast >= 0.0 && cell_contrast <= 1.0) ||
      !(interference_contrast >= 0.0 && interference_contrast <= 1.0)) {
    throw ConfigError("phantom contrasts must lie in [0,1]");
  }
  if (!(interference_contrast > cell_contrast)) {
    throw ConfigError("interference_contrast must exceed cell_contrast");
  }
  if (!(cell_radius_min > 0.0 && cell_radius_max >= cell_radius_min) ||
      !(interference_radius_min > 0.0 && interference_radius_max >= interference_radius_min)) {
    throw ConfigError("phantom radius ranges must be positive and ordered");
  }
  if (!(overlap_threshold >= 0.0 && overlap_threshold <= 1.0)) {
    throw ConfigError("overlap_threshold must lie in [0,1]");
  }
  if (background_amplitude < 0.0 || noise_sigma < 0.0 || illumination_drift < 0.0) {
    throw ConfigError("phantom noise amplitudes must be >= 0");
  }
}

bool CellShape::contains(double x, double y) const {
  const double dx = x - cx, dy = y - cy;
  const double d = std::hypot(dx, dy);
  if (d > radius * (1.0 + std::abs(lobe_amplitude))) return false;
  const double theta = std::atan2(dy, dx);
  return d <= radius * (1.0 + lobe_amplitude * std::cos(lobes * (theta - phase)));
}

double InterferenceBlob::distance(double x, double y) const {
  const double dx = x - cx, dy = y - cy;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = (c * dx + s * dy) / rx;
  const double v = (-s * dx + c * dy) / ry;
  return std::sqrt(u * u + v * v);
}

double InterferenceBlob::opacity(double x, double y) const {
  const double d = distance(x, y);
  if (d >= 1.0) return 0.0;
  if (d <= 0.5) return 1.0;
  return 0.5 * (1.0 + std::cos(kPi * (d - 0.5) / 0.5));
}

PhantomLayout plan_phantom(const PhantomSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0));
  PhantomLayout layout;
  const auto h = static_cast<double>(spec.height), w = static_cast<double>(spec.width);
  for (int i = 0; i < spec.cell_count; ++i) {
    CellShape c;
    c.radius = rng.uniform(spec.cell_radius_min, spec.cell_radius_max);
    c.lobes = static_cast<int>(rng.uniform_int(3, 5));
    c.lobe_amplitude = rng.uniform(0.2, 0.4);
    c.phase = rng.uniform(0.0, 2.0 * kPi);
    const double margin = std::min(c.radius, 0.25 * std::min(h, w));
    c.cx = rng.uniform(margin, w - margin);
    c.cy = rng.uniform(margin, h - margin);
    layout.cells.push_back(c);
  }
  for (int i = 0; i < spec.interference_count; ++i) {
    InterferenceBlob b;
    b.rx = rng.uniform(spec.interference_radius_min, spec.interference_radius_max);
    b.ry = b.rx * rng.uniform(0.6, 1.0);
    b.angle = rng.uniform(0.0, kPi);
    b.cx = rng.uniform(0.0, w);
    b.cy = rng.uniform(0.0, h);
    b.polarity = rng.uniform() < 0.5 ? -1.0 : 1.0;
    layout.blobs.push_back(b);
  }
  return layout;
}

Phantom render_phantom(const PhantomSpec& spec, const PhantomLayout& layout, std::string id) {
  spec.validate();
  const int64_t h = spec.height, w = spec.width;
  Rng rng(derive_seed(spec.seed, 1));

  const double base_cell = static_cast<double>(std::min(h, w)) / 4.0;
  const ValueNoise octaves[3] = {ValueNoise(h, w, base_cell, rng),
                                 ValueNoise(h, w, base_cell / 2.0, rng),
                                 ValueNoise(h, w, base_cell / 4.0, rng)};
  const double weights[3] = {1.0, 0.5, 0.25};
  const double weight_sum = 1.75;
  const double ramp_angle = rng.uniform(0.0, 2.0 * kPi);
  const double ramp_gain = spec.illumination_drift * rng.uniform(0.5, 1.0);

  Phantom ph;
  ph.layout = layout;
  auto& sample = ph.sample;
  sample.id = std::move(id);
  sample.image = GrayImage{h, w, std::vector<float>(static_cast<size_t>(h * w))};
  sample.mask = BinaryMask(h, w);

  const size_t ncells = layout.cells.size();
  std::vector<int64_t> area(ncells, 0), covered(ncells, 0);
  std::vector<double> value(static_cast<size_t>(h * w));
  std::vector<uint8_t> in_cell(static_cast<size_t>(h * w), 0);
  std::vector<uint8_t> in_blob(static_cast<size_t>(h * w), 0);
  std::vector<int32_t> first_cell(static_cast<size_t>(h * w), -1);

  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      const auto idx = static_cast<size_t>(y * w + x);
      double noise = 0.0;
      for (int o = 0; o < 3; ++o) noise += weights[o] * octaves[o].at(px, py);
      double v = 0.5 + spec.background_amplitude * noise / weight_sum;
      const double u = px / static_cast<double>(w) - 0.5, t = py / static_cast<double>(h) - 0.5;
      v += ramp_gain * (std::cos(ramp_angle) * u + std::sin(ramp_angle) * t);
      value[idx] = v;
      bool blob = false;
      for (const auto& b : layout.blobs) blob = blob || b.covers(px, py);
      in_blob[idx] = blob ? 1 : 0;
      for (size_t c = 0; c < ncells; ++c) {
        if (!layout.cells[c].contains(px, py)) continue;
        ++area[c];
        if (blob) ++covered[c];
        in_cell[idx] = 1;
        if (first_cell[idx] < 0) first_cell[idx] = static_cast<int32_t>(c);
      }
    }
  }

  // Cell bodies: faint uniform lift plus a slightly brighter rim.
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const auto idx = static_cast<size_t>(y * w + x);
      if (!in_cell[idx]) continue;
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy) {
        for (int dx = -1; dx <= 1 && !edge; ++dx) {
          const int64_t yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          edge = !in_cell[static_cast<size_t>(yy * w + xx)];
        }
      }
      value[idx] += spec.cell_contrast * (edge ? 1.5 : 1.0);
    }
  }

  for (auto& v : value) v += spec.noise_sigma * rng.normal();

  for (const auto& b : layout.blobs) {
    const double target = 0.5 + b.polarity * spec.interference_contrast;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double a = b.opacity(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
        if (a <= 0.0) continue;
        auto& v = value[static_cast<size_t>(y * w + x)];
        v = v * (1.0 - a) + target * a;
      }
    }
  }

  ph.meta.cell_area = area;
  ph.meta.overlap_ratio.resize(ncells, 0.0);
  std::vector<uint8_t> dropped(ncells, 0);
  for (size_t c = 0; c < ncells; ++c) {
    const double ratio =
        area[c] > 0 ? static_cast<double>(covered[c]) / static_cast<double>(area[c]) : 0.0;
    ph.meta.overlap_ratio[c] = ratio;
    if (ratio > spec.overlap_threshold) {
      dropped[c] = 1;
      ph.meta.dropped_cells.push_back(static_cast<int>(c));
    }
  }

  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const auto idx = static_cast<size_t>(y * w + x);
      const double v = std::clamp(value[idx], 0.0, 1.0);
      sample.image.pixels[idx] = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
      if (!in_cell[idx] || in_blob[idx]) continue;
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      bool kept = false;
      for (size_t c = static_cast<size_t>(first_cell[idx]); c < ncells && !kept; ++c) {
        kept = !dropped[c] && layout.cells[c].contains(px, py);
      }
      sample.mask.pixels[idx] = kept ? 1 : 0;
    }
  }
  return ph;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  char id[32];
  std::snprintf(id, sizeof(id), "phantom_%016llx", static_cast<unsigned long long>(spec.seed));
  return render_phantom(spec, plan_phantom(spec), id);
}

std::vector<Phantom> generate_phantom_set(const PhantomSpec& base, int count,
                                          const std::string& prefix) {
  std::vector<Phantom> out;
  out.reserve(static_cast<size_t>(std::max(count, 0)));
  const uint64_t stream = derive_seed(base.seed, fnv1a(prefix));
  for (int i = 0; i < count; ++i) {
    PhantomSpec spec = base;
    spec.seed = derive_seed(stream, static_cast<uint64_t>(i));
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%04d", prefix.c_str(), i);
    out.push_back(render_phantom(spec, plan_phantom(spec), id));
  }
  return out;
}

}  // namespace fdnet
