// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/ftb.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace fdnet::ftb {
namespace {

// The FFTW planner is not reentrant; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place batched 2-D transform over `planes` contiguous H*W planes.
void transform(std::vector<std::complex<double>>& buf, int64_t planes, int64_t h, int64_t w,
               int sign) {
  if (planes == 0 || h == 0 || w == 0) return;
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  const int n[2] = {static_cast<int>(h), static_cast<int>(w)};
  const int dist = static_cast<int>(h * w);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_many_dft(2, n, static_cast<int>(planes), data, nullptr, 1, dist, data,
                              nullptr, 1, dist, sign, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw NumericsError("FFTW failed to create a plan");
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

void check_mask(const Tensor<double>& mask, int64_t h, int64_t w) {
  if (mask.rank() != 2 || mask.dim(0) != h || mask.dim(1) != w) {
    throw ShapeError("high-pass mask " + shape_str(mask.shape()) + " does not match spectrum [" +
                     std::to_string(h) + "," + std::to_string(w) + "]");
  }
}

// Applies the mask to `planes` real planes; returns the worst imaginary residue.
template <typename T>
double highpass_planes(const T* in, T* out, int64_t planes, int64_t h, int64_t w,
                       const Tensor<double>& mask, bool accumulate) {
  const int64_t hw = h * w;
  std::vector<std::complex<double>> buf(static_cast<size_t>(planes * hw));
  for (int64_t i = 0; i < planes * hw; ++i) buf[static_cast<size_t>(i)] = in[i];
  transform(buf, planes, h, w, FFTW_FORWARD);
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t i = 0; i < hw; ++i) buf[static_cast<size_t>(p * hw + i)] *= mask[i];
  }
  transform(buf, planes, h, w, FFTW_BACKWARD);
  const double inv = 1.0 / static_cast<double>(hw);
  double residue = 0.0;
  for (int64_t i = 0; i < planes * hw; ++i) {
    const auto& z = buf[static_cast<size_t>(i)];
    residue = std::max(residue, std::abs(z.imag() * inv));
    const T v = static_cast<T>(z.real() * inv);
    out[i] = accumulate ? out[i] + v : v;
  }
  return residue;
}

template <typename T>
void require_finite(const T* data, int64_t n, const char* what) {
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(data[i])) throw NumericsError(std::string(what) + ": non-finite input");
  }
}

}  // namespace

double normalized_radius(int64_t u, int64_t v, int64_t height, int64_t width) {
  const double a = static_cast<double>(signed_frequency(u, height)) / (0.5 * height);
  const double b = static_cast<double>(signed_frequency(v, width)) / (0.5 * width);
  return std::sqrt(0.5 * (a * a + b * b));
}

template <typename T>
Spectrum forward_dft(const Tensor<T>& feature) {
  if (feature.rank() != 3) throw ShapeError("forward_dft expects [C,H,W], got " +
                                            shape_str(feature.shape()));
  require_finite(feature.data(), feature.numel(), "forward_dft");
  const int64_t c = feature.dim(0), h = feature.dim(1), w = feature.dim(2);
  Spectrum spec(c, h, w);
  auto& bins = spec.bins();
  for (int64_t i = 0; i < feature.numel(); ++i) bins[static_cast<size_t>(i)] = feature[i];
  transform(bins, c, h, w, FFTW_FORWARD);
  return spec;
}

Tensor<double> build_highpass(const HighPassFilterSpec& spec) {
  if (!(spec.cutoff >= 0.0 && spec.cutoff <= 1.0)) {
    throw ConfigError("ftb.cutoff must lie in [0,1], got " + std::to_string(spec.cutoff));
  }
  if (spec.height < 1 || spec.width < 1) throw ConfigError("high-pass mask needs a positive shape");
  Tensor<double> mask({spec.height, spec.width}, 1.0);
  for (int64_t u = 0; u < spec.height; ++u) {
    for (int64_t v = 0; v < spec.width; ++v) {
      if (normalized_radius(u, v, spec.height, spec.width) <= spec.cutoff + 1e-12) {
        mask[u * spec.width + v] = 0.0;
      }
    }
  }
  return mask;
}

template <typename T>
Tensor<T> filter_and_invert(const Spectrum& spectrum, const Tensor<double>& mask) {
  const int64_t c = spectrum.channels(), h = spectrum.height(), w = spectrum.width();
  check_mask(mask, h, w);
  std::vector<std::complex<double>> buf = spectrum.bins();
  for (int64_t p = 0; p < c; ++p) {
    for (int64_t i = 0; i < h * w; ++i) buf[static_cast<size_t>(p * h * w + i)] *= mask[i];
  }
  transform(buf, c, h, w, FFTW_BACKWARD);
  Tensor<T> out({c, h, w});
  const double inv = 1.0 / static_cast<double>(h * w);
  double residue = 0.0;
  for (int64_t i = 0; i < out.numel(); ++i) {
    const auto& z = buf[static_cast<size_t>(i)];
    residue = std::max(residue, std::abs(z.imag() * inv));
    out[i] = static_cast<T>(z.real() * inv);
  }
  if (residue > kImagResidueBound) {
    throw NumericsError("filter_and_invert: imaginary residue " + std::to_string(residue) +
                        " exceeds bound");
  }
  return out;
}

template <typename T>
Tensor<T> inverse_dft(const Spectrum& spectrum) {
  return filter_and_invert<T>(spectrum,
                              Tensor<double>({spectrum.height(), spectrum.width()}, 1.0));
}

template <typename T>
Var<T> fourier_highpass(const Var<T>& x, const Tensor<double>& mask) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("fourier_highpass expects [B,C,H,W], got " + shape_str(s));
  const int64_t planes = s[0] * s[1], h = s[2], w = s[3];
  check_mask(mask, h, w);
  require_finite(x.value().data(), x.value().numel(), "fourier_highpass");
  Tensor<T> out(s);
  const double residue = highpass_planes(x.value().data(), out.data(), planes, h, w, mask, false);
  if (residue > kImagResidueBound) {
    throw NumericsError("fourier_highpass: imaginary residue " + std::to_string(residue));
  }
  auto m = std::make_shared<Tensor<double>>(mask);
  return make_op_result<T>(std::move(out), {x}, [m, planes, h, w](Node<T>& self) {
    highpass_planes(self.grad.data(), self.parents[0]->grad_buffer().data(), planes, h, w, *m,
                    true);
  });
}

template <typename T>
FourierTransformBlock<T>::FourierTransformBlock(double cutoff) : cutoff_(cutoff) {
  // Validate eagerly so a bad config fails at construction time.
  build_highpass({cutoff, 1, 1, FilterMode::kIdeal});
}

template <typename T>
Var<T> FourierTransformBlock<T>::operator()(const Var<T>& x) const {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("FTB expects [B,C,H,W], got " + shape_str(s));
  return fourier_highpass(x, build_highpass({cutoff_, s[2], s[3], FilterMode::kIdeal}));
}

template Spectrum forward_dft<float>(const Tensor<float>&);
template Spectrum forward_dft<double>(const Tensor<double>&);
template Tensor<float> filter_and_invert<float>(const Spectrum&, const Tensor<double>&);
template Tensor<double> filter_and_invert<double>(const Spectrum&, const Tensor<double>&);
template Tensor<float> inverse_dft<float>(const Spectrum&);
template Tensor<double> inverse_dft<double>(const Spectrum&);
template Var<float> fourier_highpass<float>(const Var<float>&, const Tensor<double>&);
template Var<double> fourier_highpass<double>(const Var<double>&, const Tensor<double>&);
template class FourierTransformBlock<float>;
template class FourierTransformBlock<double>;

}  // namespace fdnet::ftb
