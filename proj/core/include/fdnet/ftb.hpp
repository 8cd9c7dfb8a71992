// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "fdnet/autograd.hpp"

// Fourier transform block: per-channel 2-D DFT, ideal radial high-pass
// mask, inverse DFT, real part.
//
// Conventions: forward transform unnormalised, inverse scaled by 1/(H*W),
// bin (0,0) is DC, bin k along an axis of length N has signed frequency
// k for k <= N/2 and k - N otherwise.

namespace fdnet::ftb {

enum class FilterMode { kIdeal };

struct HighPassFilterSpec {
  /// Radius below which bins are suppressed, as a fraction of the largest
  /// radial distance (DC to the joint Nyquist corner).
  double cutoff = 0.1;
  int64_t height = 0;
  int64_t width = 0;
  FilterMode mode = FilterMode::kIdeal;
};

/// Complex [C,H,W] spectrum.
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(int64_t channels, int64_t height, int64_t width)
      : channels_(channels),
        height_(height),
        width_(width),
        bins_(static_cast<size_t>(channels * height * width)) {}

  int64_t channels() const noexcept { return channels_; }
  int64_t height() const noexcept { return height_; }
  int64_t width() const noexcept { return width_; }

  std::complex<double>& at(int64_t c, int64_t u, int64_t v) {
    return bins_[static_cast<size_t>((c * height_ + u) * width_ + v)];
  }
  const std::complex<double>& at(int64_t c, int64_t u, int64_t v) const {
    return bins_[static_cast<size_t>((c * height_ + u) * width_ + v)];
  }
  std::vector<std::complex<double>>& bins() noexcept { return bins_; }
  const std::vector<std::complex<double>>& bins() const noexcept { return bins_; }

 private:
  int64_t channels_ = 0;
  int64_t height_ = 0;
  int64_t width_ = 0;
  std::vector<std::complex<double>> bins_;
};

/// Signed frequency of bin k on an axis of length n.
inline int64_t signed_frequency(int64_t k, int64_t n) { return 2 * k <= n ? k : k - n; }

/// Radial distance of bin (u,v) normalised so the Nyquist corner is 1.
double normalized_radius(int64_t u, int64_t v, int64_t height, int64_t width);

/// Per-channel DFT of a [C,H,W] feature. Throws NumericsError on NaN/Inf.
template <typename T>
Spectrum forward_dft(const Tensor<T>& feature);

/// [H,W] mask of 0/1 values; 0 where normalized_radius <= cutoff.
Tensor<double> build_highpass(const HighPassFilterSpec& spec);

/// Largest |imag| tolerated after the inverse transform.
inline constexpr double kImagResidueBound = 1e-5;

/// Masks each channel, inverts and returns the real part [C,H,W].
/// Throws ShapeError on mask/spectrum mismatch and NumericsError if the
/// discarded imaginary part exceeds kImagResidueBound.
template <typename T>
Tensor<T> filter_and_invert(const Spectrum& spectrum, const Tensor<double>& mask);

/// Inverse transform of an untouched spectrum (real part).
template <typename T>
Tensor<T> inverse_dft(const Spectrum& spectrum);

/// Differentiable high-pass over a [B,C,H,W] batch. The operator is a real
/// symmetric circulant filter, so its backward pass applies the same mask.
template <typename T>
Var<T> fourier_highpass(const Var<T>& x, const Tensor<double>& mask);

/// The block as used inside the network: mask built per input size.
template <typename T>
class FourierTransformBlock {
 public:
  explicit FourierTransformBlock(double cutoff);

  Var<T> operator()(const Var<T>& x) const;

  double cutoff() const noexcept { return cutoff_; }
  static constexpr int64_t parameter_count() { return 0; }

 private:
  double cutoff_;
};

extern template class FourierTransformBlock<float>;
extern template class FourierTransformBlock<double>;

}  // namespace fdnet::ftb
