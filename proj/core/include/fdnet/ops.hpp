// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <optional>
#include <vector>

#include "fdnet/autograd.hpp"

// Differentiable primitives over NCHW tensors. Each op validates shapes,
// computes its value eagerly and records an analytic backward closure.

namespace fdnet::ops {

struct Conv2dArgs {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// x [B,Cin,H,W], weight [Cout,Cin,kh,kw], optional bias [Cout].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>* bias, Conv2dArgs args);

/// Output spatial extent of a convolution along one axis.
int64_t conv_out_size(int64_t in, int64_t kernel, const Conv2dArgs& args);

/// Group normalization with per-channel affine gamma/beta [C].
template <typename T>
Var<T> group_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, int groups,
                  T eps = T(1e-5));

template <typename T>
Var<T> silu(const Var<T>& x);

template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& a, T factor);

/// Concatenation along axis 1 of rank-4 tensors with equal B,H,W.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);

/// Bilinear resampling with half-pixel centers (align_corners = false).
template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int64_t out_h, int64_t out_w);

/// Non-overlapping average pooling, kernel = stride = factor.
template <typename T>
Var<T> avg_pool(const Var<T>& x, int factor);

template <typename T>
Var<T> max_pool(const Var<T>& x, int kernel, int stride, int padding);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

/// Batched matrix product over rank-3 operands: op(a)[B,M,K] * op(b)[B,K,N].
template <typename T>
Var<T> batched_matmul(const Var<T>& a, const Var<T>& b, bool transpose_a, bool transpose_b);

/// Softmax along the last axis, max-subtracted.
template <typename T>
Var<T> softmax_last(const Var<T>& x);

/// Mean binary cross entropy on logits; probabilities clamped to [eps, 1-eps].
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& target, T eps = T(1e-7));

/// Sum of scalar (single-element) vars.
template <typename T>
Var<T> sum_scalars(const std::vector<Var<T>>& terms);

/// Circular shift of the spatial axes (test rigs, augmentation).
template <typename T>
Tensor<T> roll_spatial(const Tensor<T>& x, int64_t dy, int64_t dx);

}  // namespace fdnet::ops
