// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include "fdnet/autograd.hpp"

// Parameter-free channel attention: K and Q are the average-pooled feature
// flattened per channel, V is the unpooled feature, M = rowsoftmax(K Q^T)
// and the block returns M V + feature.

namespace fdnet::attention {

template <typename T>
struct QkvBundle {
  Tensor<T> q;  // [C, s]
  Tensor<T> k;  // [C, s]
  Tensor<T> v;  // [C, H*W]
};

template <typename T>
struct AttentionMap {
  Tensor<T> m;  // [C, C], row-stochastic
};

/// feature [C,H,W]; pool_factor must divide H and W.
template <typename T>
QkvBundle<T> build_qkv(const Tensor<T>& feature, int pool_factor);

/// m_ij = exp(K_i . Q_j) / sum_j exp(K_i . Q_j). Throws NumericsError on
/// non-finite input.
template <typename T>
AttentionMap<T> channel_attention(const Tensor<T>& q, const Tensor<T>& k);

/// reshape(M V) + residual, residual [C,H,W] with H*W == v.dim(1).
template <typename T>
Tensor<T> apply_attention(const AttentionMap<T>& map, const Tensor<T>& v,
                          const Tensor<T>& residual);

/// Largest factor <= requested that divides both sides (1 always does).
int effective_pool_factor(int requested, int64_t height, int64_t width);

template <typename T>
class AttentionBlock {
 public:
  explicit AttentionBlock(int pool_factor = 2);

  /// x [B,C,H,W] -> M x + x.
  Var<T> operator()(const Var<T>& x) const { return (*this)(x, x); }
  /// M x + residual, M taken from x.
  Var<T> operator()(const Var<T>& x, const Var<T>& residual) const;

  int pool_factor() const noexcept { return pool_factor_; }
  static constexpr int64_t parameter_count() { return 0; }

 private:
  int pool_factor_;
};

extern template class AttentionBlock<float>;
extern template class AttentionBlock<double>;

}  // namespace fdnet::attention
