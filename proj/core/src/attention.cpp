// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/attention.hpp"

#include <cmath>

#include "fdnet/ops.hpp"

namespace fdnet::attention {
namespace {

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) throw NumericsError(std::string(what) + ": non-finite input");
  }
}

// x [B,C,H,W] -> M [B,C,C]
template <typename T>
Var<T> attention_map(const Var<T>& x, int pool_factor) {
  const Shape& s = x.shape();
  Var<T> pooled = ops::avg_pool(x, pool_factor);
  const int64_t span = pooled.dim(2) * pooled.dim(3);
  Var<T> keys = ops::reshape(pooled, {s[0], s[1], span});
  Var<T> logits = ops::batched_matmul(keys, keys, false, true);
  return ops::softmax_last(logits);
}

}  // namespace

template <typename T>
QkvBundle<T> build_qkv(const Tensor<T>& feature, int pool_factor) {
  if (feature.rank() != 3) throw ShapeError("build_qkv expects [C,H,W]");
  const int64_t c = feature.dim(0), h = feature.dim(1), w = feature.dim(2);
  if (pool_factor < 1 || h % pool_factor != 0 || w % pool_factor != 0) {
    throw ShapeError("build_qkv: pool factor " + std::to_string(pool_factor) +
                     " does not divide " + shape_str(feature.shape()));
  }
  NoGradGuard no_grad;
  Var<T> x(feature.reshaped({1, c, h, w}));
  Var<T> pooled = ops::avg_pool(x, pool_factor);
  const int64_t span = pooled.dim(2) * pooled.dim(3);
  QkvBundle<T> bundle;
  bundle.q = pooled.value().reshaped({c, span});
  bundle.k = bundle.q;
  bundle.v = feature.reshaped({c, h * w});
  return bundle;
}

template <typename T>
AttentionMap<T> channel_attention(const Tensor<T>& q, const Tensor<T>& k) {
  if (q.rank() != 2 || k.rank() != 2 || q.shape() != k.shape()) {
    throw ShapeError("channel_attention: q " + shape_str(q.shape()) + " and k " +
                     shape_str(k.shape()) + " must both be [C,s]");
  }
  require_finite(q, "channel_attention");
  require_finite(k, "channel_attention");
  NoGradGuard no_grad;
  const int64_t c = q.dim(0), span = q.dim(1);
  Var<T> kv(k.reshaped({1, c, span}));
  Var<T> qv(q.reshaped({1, c, span}));
  Var<T> m = ops::softmax_last(ops::batched_matmul(kv, qv, false, true));
  return {m.value().reshaped({c, c})};
}

template <typename T>
Tensor<T> apply_attention(const AttentionMap<T>& map, const Tensor<T>& v,
                          const Tensor<T>& residual) {
  const Tensor<T>& m = map.m;
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw ShapeError("attention map must be [C,C]");
  if (v.rank() != 2 || v.dim(0) != m.dim(0)) {
    throw ShapeError("apply_attention: v " + shape_str(v.shape()) + " vs map " +
                     shape_str(m.shape()));
  }
  if (residual.rank() != 3 || residual.dim(0) != m.dim(0) ||
      residual.dim(1) * residual.dim(2) != v.dim(1)) {
    throw ShapeError("apply_attention: residual " + shape_str(residual.shape()) +
                     " incompatible with v " + shape_str(v.shape()));
  }
  NoGradGuard no_grad;
  const int64_t c = m.dim(0), n = v.dim(1);
  Var<T> mixed = ops::batched_matmul(Var<T>(m.reshaped({1, c, c})), Var<T>(v.reshaped({1, c, n})),
                                     false, false);
  Var<T> out = ops::add(ops::reshape(mixed, residual.shape()), Var<T>(residual));
  return out.value();
}

int effective_pool_factor(int requested, int64_t height, int64_t width) {
  for (int f = std::max(requested, 1); f > 1; --f) {
    if (height % f == 0 && width % f == 0) return f;
  }
  return 1;
}

template <typename T>
AttentionBlock<T>::AttentionBlock(int pool_factor) : pool_factor_(pool_factor) {
  if (pool_factor < 1) throw ConfigError("attention pool_factor must be >= 1");
}

template <typename T>
Var<T> AttentionBlock<T>::operator()(const Var<T>& x, const Var<T>& residual) const {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("attention block expects [B,C,H,W], got " + shape_str(s));
  if (residual.shape() != s) {
    throw ShapeError("attention residual " + shape_str(residual.shape()) + " does not match " +
                     shape_str(s));
  }
  const int pf = effective_pool_factor(pool_factor_, s[2], s[3]);
  Var<T> m = attention_map(x, pf);
  Var<T> values = ops::reshape(x, {s[0], s[1], s[2] * s[3]});
  Var<T> mixed = ops::reshape(ops::batched_matmul(m, values, false, false), s);
  return ops::add(mixed, residual);
}

template QkvBundle<float> build_qkv<float>(const Tensor<float>&, int);
template QkvBundle<double> build_qkv<double>(const Tensor<double>&, int);
template AttentionMap<float> channel_attention<float>(const Tensor<float>&, const Tensor<float>&);
template AttentionMap<double> channel_attention<double>(const Tensor<double>&,
                                                        const Tensor<double>&);
template Tensor<float> apply_attention<float>(const AttentionMap<float>&, const Tensor<float>&,
                                              const Tensor<float>&);
template Tensor<double> apply_attention<double>(const AttentionMap<double>&,
                                                const Tensor<double>&, const Tensor<double>&);
template class AttentionBlock<float>;
template class AttentionBlock<double>;

}  // namespace fdnet::attention
