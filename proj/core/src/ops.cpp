// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/ops.hpp"

#include <cmath>
#include <limits>

#include "blas.hpp"

namespace fdnet::ops {
namespace {

void require_rank(const Shape& s, int rank, const char* op) {
  if (static_cast<int>(s.size()) != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(s));
  }
}

template <typename T>
void im2col(const T* x, int64_t channels, int64_t h, int64_t w, int64_t kh, int64_t kw,
            const Conv2dArgs& a, int64_t ho, int64_t wo, T* col) {
  const int64_t plane = ho * wo;
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        T* dst = col + ((c * kh + ki) * kw + kj) * plane;
        for (int64_t oh = 0; oh < ho; ++oh) {
          const int64_t ih = oh * a.stride - a.padding + ki * a.dilation;
          T* row = dst + oh * wo;
          if (ih < 0 || ih >= h) {
            std::fill(row, row + wo, T{0});
            continue;
          }
          const T* src = x + (c * h + ih) * w;
          const int64_t off = kj * a.dilation - a.padding;
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t iw = ow * a.stride + off;
            row[ow] = (iw >= 0 && iw < w) ? src[iw] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int64_t channels, int64_t h, int64_t w, int64_t kh, int64_t kw,
            const Conv2dArgs& a, int64_t ho, int64_t wo, T* x) {
  const int64_t plane = ho * wo;
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const T* srcc = col + ((c * kh + ki) * kw + kj) * plane;
        for (int64_t oh = 0; oh < ho; ++oh) {
          const int64_t ih = oh * a.stride - a.padding + ki * a.dilation;
          if (ih < 0 || ih >= h) continue;
          const T* row = srcc + oh * wo;
          T* dst = x + (c * h + ih) * w;
          const int64_t off = kj * a.dilation - a.padding;
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t iw = ow * a.stride + off;
            if (iw >= 0 && iw < w) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

template <typename T>
T sigmoid(T z) {
  return z >= T{0} ? T{1} / (T{1} + std::exp(-z)) : std::exp(z) / (T{1} + std::exp(z));
}

// log(1 + exp(z)) without overflow.
template <typename T>
T softplus(T z) {
  return z > T{0} ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

int64_t conv_out_size(int64_t in, int64_t kernel, const Conv2dArgs& args) {
  const int64_t span = args.dilation * (kernel - 1) + 1;
  return (in + 2 * args.padding - span) / args.stride + 1;
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>* bias, Conv2dArgs args) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require_rank(xs, 4, "conv2d input");
  require_rank(ws, 4, "conv2d weight");
  if (args.stride < 1 || args.dilation < 1 || args.padding < 0) {
    throw ShapeError("conv2d: invalid stride/dilation/padding");
  }
  const int64_t batch = xs[0], cin = xs[1], h = xs[2], w = xs[3];
  const int64_t cout = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != cin) {
    throw ShapeError("conv2d: weight expects " + std::to_string(ws[1]) + " input channels, got " +
                     std::to_string(cin));
  }
  if (bias != nullptr && bias->value().numel() != cout) {
    throw ShapeError("conv2d: bias size must equal output channels");
  }
  const int64_t ho = conv_out_size(h, kh, args);
  const int64_t wo = conv_out_size(w, kw, args);
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: empty output for input " + shape_str(xs));

  const int64_t k = cin * kh * kw;
  const int64_t p = ho * wo;
  const bool pointwise = kh == 1 && kw == 1 && args.stride == 1 && args.padding == 0;

  Tensor<T> out({batch, cout, ho, wo});
  std::vector<T> col(pointwise ? 0 : static_cast<size_t>(k * p));
  const T* wd = weight.value().data();
  for (int64_t n = 0; n < batch; ++n) {
    const T* xn = x.value().data() + n * cin * h * w;
    const T* cols = xn;
    if (!pointwise) {
      im2col(xn, cin, h, w, kh, kw, args, ho, wo, col.data());
      cols = col.data();
    }
    T* yn = out.data() + n * cout * p;
    detail::gemm(false, false, static_cast<int>(cout), static_cast<int>(p), static_cast<int>(k),
                 T{1}, wd, static_cast<int>(k), cols, static_cast<int>(p), T{0}, yn,
                 static_cast<int>(p));
    if (bias != nullptr) {
      const T* bd = bias->value().data();
      for (int64_t c = 0; c < cout; ++c) {
        T* row = yn + c * p;
        for (int64_t i = 0; i < p; ++i) row[i] += bd[c];
      }
    }
  }

  std::vector<Var<T>> inputs{x, weight};
  if (bias != nullptr) inputs.push_back(*bias);
  return make_op_result<T>(
      std::move(out), std::move(inputs),
      [=](Node<T>& self) {
        auto& xn_node = *self.parents[0];
        auto& w_node = *self.parents[1];
        Node<T>* b_node = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        const T* gy = self.grad.data();
        std::vector<T> colbuf(pointwise ? 0 : static_cast<size_t>(k * p));
        std::vector<T> dcol(static_cast<size_t>(k * p));
        for (int64_t n = 0; n < batch; ++n) {
          const T* gyn = gy + n * cout * p;
          const T* xv = xn_node.value.data() + n * cin * h * w;
          if (w_node.requires_grad) {
            const T* cols = xv;
            if (!pointwise) {
              im2col(xv, cin, h, w, kh, kw, args, ho, wo, colbuf.data());
              cols = colbuf.data();
            }
            detail::gemm(false, true, static_cast<int>(cout), static_cast<int>(k),
                         static_cast<int>(p), T{1}, gyn, static_cast<int>(p), cols,
                         static_cast<int>(p), T{1}, w_node.grad_buffer().data(),
                         static_cast<int>(k));
          }
          if (b_node != nullptr && b_node->requires_grad) {
            T* gb = b_node->grad_buffer().data();
            for (int64_t c = 0; c < cout; ++c) {
              T acc{0};
              const T* row = gyn + c * p;
              for (int64_t i = 0; i < p; ++i) acc += row[i];
              gb[c] += acc;
            }
          }
          if (xn_node.requires_grad) {
            T* gx = xn_node.grad_buffer().data() + n * cin * h * w;
            if (pointwise) {
              detail::gemm(true, false, static_cast<int>(k), static_cast<int>(p),
                           static_cast<int>(cout), T{1}, w_node.value.data(),
                           static_cast<int>(k), gyn, static_cast<int>(p), T{1}, gx,
                           static_cast<int>(p));
            } else {
              detail::gemm(true, false, static_cast<int>(k), static_cast<int>(p),
                           static_cast<int>(cout), T{1}, w_node.value.data(),
                           static_cast<int>(k), gyn, static_cast<int>(p), T{0}, dcol.data(),
                           static_cast<int>(p));
              col2im(dcol.data(), cin, h, w, kh, kw, args, ho, wo, gx);
            }
          }
        }
      });
}

template <typename T>
Var<T> group_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, int groups, T eps) {
  const Shape& xs = x.shape();
  require_rank(xs, 4, "group_norm");
  const int64_t batch = xs[0], channels = xs[1], hw = xs[2] * xs[3];
  if (groups < 1 || channels % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(channels) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  if (gamma.value().numel() != channels || beta.value().numel() != channels) {
    throw ShapeError("group_norm: affine parameters must have one entry per channel");
  }
  const int64_t per_group = channels / groups;
  const int64_t count = per_group * hw;

  Tensor<T> out(xs);
  auto xhat = std::make_shared<Tensor<T>>(xs);
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(batch * groups));
  const T* xd = x.value().data();
  const T* gd = gamma.value().data();
  const T* bd = beta.value().data();
  for (int64_t n = 0; n < batch; ++n) {
    for (int64_t g = 0; g < groups; ++g) {
      const int64_t base = (n * channels + g * per_group) * hw;
      double mean = 0.0;
      for (int64_t i = 0; i < count; ++i) mean += xd[base + i];
      mean /= static_cast<double>(count);
      double var = 0.0;
      for (int64_t i = 0; i < count; ++i) {
        const double d = xd[base + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(count);
      const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*inv_std)[static_cast<size_t>(n * groups + g)] = istd;
      for (int64_t cc = 0; cc < per_group; ++cc) {
        const int64_t c = g * per_group + cc;
        for (int64_t i = 0; i < hw; ++i) {
          const int64_t idx = base + cc * hw + i;
          const T v = static_cast<T>((xd[idx] - mean) * istd);
          (*xhat)[idx] = v;
          out[idx] = gd[c] * v + bd[c];
        }
      }
    }
  }

  return make_op_result<T>(
      std::move(out), {x, gamma, beta},
      [=](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& gn = *self.parents[1];
        auto& bn = *self.parents[2];
        const T* gy = self.grad.data();
        const T* gam = gn.value.data();
        if (gn.requires_grad || bn.requires_grad) {
          T* dg = gn.requires_grad ? gn.grad_buffer().data() : nullptr;
          T* db = bn.requires_grad ? bn.grad_buffer().data() : nullptr;
          for (int64_t n = 0; n < batch; ++n) {
            for (int64_t c = 0; c < channels; ++c) {
              const int64_t base = (n * channels + c) * hw;
              double sg = 0.0, sb = 0.0;
              for (int64_t i = 0; i < hw; ++i) {
                sg += static_cast<double>(gy[base + i]) * (*xhat)[base + i];
                sb += gy[base + i];
              }
              if (dg) dg[c] += static_cast<T>(sg);
              if (db) db[c] += static_cast<T>(sb);
            }
          }
        }
        if (!xn.requires_grad) return;
        T* gx = xn.grad_buffer().data();
        for (int64_t n = 0; n < batch; ++n) {
          for (int64_t g = 0; g < groups; ++g) {
            const int64_t base = (n * channels + g * per_group) * hw;
            double sum_d = 0.0, sum_dx = 0.0;
            for (int64_t cc = 0; cc < per_group; ++cc) {
              const T gc = gam[g * per_group + cc];
              for (int64_t i = 0; i < hw; ++i) {
                const int64_t idx = base + cc * hw + i;
                const double d = static_cast<double>(gy[idx]) * gc;
                sum_d += d;
                sum_dx += d * (*xhat)[idx];
              }
            }
            const double istd = (*inv_std)[static_cast<size_t>(n * groups + g)];
            const double inv_count = 1.0 / static_cast<double>(count);
            for (int64_t cc = 0; cc < per_group; ++cc) {
              const T gc = gam[g * per_group + cc];
              for (int64_t i = 0; i < hw; ++i) {
                const int64_t idx = base + cc * hw + i;
                const double d = static_cast<double>(gy[idx]) * gc;
                gx[idx] += static_cast<T>(istd * (d - inv_count * sum_d -
                                                  (*xhat)[idx] * inv_count * sum_dx));
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> silu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T* xd = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = xd[i] * sigmoid(xd[i]);
  return make_op_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& xn = *self.parents[0];
    T* gx = xn.grad_buffer().data();
    const T* xv = xn.value.data();
    const T* gy = self.grad.data();
    for (int64_t i = 0; i < xn.value.numel(); ++i) {
      const T s = sigmoid(xv[i]);
      gx[i] += gy[i] * s * (T{1} + xv[i] * (T{1} - s));
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T* xd = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = xd[i] > T{0} ? xd[i] : T{0};
  return make_op_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& xn = *self.parents[0];
    T* gx = xn.grad_buffer().data();
    const T* xv = xn.value.data();
    const T* gy = self.grad.data();
    for (int64_t i = 0; i < xn.value.numel(); ++i) {
      if (xv[i] > T{0}) gx[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor<T> out = a.value();
  const T* bd = b.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += bd[i];
  return make_op_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const T* gy = self.grad.data();
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      T* g = parent->grad_buffer().data();
      for (int64_t i = 0; i < self.grad.numel(); ++i) g[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  return make_op_result<T>(std::move(out), {a}, [factor](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().data();
    const T* gy = self.grad.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i) g[i] += factor * gy[i];
  });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& first = parts.front().shape();
  require_rank(first, 4, "concat_channels");
  int64_t total = 0;
  for (const auto& part : parts) {
    const Shape& s = part.shape();
    require_rank(s, 4, "concat_channels");
    if (s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
      throw ShapeError("concat_channels: spatial/batch mismatch " + shape_str(first) + " vs " +
                       shape_str(s));
    }
    total += s[1];
  }
  const int64_t batch = first[0], hw = first[2] * first[3];
  Tensor<T> out({batch, total, first[2], first[3]});
  std::vector<int64_t> widths;
  for (const auto& part : parts) widths.push_back(part.shape()[1]);
  for (int64_t n = 0; n < batch; ++n) {
    int64_t offset = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      const int64_t len = widths[i] * hw;
      const T* src = parts[i].value().data() + n * len;
      std::copy(src, src + len, out.data() + (n * total + offset) * hw);
      offset += widths[i];
    }
  }
  return make_op_result<T>(std::move(out), parts, [=](Node<T>& self) {
    const T* gy = self.grad.data();
    for (int64_t n = 0; n < batch; ++n) {
      int64_t offset = 0;
      for (size_t i = 0; i < self.parents.size(); ++i) {
        auto& parent = *self.parents[i];
        const int64_t len = widths[i] * hw;
        if (parent.requires_grad) {
          T* g = parent.grad_buffer().data() + n * len;
          const T* src = gy + (n * total + offset) * hw;
          for (int64_t j = 0; j < len; ++j) g[j] += src[j];
        }
        offset += widths[i];
      }
    }
  });
}

namespace {

struct LinearTaps {
  std::vector<int64_t> lo, hi;
  std::vector<double> frac;
};

LinearTaps half_pixel_taps(int64_t in, int64_t out) {
  LinearTaps taps;
  taps.lo.resize(static_cast<size_t>(out));
  taps.hi.resize(static_cast<size_t>(out));
  taps.frac.resize(static_cast<size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int64_t lo = static_cast<int64_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int64_t hi = std::min(lo + 1, in - 1);
    taps.lo[static_cast<size_t>(o)] = lo;
    taps.hi[static_cast<size_t>(o)] = hi;
    taps.frac[static_cast<size_t>(o)] = src - static_cast<double>(lo);
  }
  return taps;
}

}  // namespace

template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int64_t out_h, int64_t out_w) {
  const Shape& xs = x.shape();
  require_rank(xs, 4, "upsample_bilinear");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("upsample_bilinear: empty target");
  const int64_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  if (h == out_h && w == out_w) return x;
  auto ty = std::make_shared<LinearTaps>(half_pixel_taps(h, out_h));
  auto tx = std::make_shared<LinearTaps>(half_pixel_taps(w, out_w));
  Tensor<T> out({xs[0], xs[1], out_h, out_w});
  for (int64_t pl = 0; pl < planes; ++pl) {
    const T* src = x.value().data() + pl * h * w;
    T* dst = out.data() + pl * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const auto yi = static_cast<size_t>(oy);
      const T fy = static_cast<T>(ty->frac[yi]);
      const T* r0 = src + ty->lo[yi] * w;
      const T* r1 = src + ty->hi[yi] * w;
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const auto xi = static_cast<size_t>(ox);
        const T fx = static_cast<T>(tx->frac[xi]);
        const int64_t x0 = tx->lo[xi], x1 = tx->hi[xi];
        const T top = r0[x0] + fx * (r0[x1] - r0[x0]);
        const T bot = r1[x0] + fx * (r1[x1] - r1[x0]);
        dst[oy * out_w + ox] = top + fy * (bot - top);
      }
    }
  }
  return make_op_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    T* gx = self.parents[0]->grad_buffer().data();
    const T* gy = self.grad.data();
    for (int64_t pl = 0; pl < planes; ++pl) {
      T* g = gx + pl * h * w;
      const T* go = gy + pl * out_h * out_w;
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const auto yi = static_cast<size_t>(oy);
        const T fy = static_cast<T>(ty->frac[yi]);
        T* r0 = g + ty->lo[yi] * w;
        T* r1 = g + ty->hi[yi] * w;
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const auto xi = static_cast<size_t>(ox);
          const T fx = static_cast<T>(tx->frac[xi]);
          const T v = go[oy * out_w + ox];
          const int64_t x0 = tx->lo[xi], x1 = tx->hi[xi];
          r0[x0] += v * (T{1} - fy) * (T{1} - fx);
          r0[x1] += v * (T{1} - fy) * fx;
          r1[x0] += v * fy * (T{1} - fx);
          r1[x1] += v * fy * fx;
        }
      }
    }
  });
}

template <typename T>
Var<T> avg_pool(const Var<T>& x, int factor) {
  const Shape& xs = x.shape();
  require_rank(xs, 4, "avg_pool");
  if (factor < 1 || xs[2] % factor != 0 || xs[3] % factor != 0) {
    throw ShapeError("avg_pool: factor " + std::to_string(factor) + " does not divide " +
                     shape_str(xs));
  }
  if (factor == 1) return x;
  const int64_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const int64_t oh = h / factor, ow = w / factor;
  const T norm = T{1} / static_cast<T>(factor * factor);
  Tensor<T> out({xs[0], xs[1], oh, ow});
  for (int64_t pl = 0; pl < planes; ++pl) {
    const T* src = x.value().data() + pl * h * w;
    T* dst = out.data() + pl * oh * ow;
    for (int64_t i = 0; i < h; ++i) {
      for (int64_t j = 0; j < w; ++j) dst[(i / factor) * ow + j / factor] += src[i * w + j];
    }
    for (int64_t i = 0; i < oh * ow; ++i) dst[i] *= norm;
  }
  return make_op_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    T* gx = self.parents[0]->grad_buffer().data();
    const T* gy = self.grad.data();
    for (int64_t pl = 0; pl < planes; ++pl) {
      for (int64_t i = 0; i < h; ++i) {
        for (int64_t j = 0; j < w; ++j) {
          gx[pl * h * w + i * w + j] += norm * gy[pl * oh * ow + (i / factor) * ow + j / factor];
        }
      }
    }
  });
}

template <typename T>
Var<T> max_pool(const Var<T>& x, int kernel, int stride, int padding) {
  const Shape& xs = x.shape();
  require_rank(xs, 4, "max_pool");
  const int64_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const Conv2dArgs geom{stride, padding, 1};
  const int64_t oh = conv_out_size(h, kernel, geom), ow = conv_out_size(w, kernel, geom);
  if (oh <= 0 || ow <= 0) throw ShapeError("max_pool: empty output");
  Tensor<T> out({xs[0], xs[1], oh, ow});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.numel()));
  for (int64_t pl = 0; pl < planes; ++pl) {
    const T* src = x.value().data() + pl * h * w;
    for (int64_t i = 0; i < oh; ++i) {
      for (int64_t j = 0; j < ow; ++j) {
        T best = -std::numeric_limits<T>::infinity();
        int64_t best_idx = -1;
        for (int64_t ki = 0; ki < kernel; ++ki) {
          const int64_t ih = i * stride - padding + ki;
          if (ih < 0 || ih >= h) continue;
          for (int64_t kj = 0; kj < kernel; ++kj) {
            const int64_t iw = j * stride - padding + kj;
            if (iw < 0 || iw >= w) continue;
            if (src[ih * w + iw] > best || best_idx < 0) {
              best = src[ih * w + iw];
              best_idx = ih * w + iw;
            }
          }
        }
        const int64_t o = pl * oh * ow + i * ow + j;
        out[o] = best;
        (*argmax)[static_cast<size_t>(o)] = pl * h * w + best_idx;
      }
    }
  }
  return make_op_result<T>(std::move(out), {x}, [argmax](Node<T>& self) {
    T* gx = self.parents[0]->grad_buffer().data();
    for (int64_t o = 0; o < self.grad.numel(); ++o) {
      gx[(*argmax)[static_cast<size_t>(o)]] += self.grad[o];
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_op_result<T>(std::move(out), {x}, [](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().data();
    for (int64_t i = 0; i < self.grad.numel(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Var<T> batched_matmul(const Var<T>& a, const Var<T>& b, bool transpose_a, bool transpose_b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require_rank(as, 3, "batched_matmul lhs");
  require_rank(bs, 3, "batched_matmul rhs");
  if (as[0] != bs[0]) throw ShapeError("batched_matmul: batch mismatch");
  const int64_t batch = as[0];
  const int64_t m = transpose_a ? as[2] : as[1];
  const int64_t ka = transpose_a ? as[1] : as[2];
  const int64_t kb = transpose_b ? bs[2] : bs[1];
  const int64_t n = transpose_b ? bs[1] : bs[2];
  if (ka != kb) {
    throw ShapeError("batched_matmul: inner dimensions differ (" + std::to_string(ka) + " vs " +
                     std::to_string(kb) + ")");
  }
  const int64_t k = ka;
  const int lda = static_cast<int>(as[2]);
  const int ldb = static_cast<int>(bs[2]);
  Tensor<T> out({batch, m, n});
  for (int64_t i = 0; i < batch; ++i) {
    detail::gemm(transpose_a, transpose_b, static_cast<int>(m), static_cast<int>(n),
                 static_cast<int>(k), T{1}, a.value().data() + i * as[1] * as[2], lda,
                 b.value().data() + i * bs[1] * bs[2], ldb, T{0}, out.data() + i * m * n,
                 static_cast<int>(n));
  }
  return make_op_result<T>(std::move(out), {a, b}, [=](Node<T>& self) {
    auto& an = *self.parents[0];
    auto& bn = *self.parents[1];
    for (int64_t i = 0; i < batch; ++i) {
      const T* gc = self.grad.data() + i * m * n;
      const T* av = an.value.data() + i * as[1] * as[2];
      const T* bv = bn.value.data() + i * bs[1] * bs[2];
      if (an.requires_grad) {
        T* ga = an.grad_buffer().data() + i * as[1] * as[2];
        if (!transpose_a) {
          detail::gemm(false, !transpose_b, static_cast<int>(m), static_cast<int>(k),
                       static_cast<int>(n), T{1}, gc, static_cast<int>(n), bv, ldb, T{1}, ga,
                       lda);
        } else {
          detail::gemm(transpose_b, true, static_cast<int>(k), static_cast<int>(m),
                       static_cast<int>(n), T{1}, bv, ldb, gc, static_cast<int>(n), T{1}, ga,
                       lda);
        }
      }
      if (bn.requires_grad) {
        T* gb = bn.grad_buffer().data() + i * bs[1] * bs[2];
        if (!transpose_b) {
          detail::gemm(!transpose_a, false, static_cast<int>(k), static_cast<int>(n),
                       static_cast<int>(m), T{1}, av, lda, gc, static_cast<int>(n), T{1}, gb,
                       ldb);
        } else {
          detail::gemm(true, transpose_a, static_cast<int>(n), static_cast<int>(k),
                       static_cast<int>(m), T{1}, gc, static_cast<int>(n), av, lda, T{1}, gb,
                       ldb);
        }
      }
    }
  });
}

template <typename T>
Var<T> softmax_last(const Var<T>& x) {
  const Shape& xs = x.shape();
  if (xs.empty()) throw ShapeError("softmax_last: scalar input");
  const int64_t len = xs.back();
  const int64_t rows = len == 0 ? 0 : x.value().numel() / len;
  Tensor<T> out(xs);
  for (int64_t r = 0; r < rows; ++r) {
    const T* src = x.value().data() + r * len;
    T* dst = out.data() + r * len;
    T mx = src[0];
    for (int64_t j = 1; j < len; ++j) mx = std::max(mx, src[j]);
    if (!std::isfinite(mx)) throw NumericsError("softmax_last: non-finite logits");
    double total = 0.0;
    for (int64_t j = 0; j < len; ++j) {
      dst[j] = std::exp(src[j] - mx);
      total += dst[j];
    }
    const T inv = static_cast<T>(1.0 / total);
    for (int64_t j = 0; j < len; ++j) dst[j] *= inv;
  }
  return make_op_result<T>(std::move(out), {x}, [rows, len](Node<T>& self) {
    T* gx = self.parents[0]->grad_buffer().data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* y = self.value.data() + r * len;
      const T* gy = self.grad.data() + r * len;
      double dot = 0.0;
      for (int64_t j = 0; j < len; ++j) dot += static_cast<double>(gy[j]) * y[j];
      for (int64_t j = 0; j < len; ++j) {
        gx[r * len + j] += y[j] * static_cast<T>(gy[j] - dot);
      }
    }
  });
}

template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& target, T eps) {
  if (logits.value().numel() != target.numel()) {
    throw ShapeError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  const int64_t count = target.numel();
  if (count == 0) throw ShapeError("bce_with_logits: empty map");
  const T* z = logits.value().data();
  const double log_eps = std::log(static_cast<double>(eps));
  const double log_1m_eps = std::log1p(-static_cast<double>(eps));
  double total = 0.0;
  for (int64_t i = 0; i < count; ++i) {
    const double zi = z[i];
    if (!std::isfinite(zi)) throw NumericsError("bce_with_logits: non-finite logit");
    const double p = sigmoid(zi);
    double log_p, log_q;
    if (p < eps) {
      log_p = log_eps;
      log_q = log_1m_eps;
    } else if (p > 1.0 - eps) {
      log_p = log_1m_eps;
      log_q = log_eps;
    } else {
      log_p = -softplus(-zi);
      log_q = -softplus(zi);
    }
    const double y = target[i];
    total -= y * log_p + (1.0 - y) * log_q;
  }
  Tensor<T> out({1}, static_cast<T>(total / static_cast<double>(count)));
  auto tgt = std::make_shared<Tensor<T>>(target);
  return make_op_result<T>(std::move(out), {logits}, [tgt, eps, count](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().data();
    const T* zv = self.parents[0]->value.data();
    const T scale_factor = self.grad[0] / static_cast<T>(count);
    for (int64_t i = 0; i < count; ++i) {
      const T p = sigmoid(zv[i]);
      if (p < eps || p > T{1} - eps) continue;
      g[i] += scale_factor * (p - (*tgt)[i]);
    }
  });
}

template <typename T>
Var<T> sum_scalars(const std::vector<Var<T>>& terms) {
  double total = 0.0;
  for (const auto& t : terms) {
    if (t.value().numel() != 1) throw ShapeError("sum_scalars: non-scalar term");
    total += t.value()[0];
  }
  return make_op_result<T>(Tensor<T>({1}, static_cast<T>(total)), terms, [](Node<T>& self) {
    for (auto& parent : self.parents) {
      if (parent->requires_grad) parent->grad_buffer()[0] += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> roll_spatial(const Tensor<T>& x, int64_t dy, int64_t dx) {
  require_rank(x.shape(), 4, "roll_spatial");
  const int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> out(x.shape());
  for (int64_t pl = 0; pl < planes; ++pl) {
    for (int64_t i = 0; i < h; ++i) {
      const int64_t ti = ((i + dy) % h + h) % h;
      for (int64_t j = 0; j < w; ++j) {
        const int64_t tj = ((j + dx) % w + w) % w;
        out[pl * h * w + ti * w + tj] = x[pl * h * w + i * w + j];
      }
    }
  }
  return out;
}

#define FDNET_INSTANTIATE_OPS(T)                                                              \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>*, Conv2dArgs);         \
  template Var<T> group_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, T);         \
  template Var<T> silu<T>(const Var<T>&);                                                     \
  template Var<T> relu<T>(const Var<T>&);                                                     \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> scale<T>(const Var<T>&, T);                                                 \
  template Var<T> concat_channels<T>(const std::vector<Var<T>>&);                             \
  template Var<T> upsample_bilinear<T>(const Var<T>&, int64_t, int64_t);                      \
  template Var<T> avg_pool<T>(const Var<T>&, int);                                            \
  template Var<T> max_pool<T>(const Var<T>&, int, int, int);                                  \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                           \
  template Var<T> batched_matmul<T>(const Var<T>&, const Var<T>&, bool, bool);                \
  template Var<T> softmax_last<T>(const Var<T>&);                                             \
  template Var<T> bce_with_logits<T>(const Var<T>&, const Tensor<T>&, T);                     \
  template Var<T> sum_scalars<T>(const std::vector<Var<T>>&);                                 \
  template Tensor<T> roll_spatial<T>(const Tensor<T>&, int64_t, int64_t);

FDNET_INSTANTIATE_OPS(float)
FDNET_INSTANTIATE_OPS(double)

#undef FDNET_INSTANTIATE_OPS

}  // namespace fdnet::ops
