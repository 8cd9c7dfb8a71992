// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/cif.hpp"

namespace fdnet::cif {
namespace {

template <typename T>
ConvNormAct<T> make_branch(ParameterStore<T>& store, const std::string& name, int64_t in,
                           int64_t out, int rate, Rng& rng) {
  return ConvNormAct<T>(store, name + ".atrous" + std::to_string(rate), in, out, 3,
                        ops::Conv2dArgs{1, rate, rate}, rng);
}

}  // namespace

template <typename T>
ContextFusion<T>::ContextFusion(ParameterStore<T>& store, const std::string& name,
                                int64_t level_channels, int64_t width, bool takes_deeper,
                                Rng& rng)
    : level_channels_(level_channels),
      width_(width),
      takes_deeper_(takes_deeper),
      branches_{make_branch(store, name, level_channels + (takes_deeper ? width : 0), width,
                            kAtrousRates[0], rng),
                make_branch(store, name, level_channels + (takes_deeper ? width : 0), width,
                            kAtrousRates[1], rng),
                make_branch(store, name, level_channels + (takes_deeper ? width : 0), width,
                            kAtrousRates[2], rng)},
      project_(store, name + ".project", 3 * width, width, 1, {}, true, rng),
      coarse_head_(store, name + ".coarse_head", width, 1, 1, {}, true, rng, kHeadInitGain),
      refine_(store, name + ".refine", width + 1, width, 3, {1, 1, 1}, true, rng) {
  if (width < 1) throw ConfigError("cif width must be positive");
}

template <typename T>
Var<T> ContextFusion<T>::fuse_context(const Var<T>& level_feature,
                                      const Var<T>* deeper_context) const {
  const Shape& s = level_feature.shape();
  if (s.size() != 4 || s[1] != level_channels_) {
    throw ShapeError("fuse_context: expected " + std::to_string(level_channels_) +
                     " level channels, got " + shape_str(s));
  }
  if ((deeper_context != nullptr) != takes_deeper_) {
    throw ShapeError(takes_deeper_ ? "fuse_context: deeper context required at this level"
                                   : "fuse_context: deepest level takes no deeper context");
  }
  Var<T> input = level_feature;
  if (deeper_context != nullptr) {
    const Shape& d = deeper_context->shape();
    if (d.size() != 4 || d[0] != s[0] || d[1] != width_ || 2 * d[2] != s[2] ||
        2 * d[3] != s[3]) {
      throw ShapeError("fuse_context: deeper context " + shape_str(d) +
                       " does not upsample x2 onto " + shape_str(s));
    }
    Var<T> up = ops::upsample_bilinear(*deeper_context, s[2], s[3]);
    input = ops::concat_channels<T>({up, level_feature});
  }
  std::vector<Var<T>> outs;
  outs.reserve(branches_.size());
  for (const auto& branch : branches_) outs.push_back(branch(input));
  return project_(ops::concat_channels(outs));
}

template <typename T>
Var<T> ContextFusion<T>::coarse_predict(const Var<T>& fused) const {
  return coarse_head_(fused);
}

template <typename T>
Var<T> ContextFusion<T>::refine_concat(const Var<T>& fused, const Var<T>& coarse_logits) const {
  const Shape& f = fused.shape();
  const Shape& c = coarse_logits.shape();
  if (f.size() != 4 || c.size() != 4 || f[0] != c[0] || f[2] != c[2] || f[3] != c[3] ||
      c[1] != 1) {
    throw ShapeError("refine_concat: fused " + shape_str(f) + " and coarse " + shape_str(c) +
                     " are not aligned");
  }
  return refine_(ops::concat_channels<T>({fused, coarse_logits}));
}

template <typename T>
CifOutput<T> ContextFusion<T>::operator()(const Var<T>& level_feature,
                                          const Var<T>* deeper_context) const {
  CifOutput<T> out;
  out.fused = fuse_context(level_feature, deeper_context);
  out.coarse_logits = coarse_predict(out.fused);
  out.refined = refine_concat(out.fused, out.coarse_logits);
  return out;
}

template class ContextFusion<float>;
template class ContextFusion<double>;

}  // namespace fdnet::cif
