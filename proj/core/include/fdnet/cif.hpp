// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <array>
#include <string>

#include "fdnet/nn.hpp"

namespace fdnet::cif {

inline constexpr std::array<int, 3> kAtrousRates{3, 5, 7};

template <typename T>
struct CifOutput {
  Var<T> fused;          // [B,Cf,h,w]
  Var<T> coarse_logits;  // [B,1,h,w]
  Var<T> refined;        // [B,Cf,h,w]
};

/// Contextual information fusion for one pyramid level.
///
/// The deeper level's fused map (if any) is upsampled x2 and concatenated
/// with the backbone feature; three 3x3 atrous branches (rates 3/5/7,
/// group norm, SiLU) are concatenated and projected 1x1 to `width`
/// channels. A 1x1 head gives the coarse logits, and a 3x3 conv over
/// [fused, coarse] gives the refined feature.
template <typename T>
class ContextFusion {
 public:
  ContextFusion(ParameterStore<T>& store, const std::string& name, int64_t level_channels,
                int64_t width, bool takes_deeper, Rng& rng);

  Var<T> fuse_context(const Var<T>& level_feature, const Var<T>* deeper_context) const;
  Var<T> coarse_predict(const Var<T>& fused) const;
  Var<T> refine_concat(const Var<T>& fused, const Var<T>& coarse_logits) const;

  CifOutput<T> operator()(const Var<T>& level_feature, const Var<T>* deeper_context) const;

  int64_t width() const noexcept { return width_; }
  bool takes_deeper() const noexcept { return takes_deeper_; }
  const Conv2d<T>& branch_conv(size_t i) const { return branches_.at(i).conv(); }
  const Conv2d<T>& projection() const noexcept { return project_; }
  const Conv2d<T>& coarse_head() const noexcept { return coarse_head_; }
  const Conv2d<T>& refine_conv() const noexcept { return refine_; }

 private:
  int64_t level_channels_;
  int64_t width_;
  bool takes_deeper_;
  std::array<ConvNormAct<T>, 3> branches_;
  Conv2d<T> project_;
  Conv2d<T> coarse_head_;
  Conv2d<T> refine_;
};

extern template class ContextFusion<float>;
extern template class ContextFusion<double>;

}  // namespace fdnet::cif
