// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/model.hpp"

#include <cmath>

#include "fdnet/checkpoint.hpp"

namespace fdnet {

void ModelConfig::validate() const {
  if (backbone::standard_channel_dims(backbone.variant) != backbone.channel_dims) {
    throw ConfigError("backbone channel_dims inconsistent with variant " + backbone.variant);
  }
  if (cif_width < 1) throw ConfigError("cif_width must be >= 1");
  if (pool_factor < 1) throw ConfigError("pool_factor must be >= 1");
  if (!(ftb_cutoff >= 0.0 && ftb_cutoff <= 1.0)) throw ConfigError("ftb.cutoff must lie in [0,1]");
  if (output_level < 3 || output_level > 5) throw ConfigError("output_level must be 3, 4 or 5");
}

const std::vector<AblationSetting>& ablation_settings() {
  static const std::vector<AblationSetting> rows{
      {"No.1", false, false, false},
      {"No.2", true, false, false},
      {"No.3", true, true, false},
      {"No.4", true, false, true},
      {"Ours", true, true, true},
  };
  return rows;
}

ModelConfig apply_ablation(ModelConfig base, const AblationSetting& row) {
  base.enable_cif = row.enable_cif;
  base.enable_ab = row.enable_ab;
  base.enable_ftb = row.enable_ftb;
  return base;
}

template <typename T>
FdNet<T>::FdNet(ModelConfig config, uint64_t seed)
    : config_(std::move(config)),
      store_(std::make_unique<ParameterStore<T>>()),
      attention_(config_.pool_factor),
      ftb_(config_.ftb_cutoff) {
  config_.validate();
  Rng rng(seed);
  backbone_ = std::make_unique<backbone::Backbone<T>>(config_.backbone, *store_, rng);
  const auto dims = config_.backbone.channel_dims;
  const int64_t width = config_.cif_width;
  levels_.resize(kPyramidLevels.size(), LevelHeads{std::nullopt, std::nullopt, std::nullopt, {}});
  // Deepest level first so parameter order follows the top-down data flow.
  for (int idx = 2; idx >= 0; --idx) {
    const int k = kPyramidLevels[static_cast<size_t>(idx)];
    auto& lvl = levels_[static_cast<size_t>(idx)];
    const int64_t ck = dims[static_cast<size_t>(idx)];
    if (config_.enable_cif) {
      lvl.cif.emplace(*store_, "cif" + std::to_string(k), ck, width, k != 5, rng);
    } else {
      lvl.projection.emplace(*store_, "proj" + std::to_string(k), ck, width, 1,
                             ops::Conv2dArgs{}, true, rng);
      lvl.coarse_head.emplace(*store_, "coarse_head" + std::to_string(k), width, 1, 1,
                              ops::Conv2dArgs{}, true, rng, kHeadInitGain);
    }
    lvl.final_head = Conv2d<T>(*store_, "final_head" + std::to_string(k), width, 1, 1,
                               ops::Conv2dArgs{}, true, rng, kHeadInitGain);
  }
  if (config_.backbone.pretrained_weights) {
    const auto& path = *config_.backbone.pretrained_weights;
    Checkpoint ckpt;
    try {
      ckpt = load_checkpoint(path);
    } catch (const IOError& e) {
      throw WeightLoadError(std::string("cannot load backbone weights: ") + e.what());
    }
    restore_parameters(*store_, ckpt.parameters, "backbone.");
  }
}

template <typename T>
PredictionSet<T> FdNet<T>::forward(const Var<T>& images) const {
  const auto pyr = backbone_->extract_features(images);
  PredictionSet<T> out;
  out.input_height = pyr.input_height;
  out.input_width = pyr.input_width;
  const int64_t h = pyr.input_height, w = pyr.input_width;

  Var<T> deeper;
  for (int idx = 2; idx >= 0; --idx) {
    const int k = kPyramidLevels[static_cast<size_t>(idx)];
    const auto& lvl = levels_[static_cast<size_t>(idx)];
    const Var<T>& feature = pyr.level(k);
    Var<T> coarse, z;
    if (lvl.cif) {
      auto res = (*lvl.cif)(feature, deeper.defined() ? &deeper : nullptr);
      deeper = res.fused;
      coarse = res.coarse_logits;
      z = res.refined;
    } else {
      z = (*lvl.projection)(feature);
      coarse = (*lvl.coarse_head)(z);
    }
    // The second attention pass adds back the pre-attention feature. The
    // high-passed input has zero mean per channel, so using it as its own
    // residual would pin every mean logit to the head bias.
    const Var<T> refined = z;
    if (config_.enable_ab) z = attention_(z);
    if (config_.enable_ftb) z = ftb_(z);
    if (config_.enable_ab) z = attention_(z, refined);
    Var<T> fin = lvl.final_head(z);
    out.coarse[static_cast<size_t>(idx)] = ops::upsample_bilinear(coarse, h, w);
    out.final[static_cast<size_t>(idx)] = ops::upsample_bilinear(fin, h, w);
  }
  return out;
}

template <typename T>
Tensor<uint8_t> FdNet<T>::predict_mask(const Tensor<T>& images, double threshold) const {
  NoGradGuard no_grad;
  const auto preds = forward(Var<T>(images));
  return mask_from_logits(preds.final_at(config_.output_level).value(), threshold);
}

template <typename T>
std::vector<std::string> FdNet<T>::describe() const {
  std::vector<std::string> out;
  for (int idx = 0; idx < 3; ++idx) {
    const int k = kPyramidLevels[static_cast<size_t>(idx)];
    std::string chain = "k" + std::to_string(k) + ": f" + std::to_string(k);
    chain += config_.enable_cif ? (k == 5 ? " -> cif" : " -> cif(+k" + std::to_string(k + 1) + ")")
                                : " -> proj1x1";
    if (config_.enable_ab) chain += " -> ab";
    if (config_.enable_ftb) chain += " -> ftb";
    if (config_.enable_ab) chain += " -> ab";
    chain += " -> head";
    out.push_back(std::move(chain));
  }
  return out;
}

template <typename T>
Tensor<uint8_t> mask_from_logits(const Tensor<T>& logits, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  Shape shape = logits.shape();
  if (shape.size() == 4) shape = {shape[0], shape[2], shape[3]};
  Tensor<uint8_t> mask(shape);
  // sigmoid(z) > t  <=>  z > logit(t); compare in probability space so the
  // boundary convention matches the statement exactly.
  for (int64_t i = 0; i < logits.numel(); ++i) {
    const double z = logits[i];
    const double p = 1.0 / (1.0 + std::exp(-z));
    mask[i] = p > threshold ? 1 : 0;
  }
  return mask;
}

template <typename T>
Tensor<T> replicate_gray(const Tensor<T>& gray) {
  if (gray.rank() != 4 || gray.dim(1) != 1) throw ShapeError("replicate_gray expects [B,1,H,W]");
  const int64_t b = gray.dim(0), hw = gray.dim(2) * gray.dim(3);
  Tensor<T> out({b, 3, gray.dim(2), gray.dim(3)});
  for (int64_t n = 0; n < b; ++n) {
    for (int c = 0; c < 3; ++c) {
      std::copy(gray.data() + n * hw, gray.data() + (n + 1) * hw, out.data() + (n * 3 + c) * hw);
    }
  }
  return out;
}

template class FdNet<float>;
template class FdNet<double>;
template Tensor<uint8_t> mask_from_logits<float>(const Tensor<float>&, double);
template Tensor<uint8_t> mask_from_logits<double>(const Tensor<double>&, double);
template Tensor<float> replicate_gray<float>(const Tensor<float>&);
template Tensor<double> replicate_gray<double>(const Tensor<double>&);

}  // namespace fdnet
