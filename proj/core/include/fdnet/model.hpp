// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fdnet/attention.hpp"
#include "fdnet/backbone.hpp"
#include "fdnet/cif.hpp"
#include "fdnet/ftb.hpp"

namespace fdnet {

inline constexpr std::array<int, 3> kPyramidLevels{3, 4, 5};

struct ModelConfig {
  backbone::BackboneConfig backbone;
  int64_t cif_width = 64;
  int pool_factor = 2;
  double ftb_cutoff = 0.1;
  bool enable_cif = true;
  bool enable_ab = true;
  bool enable_ftb = true;
  /// Pyramid level whose final map is used for mask inference.
  int output_level = 3;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// One row of the component ablation.
struct AblationSetting {
  std::string name;
  bool enable_cif;
  bool enable_ab;
  bool enable_ftb;
};

/// No.1 backbone only, No.2 +CIF, No.3 +CIF+AB, No.4 +CIF+FTB, Ours all.
const std::vector<AblationSetting>& ablation_settings();

ModelConfig apply_ablation(ModelConfig base, const AblationSetting& row);

/// Six logit maps, all at input resolution, indexed by level 3..5.
template <typename T>
struct PredictionSet {
  std::array<Var<T>, 3> coarse;
  std::array<Var<T>, 3> final;
  int64_t input_height = 0;
  int64_t input_width = 0;

  const Var<T>& coarse_at(int k) const { return coarse.at(static_cast<size_t>(k - 3)); }
  const Var<T>& final_at(int k) const { return final.at(static_cast<size_t>(k - 3)); }
};

/// Backbone -> CIF (top-down 5->4->3) -> AB -> FTB -> AB -> 1x1 heads.
/// Disabled blocks become identities; with CIF off a 1x1 projection maps
/// each backbone level to cif_width channels.
template <typename T>
class FdNet {
 public:
  FdNet(ModelConfig config, uint64_t seed);
  FdNet(const FdNet&) = delete;
  FdNet& operator=(const FdNet&) = delete;
  FdNet(FdNet&&) noexcept = default;
  FdNet& operator=(FdNet&&) noexcept = default;

  /// images [B,3,H,W].
  PredictionSet<T> forward(const Var<T>& images) const;

  /// Binary masks [B,H,W] from the configured output level; a pixel is
  /// foreground iff sigmoid(logit) > threshold.
  Tensor<uint8_t> predict_mask(const Tensor<T>& images, double threshold) const;

  ParameterStore<T>& parameters() noexcept { return *store_; }
  const ParameterStore<T>& parameters() const noexcept { return *store_; }
  const ModelConfig& config() const noexcept { return config_; }

  /// Human-readable block chain per level, e.g. "k3: f3 -> cif -> ab -> ftb -> ab -> head".
  std::vector<std::string> describe() const;

 private:
  struct LevelHeads {
    std::optional<cif::ContextFusion<T>> cif;
    std::optional<Conv2d<T>> projection;  // CIF disabled
    std::optional<Conv2d<T>> coarse_head;  // CIF disabled
    Conv2d<T> final_head;
  };

  ModelConfig config_;
  std::unique_ptr<ParameterStore<T>> store_;
  std::unique_ptr<backbone::Backbone<T>> backbone_;
  std::vector<LevelHeads> levels_;  // index 0 -> k=3
  attention::AttentionBlock<T> attention_;
  ftb::FourierTransformBlock<T> ftb_;
};

/// Thresholds logits [B,1,H,W] (or any shape) into a 0/1 tensor of equal
/// numel with the channel axis dropped.
template <typename T>
Tensor<uint8_t> mask_from_logits(const Tensor<T>& logits, double threshold);

/// Replicates [B,1,H,W] grayscale to [B,3,H,W].
template <typename T>
Tensor<T> replicate_gray(const Tensor<T>& gray);

extern template class FdNet<float>;
extern template class FdNet<double>;

}  // namespace fdnet
