// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fdnet/nn.hpp"

namespace fdnet::backbone {

inline constexpr const char* kResNet50 = "resnet50";
inline constexpr const char* kTiny = "tiny";

/// Channel widths of the stride 8/16/32 stages for a named variant.
/// Throws ConfigError for unknown variants.
std::array<int64_t, 3> standard_channel_dims(const std::string& variant);

struct BackboneConfig {
  std::string variant = kResNet50;
  std::optional<std::string> pretrained_weights;
  std::array<int64_t, 3> channel_dims{512, 1024, 2048};
  bool frozen = false;

  static BackboneConfig resnet50() { return {}; }
  static BackboneConfig tiny() { return {kTiny, std::nullopt, {32, 64, 128}, false}; }
};

/// Stage outputs at strides 8, 16 and 32.
template <typename T>
struct FeaturePyramid {
  Var<T> f3;
  Var<T> f4;
  Var<T> f5;
  int64_t input_height = 0;
  int64_t input_width = 0;

  const Var<T>& level(int k) const {
    switch (k) {
      case 3:
        return f3;
      case 4:
        return f4;
      case 5:
        return f5;
      default:
        throw ShapeError("pyramid level must be 3, 4 or 5");
    }
  }
};

template <typename T>
class Backbone {
 public:
  /// Registers parameters under "backbone.". Throws ConfigError when
  /// channel_dims disagree with the variant.
  Backbone(const BackboneConfig& config, ParameterStore<T>& store, Rng& rng);

  /// images [B,3,H,W] with H and W divisible by 32.
  FeaturePyramid<T> extract_features(const Var<T>& images) const;

  const BackboneConfig& config() const noexcept { return config_; }

 private:
  struct Bottleneck {
    ConvNormAct<T> reduce, spatial, expand;
    std::optional<ConvNormAct<T>> shortcut;
  };
  struct TinyStage {
    ConvNormAct<T> down, body;
  };

  Var<T> run_bottleneck(const Bottleneck& block, const Var<T>& x) const;

  BackboneConfig config_;
  // tiny
  std::vector<ConvNormAct<T>> stem_;
  std::vector<TinyStage> tiny_stages_;
  // resnet50
  std::vector<std::vector<Bottleneck>> layers_;
};

extern template class Backbone<float>;
extern template class Backbone<double>;

}  // namespace fdnet::backbone
