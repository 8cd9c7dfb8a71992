// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/backbone.hpp"

namespace fdnet::backbone {

std::array<int64_t, 3> standard_channel_dims(const std::string& variant) {
  if (variant == kResNet50) return {512, 1024, 2048};
  if (variant == kTiny) return {32, 64, 128};
  throw ConfigError("unknown backbone variant: " + variant);
}

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& config, ParameterStore<T>& store, Rng& rng)
    : config_(config) {
  if (standard_channel_dims(config.variant) != config.channel_dims) {
    throw ConfigError("backbone channel_dims do not match variant " + config.variant);
  }
  using Act = typename ConvNormAct<T>::Activation;
  const std::string p = "backbone.";
  if (config.variant == kTiny) {
    stem_.emplace_back(store, p + "stem0", 3, 16, 3, ops::Conv2dArgs{2, 1, 1}, rng);
    stem_.emplace_back(store, p + "stem1", 16, 32, 3, ops::Conv2dArgs{2, 1, 1}, rng);
    int64_t in = 32;
    for (int s = 0; s < 3; ++s) {
      const int64_t out = config.channel_dims[static_cast<size_t>(s)];
      const std::string name = p + "stage" + std::to_string(s + 3);
      tiny_stages_.push_back(
          {ConvNormAct<T>(store, name + ".down", in, out, 3, {2, 1, 1}, rng),
           ConvNormAct<T>(store, name + ".body", out, out, 3, {1, 1, 1}, rng)});
      in = out;
    }
    return;
  }

  // 50-layer bottleneck network: 3/4/6/3 blocks, expansion 4.
  stem_.emplace_back(store, p + "stem", 3, 64, 7, ops::Conv2dArgs{2, 3, 1}, rng, Act::kRelu);
  const std::array<int, 4> blocks{3, 4, 6, 3};
  const std::array<int64_t, 4> widths{64, 128, 256, 512};
  int64_t in = 64;
  for (size_t l = 0; l < blocks.size(); ++l) {
    std::vector<Bottleneck> layer;
    for (int b = 0; b < blocks[l]; ++b) {
      const int stride = (b == 0 && l > 0) ? 2 : 1;
      const int64_t mid = widths[l], out = widths[l] * 4;
      const std::string name = p + "layer" + std::to_string(l + 1) + "." + std::to_string(b);
      Bottleneck block{
          ConvNormAct<T>(store, name + ".reduce", in, mid, 1, {1, 0, 1}, rng, Act::kRelu),
          ConvNormAct<T>(store, name + ".spatial", mid, mid, 3, {stride, 1, 1}, rng, Act::kRelu),
          ConvNormAct<T>(store, name + ".expand", mid, out, 1, {1, 0, 1}, rng, Act::kNone),
          std::nullopt};
      if (b == 0) {
        block.shortcut.emplace(store, name + ".shortcut", in, out, 1, ops::Conv2dArgs{stride, 0, 1},
                               rng, Act::kNone);
      }
      layer.push_back(std::move(block));
      in = out;
    }
    layers_.push_back(std::move(layer));
  }
}

template <typename T>
Var<T> Backbone<T>::run_bottleneck(const Bottleneck& block, const Var<T>& x) const {
  Var<T> y = block.expand(block.spatial(block.reduce(x)));
  Var<T> skip = block.shortcut ? (*block.shortcut)(x) : x;
  return ops::relu(ops::add(y, skip));
}

template <typename T>
FeaturePyramid<T> Backbone<T>::extract_features(const Var<T>& images) const {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != 3) {
    throw ShapeError("backbone expects [B,3,H,W], got " + shape_str(s));
  }
  if (s[0] < 1) throw ShapeError("backbone needs a non-empty batch");
  if (s[2] % 32 != 0 || s[3] % 32 != 0 || s[2] == 0 || s[3] == 0) {
    throw ShapeError("backbone input " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                     " is not divisible by 32");
  }
  FeaturePyramid<T> pyr;
  pyr.input_height = s[2];
  pyr.input_width = s[3];
  Var<T> x = images;
  if (config_.variant == kTiny) {
    for (const auto& layer : stem_) x = layer(x);
    std::array<Var<T>, 3> outs;
    for (size_t i = 0; i < tiny_stages_.size(); ++i) {
      x = tiny_stages_[i].down(x);
      x = ops::add(x, tiny_stages_[i].body(x));
      outs[i] = x;
    }
    pyr.f3 = outs[0];
    pyr.f4 = outs[1];
    pyr.f5 = outs[2];
    return pyr;
  }
  x = ops::max_pool(stem_.front()(x), 3, 2, 1);
  std::array<Var<T>, 4> outs;
  for (size_t l = 0; l < layers_.size(); ++l) {
    for (const auto& block : layers_[l]) x = run_bottleneck(block, x);
    outs[l] = x;
  }
  pyr.f3 = outs[1];
  pyr.f4 = outs[2];
  pyr.f5 = outs[3];
  return pyr;
}

template class Backbone<float>;
template class Backbone<double>;

}  // namespace fdnet::backbone
