// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fdnet/ops.hpp"
#include "fdnet/random.hpp"

namespace fdnet {

template <typename T>
struct NamedParameter {
  std::string name;
  Var<T> var;
};

/// Ordered registry of trainable tensors. Layers keep handles that share
/// nodes with the registry, so updates through either are visible to both.
template <typename T>
class ParameterStore {
 public:
  Var<T> create(std::string name, Tensor<T> init) {
    if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
    Var<T> v(std::move(init), /*requires_grad=*/true);
    entries_.push_back({std::move(name), v});
    return v;
  }

  const std::vector<NamedParameter<T>>& entries() const noexcept { return entries_; }

  int64_t count() const {
    int64_t total = 0;
    for (const auto& e : entries_) total += e.var.value().numel();
    return total;
  }

  void zero_grad() {
    for (auto& e : entries_) e.var.zero_grad();
  }

  const Var<T>* find(std::string_view name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e.var;
    }
    return nullptr;
  }

 private:
  std::vector<NamedParameter<T>> entries_;
};

/// Init gain for the 1x1 prediction heads. Small heads start every map near
/// the prior instead of at large random logits.
inline constexpr double kHeadInitGain = 0.01;

/// He-normal initialisation (std = sqrt(2 / fan_in)), drawn in double.
template <typename T>
Tensor<T> he_normal(Shape shape, int64_t fan_in, Rng& rng, double gain = 1.0) {
  Tensor<T> t(std::move(shape));
  const double std_dev = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = static_cast<T>(std_dev * rng.normal());
  return t;
}

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore<T>& store, const std::string& name, int64_t in_channels,
         int64_t out_channels, int kernel, ops::Conv2dArgs args, bool with_bias, Rng& rng,
         double init_gain = 1.0)
      : args_(args), has_bias_(with_bias) {
    const int64_t fan_in = in_channels * kernel * kernel;
    weight_ = store.create(
        name + ".weight",
        he_normal<T>({out_channels, in_channels, kernel, kernel}, fan_in, rng, init_gain));
    if (with_bias) bias_ = store.create(name + ".bias", Tensor<T>({out_channels}));
  }

  Var<T> operator()(const Var<T>& x) const {
    return ops::conv2d(x, weight_, has_bias_ ? &bias_ : nullptr, args_);
  }

  const Var<T>& weight() const noexcept { return weight_; }
  Var<T>& weight() noexcept { return weight_; }
  const Var<T>& bias() const noexcept { return bias_; }
  Var<T>& bias() noexcept { return bias_; }
  bool has_bias() const noexcept { return has_bias_; }
  const ops::Conv2dArgs& args() const noexcept { return args_; }
  int64_t out_channels() const { return weight_.dim(0); }

 private:
  Var<T> weight_;
  Var<T> bias_;
  ops::Conv2dArgs args_;
  bool has_bias_ = false;
};

/// Largest group count <= 8 that divides the channel count.
inline int default_groups(int64_t channels) {
  for (int g = 8; g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

template <typename T>
class GroupNorm {
 public:
  GroupNorm() = default;
  GroupNorm(ParameterStore<T>& store, const std::string& name, int64_t channels)
      : groups_(default_groups(channels)) {
    gamma_ = store.create(name + ".gamma", Tensor<T>({channels}, T{1}));
    beta_ = store.create(name + ".beta", Tensor<T>({channels}));
  }

  Var<T> operator()(const Var<T>& x) const { return ops::group_norm(x, gamma_, beta_, groups_); }

  int groups() const noexcept { return groups_; }

 private:
  Var<T> gamma_;
  Var<T> beta_;
  int groups_ = 1;
};

/// conv -> group norm -> activation.
template <typename T>
class ConvNormAct {
 public:
  enum class Activation { kSilu, kRelu, kNone };

  ConvNormAct() = default;
  ConvNormAct(ParameterStore<T>& store, const std::string& name, int64_t in_channels,
              int64_t out_channels, int kernel, ops::Conv2dArgs args, Rng& rng,
              Activation act = Activation::kSilu)
      : conv_(store, name + ".conv", in_channels, out_channels, kernel, args, false, rng),
        norm_(store, name + ".norm", out_channels),
        act_(act) {}

  Var<T> operator()(const Var<T>& x) const {
    Var<T> y = norm_(conv_(x));
    switch (act_) {
      case Activation::kSilu:
        return ops::silu(y);
      case Activation::kRelu:
        return ops::relu(y);
      case Activation::kNone:
        break;
    }
    return y;
  }

  const Conv2d<T>& conv() const noexcept { return conv_; }
  Conv2d<T>& conv() noexcept { return conv_; }

 private:
  Conv2d<T> conv_;
  GroupNorm<T> norm_;
  Activation act_ = Activation::kSilu;
};

}  // namespace fdnet
