// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "fdnet/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>

#include <nlohmann/json.hpp>

namespace fdnet {
namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train.lr0 must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (decay_period < 1) throw ConfigError("train.decay_period must be >= 1");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw ConfigError("train.decay_factor must lie in (0,1]");
  }
  if (resize_height < 32 || resize_width < 32 || resize_height % 32 != 0 ||
      resize_width % 32 != 0) {
    throw ConfigError("train.resize must be positive multiples of 32");
  }
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw ConfigError("adam betas must lie in [0,1) and eps must be > 0");
  }
  model.validate();
}

double lr_schedule(int64_t epoch, double lr0, int period, double factor) {
  if (epoch < 0) throw ConfigError("lr_schedule: epoch must be >= 0");
  if (period < 1) throw ConfigError("lr_schedule: period must be >= 1");
  return lr0 * std::pow(factor, static_cast<double>(epoch / period));
}

template <typename T>
Var<T> compute_loss(const PredictionSet<T>& preds, const Tensor<T>& gt) {
  for (const T v : gt.values()) {
    if (v != T{0} && v != T{1}) throw ValidationError("ground-truth mask is not binary");
  }
  std::vector<Var<T>> terms;
  terms.reserve(6);
  for (const auto* maps : {&preds.coarse, &preds.final}) {
    for (const auto& logits : *maps) {
      if (logits.shape() != gt.shape()) {
        throw ShapeError("ground truth " + shape_str(gt.shape()) + " does not match logits " +
                         shape_str(logits.shape()));
      }
      terms.push_back(ops::bce_with_logits(logits, gt, static_cast<T>(kBceClamp)));
    }
  }
  return ops::sum_scalars(terms);
}

template <typename T>
Adam<T>::Adam(const ParameterStore<T>& store, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& e : store.entries()) {
    m_.emplace_back(e.var.shape());
    v_.emplace_back(e.var.shape());
  }
}

template <typename T>
void Adam<T>::step(ParameterStore<T>& store, double lr, const std::vector<std::string>& skip) {
  const auto& entries = store.entries();
  if (entries.size() != m_.size()) throw ShapeError("optimiser state does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& name = entries[i].name;
    bool skipped = false;
    for (const auto& prefix : skip) skipped = skipped || name.starts_with(prefix);
    Var<T> var = entries[i].var;
    if (skipped || var.grad().empty()) continue;
    const Tensor<T>& g = var.grad();
    Tensor<T>& p = var.mutable_value();
    Tensor<T>& m = m_[i];
    Tensor<T>& v = v_[i];
    for (int64_t j = 0; j < p.numel(); ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = beta1_ * static_cast<double>(m[j]) + (1.0 - beta1_) * gj;
      const double vj = beta2_ * static_cast<double>(v[j]) + (1.0 - beta2_) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + eps_);
      p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
    }
  }
}

template <typename T>
void Adam<T>::restore(int64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw WeightLoadError("optimiser state size mismatch");
  }
  for (size_t i = 0; i < m.size(); ++i) {
    if (m[i].shape() != m_[i].shape() || v[i].shape() != v_[i].shape()) {
      throw WeightLoadError("optimiser state shape mismatch");
    }
  }
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

std::string log_entry_json(const LogEntry& e) {
  return json{{"epoch", e.epoch},
              {"step", e.step},
              {"lr", e.lr},
              {"loss", e.loss},
              {"wall_time", e.wall_time}}
      .dump();
}

// ---------------------------------------------------------------------------
// Config snapshots

namespace {

json model_to_json(const ModelConfig& c) {
  json bb{{"variant", c.backbone.variant},
          {"channel_dims", c.backbone.channel_dims},
          {"frozen", c.backbone.frozen}};
  bb["pretrained_weights"] =
      c.backbone.pretrained_weights ? json(*c.backbone.pretrained_weights) : json(nullptr);
  return json{{"backbone", bb},
              {"cif_width", c.cif_width},
              {"pool_factor", c.pool_factor},
              {"ftb_cutoff", c.ftb_cutoff},
              {"enable_cif", c.enable_cif},
              {"enable_ab", c.enable_ab},
              {"enable_ftb", c.enable_ftb},
              {"output_level", c.output_level}};
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

template <typename V>
void read_if(const json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

ModelConfig model_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  reject_unknown(j,
                 {"backbone", "cif_width", "pool_factor", "ftb_cutoff", "enable_cif", "enable_ab",
                  "enable_ftb", "output_level"},
                 "model");
  ModelConfig c;
  if (j.contains("backbone")) {
    const json& bb = j.at("backbone");
    reject_unknown(bb, {"variant", "channel_dims", "frozen", "pretrained_weights"},
                   "model.backbone");
    read_if(bb, "variant", c.backbone.variant);
    c.backbone.channel_dims = backbone::standard_channel_dims(c.backbone.variant);
    read_if(bb, "channel_dims", c.backbone.channel_dims);
    read_if(bb, "frozen", c.backbone.frozen);
    if (bb.contains("pretrained_weights") && !bb.at("pretrained_weights").is_null()) {
      c.backbone.pretrained_weights = bb.at("pretrained_weights").get<std::string>();
    }
  }
  read_if(j, "cif_width", c.cif_width);
  read_if(j, "pool_factor", c.pool_factor);
  read_if(j, "ftb_cutoff", c.ftb_cutoff);
  read_if(j, "enable_cif", c.enable_cif);
  read_if(j, "enable_ab", c.enable_ab);
  read_if(j, "enable_ftb", c.enable_ftb);
  read_if(j, "output_level", c.output_level);
  c.validate();
  return c;
}

json train_to_json(const TrainConfig& c) {
  return json{{"lr0", c.lr0},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"decay_period", c.decay_period},
              {"decay_factor", c.decay_factor},
              {"resize", {c.resize_height, c.resize_width}},
              {"seed", c.seed},
              {"model", model_to_json(c.model)},
              {"dataset_root", c.dataset_root},
              {"split", std::string(split_name(c.split))},
              {"augment_flips", c.augment_flips},
              {"checkpoint_every", c.checkpoint_every},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps}};
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

TrainConfig train_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be an object");
  reject_unknown(j,
                 {"lr0", "batch_size", "epochs", "decay_period", "decay_factor", "resize", "seed",
                  "model", "dataset_root", "split", "augment_flips", "checkpoint_every", "beta1",
                  "beta2", "adam_eps", "provenance"},
                 "train");
  TrainConfig c;
  read_if(j, "lr0", c.lr0);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "epochs", c.epochs);
  read_if(j, "decay_period", c.decay_period);
  read_if(j, "decay_factor", c.decay_factor);
  if (j.contains("resize")) {
    const auto r = j.at("resize").get<std::vector<int64_t>>();
    if (r.size() != 2) throw ConfigError("train.resize must be [height, width]");
    c.resize_height = r[0];
    c.resize_width = r[1];
  }
  read_if(j, "seed", c.seed);
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  read_if(j, "dataset_root", c.dataset_root);
  if (j.contains("split")) c.split = parse_split(j.at("split").get<std::string>());
  read_if(j, "augment_flips", c.augment_flips);
  read_if(j, "checkpoint_every", c.checkpoint_every);
  read_if(j, "beta1", c.beta1);
  read_if(j, "beta2", c.beta2);
  read_if(j, "adam_eps", c.adam_eps);
  c.validate();
  return c;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return model_to_json(config).dump(); }

ModelConfig model_config_from_json(std::string_view text) {
  return model_from_json(parse_json(text));
}

std::string train_config_to_json(const TrainConfig& config) {
  return train_to_json(config).dump();
}

TrainConfig train_config_from_json(std::string_view text) {
  return train_from_json(parse_json(text));
}

TrainConfig train_config_of(const Checkpoint& ckpt) {
  return train_config_from_json(ckpt.config_json);
}

FdNet<float> model_from_checkpoint(const Checkpoint& ckpt) {
  ModelConfig mc = train_config_of(ckpt).model;
  mc.backbone.pretrained_weights.reset();  // the checkpoint already holds every weight
  FdNet<float> model(mc, 0);
  restore_parameters(model.parameters(), ckpt.parameters);
  return model;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::vector<TensorRecord> moment_records(const ParameterStore<float>& store,
                                         const std::vector<Tensor<float>>& moments) {
  std::vector<TensorRecord> out;
  const auto& entries = store.entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    out.push_back({entries[i].name, moments[i].shape(),
                   std::vector<float>(moments[i].values().begin(), moments[i].values().end())});
  }
  return out;
}

// Resized samples are cached while they fit a fixed budget; beyond that
// they are decoded per batch.
class SampleCache {
 public:
  SampleCache(const DatasetHandle& data, int64_t h, int64_t w) : data_(data), h_(h), w_(w) {
    constexpr int64_t kBudgetBytes = int64_t{1} << 30;
    const int64_t per_sample = h * w * static_cast<int64_t>(sizeof(float) + 1);
    cache_enabled_ = per_sample * static_cast<int64_t>(data.size()) <= kBudgetBytes;
    if (cache_enabled_) {
      for (size_t i = 0; i < data.size(); ++i) cached_.push_back(resize_sample(data.sample(i), h, w));
    }
  }

  SegmentationSample get(size_t i) const {
    if (cache_enabled_) return cached_[i];
    return resize_sample(data_.sample(i), h_, w_);
  }

 private:
  const DatasetHandle& data_;
  int64_t h_, w_;
  bool cache_enabled_ = false;
  std::vector<SegmentationSample> cached_;
};

void write_nonfinite_dump(const fs::path& out_dir, const LogEntry& where,
                          const std::vector<std::string>& batch_ids,
                          const PredictionSet<float>* preds, const ParameterStore<float>& store,
                          const std::string& reason) {
  if (out_dir.empty()) return;
  json dump{{"epoch", where.epoch}, {"step", where.step}, {"lr", where.lr},
            {"batch", batch_ids},  {"reason", reason}};
  json maps = json::array();
  using Maps = std::array<Var<float>, 3>;
  for (const Maps* group : preds ? std::vector<const Maps*>{&preds->coarse, &preds->final}
                                 : std::vector<const Maps*>{}) {
    for (const auto& m : *group) {
      int64_t bad = 0;
      double max_abs = 0.0;
      for (float v : m.value().values()) {
        if (!std::isfinite(v)) {
          ++bad;
        } else {
          max_abs = std::max(max_abs, static_cast<double>(std::abs(v)));
        }
      }
      maps.push_back({{"nonfinite", bad}, {"max_abs_finite", max_abs}});
    }
  }
  dump["logit_maps"] = maps;
  json params = json::array();
  for (const auto& e : store.entries()) {
    double sq = 0.0;
    bool finite = true;
    for (float v : e.var.value().values()) {
      finite = finite && std::isfinite(v);
      sq += static_cast<double>(v) * static_cast<double>(v);
    }
    params.push_back({{"name", e.name}, {"l2", std::sqrt(sq)}, {"finite", finite}});
  }
  dump["parameters"] = params;
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "nonfinite_dump.json") << dump.dump(2) << '\n';
}

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetHandle& data,
                  const TrainOptions& options) {
  config.validate();
  if (data.empty()) throw ValidationError("training dataset is empty");

  FdNet<float> model(config.model, derive_seed(config.seed, 1));
  auto& store = model.parameters();
  Adam<float> adam(store, config.beta1, config.beta2, config.adam_eps);
  std::vector<std::string> skip;
  if (config.model.backbone.frozen) skip.emplace_back("backbone.");

  json snapshot = train_to_json(config);
  if (!options.provenance_json.empty()) snapshot["provenance"] = json::parse(options.provenance_json);

  TrainResult result;
  auto& ckpt = result.checkpoint;
  ckpt.config_json = snapshot.dump();

  auto fill_checkpoint = [&](int64_t epochs_done) {
    ckpt.epoch = epochs_done;
    ckpt.optimizer_step = adam.steps();
    ckpt.parameters = snapshot_parameters(store);
    ckpt.adam_m = moment_records(store, adam.first_moments());
    ckpt.adam_v = moment_records(store, adam.second_moments());
  };

  std::ofstream log_file;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    log_file.open(options.out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log_file) throw IOError("cannot write " + (options.out_dir / "train_log.jsonl").string());
  }

  const SampleCache samples(data, config.resize_height, config.resize_width);
  Rng order_rng(derive_seed(config.seed, 2));
  Rng augment_rng(derive_seed(config.seed, 3));
  const auto start = std::chrono::steady_clock::now();
  std::vector<size_t> order(data.size());
  bool stop = false;
  int64_t epochs_done = 0;

  for (int epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    const double lr = lr_schedule(epoch, config.lr0, config.decay_period, config.decay_factor);
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<size_t>(order_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
    }
    double loss_sum = 0.0;
    int batches = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(config.batch_size)) {
      const size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(config.batch_size));
      std::vector<SegmentationSample> batch;
      std::vector<std::string> ids;
      for (size_t i = b0; i < b1; ++i) {
        SegmentationSample s = samples.get(order[i]);
        if (config.augment_flips) {
          const bool hflip = augment_rng.uniform() < 0.5;
          const bool vflip = augment_rng.uniform() < 0.5;
          if (hflip || vflip) s = flip_sample(s, hflip, vflip);
        }
        ids.push_back(s.id);
        batch.push_back(std::move(s));
      }
      const Var<float> images(replicate_gray(stack_images<float>(batch)));
      const Tensor<float> gt = stack_masks<float>(batch);

      store.zero_grad();
      const LogEntry where{epoch, adam.steps() + 1, lr, 0.0, 0.0};
      std::optional<PredictionSet<float>> preds;
      try {
        preds = model.forward(images);
      } catch (const NumericsError& e) {
        write_nonfinite_dump(options.out_dir, where, ids, nullptr, store, e.what());
        throw;
      }
      const Var<float> loss = compute_loss(*preds, gt);
      const double value = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(value)) {
        write_nonfinite_dump(options.out_dir, where, ids, &*preds, store, "non-finite loss");
        throw NumericsError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(where.step));
      }
      backward(loss);
      adam.step(store, lr, skip);
      loss_sum += value;
      ++batches;
      if (options.max_steps > 0 && adam.steps() >= options.max_steps) {
        stop = true;
        break;
      }
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const LogEntry entry{epoch, adam.steps(), lr, loss_sum / batches, wall};
    result.log.push_back(entry);
    ckpt.history.push_back({entry.epoch, entry.step, entry.lr, entry.loss});
    if (log_file) log_file << log_entry_json(entry) << '\n' << std::flush;
    if (options.on_epoch) options.on_epoch(entry);
    epochs_done = epoch + 1;

    if (!options.out_dir.empty() && config.checkpoint_every > 0 &&
        epochs_done % config.checkpoint_every == 0) {
      fill_checkpoint(epochs_done);
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04lld.fdnet",
                    static_cast<long long>(epochs_done));
      save_checkpoint(ckpt, options.out_dir / name);
    }
  }

  fill_checkpoint(epochs_done);
  if (!options.out_dir.empty()) save_checkpoint(ckpt, options.out_dir / "final.fdnet");
  return result;
}

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  if (config.dataset_root.empty()) throw ConfigError("train: dataset_root is not set");
  return train(config, load_dataset(config.dataset_root, config.split), options);
}

template Var<float> compute_loss<float>(const PredictionSet<float>&, const Tensor<float>&);
template Var<double> compute_loss<double>(const PredictionSet<double>&, const Tensor<double>&);
template class Adam<float>;
template class Adam<double>;

}  // namespace fdnet
