// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "blas_env.hpp"
#include "commands.hpp"

namespace {

using fdnet::cli::json;
namespace fs = std::filesystem;

// Flags every subcommand takes.
struct Shared {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out;
};

void add_shared(CLI::App* sub, Shared& s, bool out_required) {
  sub->add_option("--config", s.config, "JSON config file (defaults < file < flags)")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", s.seed, "Seed for every random choice");
  auto* out = sub->add_option("--out", s.out, "Output directory");
  if (out_required) out->required();
}

fdnet::cli::RunConfig resolve(const Shared& s, json overrides) {
  if (s.seed) overrides["seed"] = *s.seed;
  std::optional<json> file;
  if (!s.config.empty()) file = fdnet::cli::read_config_file(s.config);
  return fdnet::cli::resolve_run_config(fdnet::cli::desk_defaults(), file, overrides);
}

// Optional numeric flag that lands at a JSON path when given.
template <typename V>
void put_if(json& j, const std::optional<V>& v, const json::json_pointer& at) {
  if (v) j[at] = *v;
}

}  // namespace

int main(int argc, char** argv) {
  fdnet::cli::maybe_reexec_for_blas(argv);

  CLI::App app{"FDNet: frequency-domain denoising segmentation"};
  app.require_subcommand(1);

  Shared shared;

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic phantom dataset");
  add_shared(synth, shared, true);
  std::optional<int> n_train, n_test, interference;
  std::optional<int64_t> size;
  bool force = false;
  synth->add_option("--train", n_train, "Training images")->check(CLI::NonNegativeNumber);
  synth->add_option("--test", n_test, "Test images")->check(CLI::NonNegativeNumber);
  synth->add_option("--size", size, "Square image side in pixels")->check(CLI::PositiveNumber);
  synth->add_option("--interference", interference, "Interference blobs per image");
  synth->add_flag("--force", force, "Replace an existing dataset in --out");

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  add_shared(train, shared, true);
  std::string train_data;
  std::optional<int> epochs;
  std::optional<int64_t> resize;
  std::optional<double> cutoff, lr;
  int64_t max_steps = 0;
  train->add_option("--dataset", train_data, "Dataset root")->required();
  train->add_option("--epochs", epochs, "Epochs");
  train->add_option("--resize", resize, "Square training resolution");
  train->add_option("--ftb-cutoff", cutoff, "Normalized radial cutoff of the frequency filter");
  train->add_option("--lr", lr, "Initial learning rate");
  train->add_option("--max-steps", max_steps, "Stop after this many optimizer steps (0: no limit)");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  add_shared(eval, shared, false);
  std::string eval_ckpt, eval_data, split = "test";
  std::optional<double> threshold;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--dataset", eval_data, "Dataset root")->required();
  eval->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--threshold", threshold, "Probability threshold");

  // predict
  auto* predict = app.add_subcommand("predict", "Segment one image");
  add_shared(predict, shared, true);
  std::string pred_ckpt, image;
  predict->add_option("--checkpoint", pred_ckpt, "Checkpoint file")->required();
  predict->add_option("--image", image, "Grayscale PNG")->required();
  predict->add_option("--threshold", threshold, "Probability threshold");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and score the five component settings");
  add_shared(ablate, shared, true);
  std::string ablate_data;
  ablate->add_option("--dataset", ablate_data, "Dataset root")->required();
  ablate->add_option("--epochs", epochs, "Epochs per row");
  ablate->add_option("--resize", resize, "Square training resolution");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    json over = json::object();
    put_if(over, epochs, "/train/epochs"_json_pointer);
    put_if(over, lr, "/train/lr0"_json_pointer);
    put_if(over, cutoff, "/model/ftb_cutoff"_json_pointer);
    put_if(over, threshold, "/eval/threshold"_json_pointer);
    if (resize) over["train"]["resize"] = {*resize, *resize};
    put_if(over, n_train, "/phantom/train_count"_json_pointer);
    put_if(over, n_test, "/phantom/test_count"_json_pointer);
    put_if(over, interference, "/phantom/interference_count"_json_pointer);
    if (size) {
      over["phantom"]["height"] = *size;
      over["phantom"]["width"] = *size;
    }
    const auto rc = resolve(shared, over);

    if (*synth) {
      fdnet::cli::cmd_synth(rc, shared.out, force, std::cout);
    } else if (*train) {
      fdnet::cli::cmd_train(rc, train_data, shared.out, max_steps, std::cout);
    } else if (*eval) {
      fdnet::cli::cmd_eval(eval_ckpt, eval_data, fdnet::parse_split(split), rc.threshold, shared.out,
                           std::cout);
    } else if (*predict) {
      fdnet::cli::cmd_predict(pred_ckpt, image, shared.out, rc.threshold, std::cout);
    } else if (*ablate) {
      fdnet::cli::cmd_ablate(rc, ablate_data, shared.out, std::cout);
    }
  } catch (const fdnet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
