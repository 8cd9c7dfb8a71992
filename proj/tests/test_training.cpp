// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "fdnet/phantom.hpp"
#include "fdnet/training.hpp"
#include "test_util.hpp"

namespace fdnet {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

PredictionSet<double> constant_maps(const Shape& shape, double logit) {
  PredictionSet<double> p;
  for (auto* group : {&p.coarse, &p.final}) {
    for (auto& m : *group) m = Var<double>(Tensor<double>(shape, logit), true);
  }
  p.input_height = shape[2];
  p.input_width = shape[3];
  return p;
}

TEST(Loss, AllZeroLogits) {
  Rng rng(61);
  Tensor<double> gt({2, 1, 8, 8});
  for (auto& v : gt.values()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  const auto loss = compute_loss(constant_maps(gt.shape(), 0.0), gt);
  EXPECT_NEAR(loss.value()[0], 6.0 * std::numbers::ln2, 1e-12);
}

TEST(Loss, PerfectPredictionIsClampedNearZero) {
  Tensor<double> gt({1, 1, 4, 4});
  for (int64_t i = 0; i < 16; ++i) gt[i] = i % 3 == 0;
  PredictionSet<double> p = constant_maps(gt.shape(), 0.0);
  for (auto* group : {&p.coarse, &p.final}) {
    for (auto& m : *group) {
      for (int64_t i = 0; i < 16; ++i) m.mutable_value()[i] = gt[i] > 0 ? 40.0 : -40.0;
    }
  }
  const double l = compute_loss(p, gt).value()[0];
  EXPECT_GE(l, 0.0);
  EXPECT_LE(l, -6.0 * std::log1p(-kBceClamp) + 1e-15);
}

TEST(Loss, ScalarWorkedExample) {
  const Tensor<double> gt({1, 1, 1, 1}, 1.0);
  const auto loss = compute_loss(constant_maps(gt.shape(), 0.8473), gt);
  EXPECT_NEAR(loss.value()[0], 6.0 * -std::log(0.7), 1e-4);
}

TEST(Loss, RejectsNonBinaryAndMismatchedTargets) {
  Tensor<double> gt({1, 1, 2, 2});
  gt[1] = 0.5;
  EXPECT_THROW(compute_loss(constant_maps(gt.shape(), 0.0), gt), ValidationError);
  EXPECT_THROW(compute_loss(constant_maps({1, 1, 2, 3}, 0.0), Tensor<double>({1, 1, 2, 2})),
               ShapeError);
}

TEST(Loss, NonNegativeAndSymmetricAcrossMaps) {
  Rng rng(62);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> gt({1, 1, 4, 4});
    for (auto& v : gt.values()) v = rng.uniform() < 0.5;
    std::array<Tensor<double>, 6> fields;
    for (auto& f : fields) f = random_tensor({1, 1, 4, 4}, rng, -5.0, 5.0);
    auto build = [&](const std::array<int, 6>& perm) {
      PredictionSet<double> p;
      for (int i = 0; i < 3; ++i) {
        p.coarse[static_cast<size_t>(i)] = Var<double>(fields[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
        p.final[static_cast<size_t>(i)] = Var<double>(fields[static_cast<size_t>(perm[static_cast<size_t>(i + 3)])]);
      }
      return compute_loss(p, gt).value()[0];
    };
    const double base = build({0, 1, 2, 3, 4, 5});
    EXPECT_GT(base, 0.0);
    EXPECT_NEAR(build({5, 3, 1, 0, 2, 4}), base, 1e-12);
    EXPECT_NEAR(build({3, 4, 5, 0, 1, 2}), base, 1e-12);
  }
}

TEST(Schedule, StepDecay) {
  EXPECT_EQ(lr_schedule(0, 0.001), 0.001);
  EXPECT_EQ(lr_schedule(99, 0.001), 0.001);
  EXPECT_EQ(lr_schedule(100, 0.001), 0.0005);
  EXPECT_EQ(lr_schedule(200, 0.001), 0.00025);
  EXPECT_EQ(lr_schedule(399, 0.001), 0.000125);
  EXPECT_EQ(lr_schedule(10, 1.0, 5, 0.1), 1.0 * 0.1 * 0.1);
  EXPECT_THROW(lr_schedule(-1, 0.001), ConfigError);
}

TEST(Adam, FirstStepMovesBySignTimesLr) {
  ParameterStore<double> store;
  Var<double> p = store.create("p", Tensor<double>({3}, std::vector<double>{1.0, -2.0, 0.5}));
  p.mutable_grad()[0] = 4.0;
  p.mutable_grad()[1] = -0.01;
  p.mutable_grad()[2] = 0.0;
  Adam<double> adam(store);
  adam.step(store, 0.1);
  EXPECT_NEAR(p.value()[0], 0.9, 1e-7);
  EXPECT_NEAR(p.value()[1], -1.9, 1e-5);
  EXPECT_EQ(p.value()[2], 0.5);
  EXPECT_EQ(adam.steps(), 1);
  adam.step(store, 0.1, {"p"});
  EXPECT_NEAR(p.value()[0], 0.9, 1e-7);
}

TEST(Adam, MatchesReferenceRecurrence) {
  ParameterStore<double> store;
  Var<double> p = store.create("p", Tensor<double>({1}, 0.3));
  Adam<double> adam(store, 0.9, 0.999, 1e-8);
  double x = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 25; ++t) {
    const double g = 2.0 * x - std::sin(x);
    p.zero_grad();
    p.mutable_grad()[0] = 2.0 * p.value()[0] - std::sin(p.value()[0]);
    adam.step(store, 0.01);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.01 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.value()[0], x, 1e-12);
  }
}

TEST(Training, OneSmallStepDecreasesTheLoss) {
  ModelConfig mc;
  mc.backbone = backbone::BackboneConfig::tiny();
  mc.cif_width = 8;
  Rng rng(63);
  int passes = 0;
  for (int trial = 0; trial < 20; ++trial) {
    FdNet<double> model(mc, 100 + static_cast<uint64_t>(trial));
    const auto x = random_tensor<double>({1, 3, 32, 32}, rng, 0.0, 1.0);
    Tensor<double> gt({1, 1, 32, 32});
    for (auto& v : gt.values()) v = rng.uniform() < 0.3;
    Adam<double> adam(model.parameters());
    model.parameters().zero_grad();
    const auto loss = compute_loss(model.forward(Var<double>(x)), gt);
    backward(loss);
    adam.step(model.parameters(), 1e-5);
    NoGradGuard ng;
    const double after = compute_loss(model.forward(Var<double>(x)), gt).value()[0];
    passes += after < loss.value()[0];
  }
  EXPECT_GE(passes, 18);
}

DatasetHandle tiny_phantoms(int n, int64_t size, uint64_t seed) {
  PhantomSpec spec;
  spec.height = spec.width = size;
  spec.cell_radius_min = 6;
  spec.cell_radius_max = 9;
  spec.interference_radius_min = 5;
  spec.interference_radius_max = 9;
  spec.seed = seed;
  std::vector<SegmentationSample> s;
  for (auto& p : generate_phantom_set(spec, n, "t")) s.push_back(p.sample);
  return DatasetHandle::from_samples(Split::kTrain, std::move(s));
}

TrainConfig fast_config() {
  TrainConfig tc;
  tc.model.backbone = backbone::BackboneConfig::tiny();
  tc.model.cif_width = 16;
  tc.resize_height = tc.resize_width = 64;
  tc.batch_size = 2;
  tc.epochs = 3;
  tc.seed = 5;
  return tc;
}

TEST(Training, ZeroEpochsReturnsInitialisation) {
  TrainConfig tc = fast_config();
  tc.epochs = 0;
  const auto result = train(tc, tiny_phantoms(2, 64, 1));
  EXPECT_TRUE(result.checkpoint.history.empty());
  EXPECT_TRUE(result.log.empty());
  EXPECT_EQ(result.checkpoint.epoch, 0);
  const FdNet<float> init(tc.model, derive_seed(tc.seed, 1));
  EXPECT_EQ(result.checkpoint.parameters, snapshot_parameters(init.parameters()));
}

TEST(Training, SeededRunsAreIdenticalAndWriteArtifacts) {
  const auto data = tiny_phantoms(3, 64, 2);
  TrainConfig tc = fast_config();
  tc.checkpoint_every = 2;
  tc.augment_flips = true;
  const fs::path dir = fs::temp_directory_path() / "fdnet_train_test";
  fs::remove_all(dir);
  TrainOptions opt;
  opt.out_dir = dir;
  const auto a = train(tc, data, opt);
  const auto b = train(tc, data);
  ASSERT_EQ(a.log.size(), 3u);
  for (size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].loss, b.log[i].loss);
    EXPECT_EQ(a.log[i].step, static_cast<int64_t>(2 * (i + 1)));
  }
  EXPECT_EQ(a.checkpoint.parameters, b.checkpoint.parameters);
  EXPECT_TRUE(fs::exists(dir / "final.fdnet"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint_epoch_0002.fdnet"));
  std::ifstream log(dir / "train_log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    ++lines;
    EXPECT_NE(line.find("\"wall_time\""), std::string::npos);
    EXPECT_NE(line.find("\"lr\""), std::string::npos);
  }
  EXPECT_EQ(lines, 3);
  const Checkpoint disk = load_checkpoint(dir / "final.fdnet");
  EXPECT_EQ(disk, a.checkpoint);
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(dir / "final.fdnet")), serialize_checkpoint(disk));
  fs::remove_all(dir);
}

TEST(Training, CheckpointRebuildsTheModel) {
  TrainConfig tc = fast_config();
  tc.epochs = 1;
  const auto data = tiny_phantoms(2, 64, 3);
  const auto result = train(tc, data);
  const FdNet<float> model = model_from_checkpoint(result.checkpoint);
  EXPECT_EQ(snapshot_parameters(model.parameters()), result.checkpoint.parameters);
  EXPECT_EQ(train_config_of(result.checkpoint).resize_height, 64);
}

TEST(Training, FrozenBackboneIsNotUpdated) {
  TrainConfig tc = fast_config();
  tc.epochs = 1;
  tc.model.backbone.frozen = true;
  const auto result = train(tc, tiny_phantoms(2, 64, 4));
  const FdNet<float> init(tc.model, derive_seed(tc.seed, 1));
  const auto before = snapshot_parameters(init.parameters());
  const auto& after = result.checkpoint.parameters;
  bool head_moved = false;
  for (size_t i = 0; i < before.size(); ++i) {
    if (before[i].name.starts_with("backbone.")) {
      EXPECT_EQ(before[i], after[i]) << before[i].name;
    } else {
      head_moved = head_moved || before[i] != after[i];
    }
  }
  EXPECT_TRUE(head_moved);
}

TEST(Training, MaxStepsStopsEarly) {
  TrainConfig tc = fast_config();
  TrainOptions opt;
  opt.max_steps = 3;
  const auto r = train(tc, tiny_phantoms(3, 64, 5), opt);
  EXPECT_EQ(r.checkpoint.optimizer_step, 3);
  EXPECT_EQ(r.log.size(), 2u);
}

TEST(Training, DivergenceAbortsWithDump) {
  TrainConfig tc = fast_config();
  tc.lr0 = 1e30;
  tc.epochs = 20;
  const fs::path dir = fs::temp_directory_path() / "fdnet_diverge_test";
  fs::remove_all(dir);
  TrainOptions opt;
  opt.out_dir = dir;
  EXPECT_THROW(train(tc, tiny_phantoms(2, 64, 6), opt), NumericsError);
  EXPECT_TRUE(fs::exists(dir / "nonfinite_dump.json"));
  fs::remove_all(dir);
}

TEST(Training, ConfigValidationAndRoundTrip) {
  TrainConfig tc = fast_config();
  tc.model.ftb_cutoff = 0.35;
  tc.model.enable_ab = false;
  tc.split = Split::kTest;
  const TrainConfig back = train_config_from_json(train_config_to_json(tc));
  EXPECT_EQ(train_config_to_json(back), train_config_to_json(tc));
  EXPECT_EQ(back.model.ftb_cutoff, 0.35);
  EXPECT_THROW(train_config_from_json(R"({"lr0": 0.1, "bogus": 1})"), ConfigError);
  EXPECT_THROW(train_config_from_json(R"({"model": {"ftb_cutoff": 2.0}})"), ConfigError);
  EXPECT_THROW(train_config_from_json(R"({"batch_size": 0})"), ConfigError);
  EXPECT_THROW(train_config_from_json(R"({"resize": [100, 64]})"), ConfigError);
  EXPECT_THROW(train(fast_config(), DatasetHandle::from_samples(Split::kTrain, {})),
               ValidationError);
}

TEST(Training, MissingDatasetPropagates) {
  TrainConfig tc = fast_config();
  tc.dataset_root = (fs::temp_directory_path() / "fdnet_no_such_root").string();
  EXPECT_THROW(train(tc), DatasetNotFound);
}

}  // namespace
}  // namespace fdnet
