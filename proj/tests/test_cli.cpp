// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "commands.hpp"
#include "fdnet/image_io.hpp"

namespace fdnet::cli {
namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fdnet_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(int train_count, int test_count, uint64_t seed = 1) {
  json over{{"seed", seed},
            {"train", {{"epochs", 1}, {"batch_size", 2}, {"resize", {64, 64}}}},
            {"model", {{"cif_width", 8}}},
            {"phantom",
             {{"height", 64},
              {"width", 64},
              {"cell_radius_min", 5.0},
              {"cell_radius_max", 8.0},
              {"interference_radius_min", 4.0},
              {"interference_radius_max", 8.0},
              {"train_count", train_count},
              {"test_count", test_count}}}};
  return resolve_run_config(desk_defaults(), std::nullopt, over);
}

TEST(RunConfig, DeskDefaults) {
  const auto rc = resolve_run_config(desk_defaults(), std::nullopt, json::object());
  EXPECT_EQ(rc.train.model.backbone.variant, "tiny");
  EXPECT_EQ(rc.train.epochs, 40);
  EXPECT_EQ(rc.train.resize_height, 256);
  EXPECT_EQ(rc.phantom.height, 256);
  EXPECT_EQ(rc.phantom.width, 256);
}

TEST(RunConfig, FlagsBeatFileBeatDefaults) {
  const json file{{"seed", 5}, {"train", {{"epochs", 7}, {"lr0", 0.01}}}};
  const json flags{{"train", {{"epochs", 3}}}};
  const auto rc = resolve_run_config(desk_defaults(), std::optional<json>(std::in_place, file), flags);
  EXPECT_EQ(rc.train.epochs, 3);
  EXPECT_DOUBLE_EQ(rc.train.lr0, 0.01);
  EXPECT_EQ(rc.seed, 5u);
  // One seed drives everything.
  EXPECT_EQ(rc.train.seed, 5u);
  EXPECT_EQ(rc.phantom.seed, 5u);
  // Nested objects merge instead of replacing.
  EXPECT_EQ(rc.train.resize_width, 256);
}

TEST(RunConfig, UnknownKeysRejected) {
  const auto bad = [](json over) {
    EXPECT_THROW(resolve_run_config(desk_defaults(), std::nullopt, over), ConfigError) << over;
  };
  bad({{"sead", 1}});
  bad({{"train", {{"epoch", 1}}}});
  bad({{"train", {{"seed", 1}}}});
  bad({{"model", {{"ftb", 0.1}}}});
  bad({{"phantom", {{"cells", 3}}}});
  bad({{"eval", {{"threshold", 1.5}}}});
  bad({{"phantom", {{"train_count", -1}}}});
}

TEST(RunConfig, EffectiveRoundTrips) {
  const auto rc = small_config(2, 1, 9);
  const auto again = resolve_run_config(json::object(), std::nullopt, rc.effective());
  EXPECT_EQ(again.effective(), rc.effective());
}

TEST(Synth, CountsMetaAndDeterminism) {
  const auto out = scratch("synth");
  std::ostringstream log;
  const auto rc = small_config(3, 2);
  const auto r = cmd_synth(rc, out, false, log);
  EXPECT_EQ(r.train, 3);
  EXPECT_EQ(r.test, 2);
  EXPECT_TRUE(r.warnings.empty());
  EXPECT_EQ(load_dataset(out, Split::kTrain).size(), 3u);
  EXPECT_EQ(load_dataset(out, Split::kTest).size(), 2u);

  const json meta = json::parse(slurp(out / "phantom_meta.json"));
  EXPECT_EQ(meta["samples"].size(), 5u);
  EXPECT_EQ(meta["config"], rc.effective());
  for (const auto& s : meta["samples"]) EXPECT_TRUE(s.contains("dropped_cells"));

  const std::string image = slurp(out / "images" / "train" / "train_0001.png");
  EXPECT_NE(image.find("fdnet-config"), std::string::npos);

  EXPECT_THROW(cmd_synth(rc, out, false, log), RefusalError);

  const auto second = scratch("synth2");
  cmd_synth(rc, second, false, log);
  for (const char* rel : {"images/train/train_0000.png", "masks/train/train_0002.png",
                          "images/test/test_0001.png", "phantom_meta.json"}) {
    EXPECT_EQ(slurp(out / rel), slurp(second / rel)) << rel;
  }

  // --force replaces the dataset and leaves unrelated files alone.
  std::ofstream(out / "notes.txt") << "keep";
  const auto fewer = small_config(1, 1);
  cmd_synth(fewer, out, true, log);
  EXPECT_EQ(load_dataset(out, Split::kTrain).size(), 1u);
  EXPECT_TRUE(fs::exists(out / "notes.txt"));
}

TEST(Synth, EmptyLayoutWarns) {
  const auto out = scratch("empty");
  std::ostringstream log;
  const auto r = cmd_synth(small_config(0, 0), out, false, log);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
  EXPECT_TRUE(fs::is_directory(out / "images" / "train"));
  EXPECT_TRUE(fs::is_directory(out / "masks" / "test"));
  EXPECT_TRUE(fs::exists(out / "phantom_meta.json"));
}

class TrainedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = scratch("trained");
    std::ostringstream log;
    rc_ = small_config(2, 2, 3);
    cmd_synth(rc_, root_ / "data", false, log);
    cmd_train(rc_, root_ / "data", root_ / "run", 0, log);
  }

  static inline fs::path root_;
  static inline RunConfig rc_;
};

TEST_F(TrainedRun, TrainArtifactsCarryConfig) {
  ASSERT_TRUE(fs::exists(root_ / "run" / "final.fdnet"));
  const json cfg = json::parse(slurp(root_ / "run" / "run_config.json"));
  EXPECT_EQ(cfg["seed"], 3);
  EXPECT_EQ(cfg["train"]["dataset_root"], (root_ / "data").string());
  const auto ckpt = load_checkpoint(root_ / "run" / "final.fdnet");
  EXPECT_EQ(train_config_of(ckpt).seed, 3u);
}

TEST_F(TrainedRun, EvalWritesReport) {
  std::ostringstream log;
  const auto r = cmd_eval(root_ / "run" / "final.fdnet", root_ / "data", Split::kTest, 0.5,
                          root_ / "eval", log);
  EXPECT_EQ(r.per_image.size(), 2u);
  const json j = json::parse(slurp(root_ / "eval" / "metrics.json"));
  EXPECT_EQ(j["config"]["eval"]["split"], "test");
  EXPECT_TRUE(j["config"].contains("model"));
  EXPECT_NE(log.str().find("mIoU"), std::string::npos);
}

TEST_F(TrainedRun, PredictWritesBinaryMaskAndOverlay) {
  std::ostringstream log;
  const fs::path image = root_ / "data" / "images" / "test" / "test_0000.png";
  const auto a = cmd_predict(root_ / "run" / "final.fdnet", image, root_ / "p1", 0.5, log);
  const auto b = cmd_predict(root_ / "run" / "final.fdnet", image, root_ / "p2", 0.5, log);
  const Raster8 mask = read_png_gray(a.mask);
  EXPECT_EQ(mask.height, 64);
  EXPECT_EQ(mask.width, 64);
  std::set<uint8_t> values(mask.data.begin(), mask.data.end());
  for (uint8_t v : values) EXPECT_TRUE(v == 0 || v == 255) << int(v);
  EXPECT_TRUE(fs::exists(a.overlay));
  EXPECT_EQ(slurp(a.mask), slurp(b.mask));
  EXPECT_NE(slurp(a.mask).find("fdnet-config"), std::string::npos);
}

TEST_F(TrainedRun, PredictMissingInputsNamePath) {
  std::ostringstream log;
  try {
    cmd_predict(root_ / "absent.fdnet", root_ / "data" / "images" / "test" / "test_0000.png",
                root_ / "p3", 0.5, log);
    FAIL() << "expected IOError";
  } catch (const IOError& e) {
    EXPECT_NE(std::string(e.what()).find("absent.fdnet"), std::string::npos);
  }
  EXPECT_THROW(cmd_predict(root_ / "run" / "final.fdnet", root_ / "nope.png", root_ / "p3", 0.5, log),
               IOError);
}

TEST_F(TrainedRun, AblationEmitsFiveRowsInOrder) {
  std::ostringstream log;
  const auto train_set = load_dataset(root_ / "data", Split::kTrain);
  const auto test_set = load_dataset(root_ / "data", Split::kTest);
  const auto rep = run_ablation(rc_, train_set, test_set, root_ / "ablate", log);
  ASSERT_EQ(rep.rows.size(), 5u);
  const std::vector<std::string> names{"No.1", "No.2", "No.3", "No.4", "Ours"};
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(rep.rows[i].name, names[i]);
    EXPECT_TRUE(rep.rows[i].ok) << rep.rows[i].error;
    EXPECT_EQ(rep.rows[i].reference.miou, reference_ablation()[i].miou);
  }
  EXPECT_FALSE(rep.rows[0].cif || rep.rows[0].ab || rep.rows[0].ftb);
  EXPECT_TRUE(rep.rows[4].cif && rep.rows[4].ab && rep.rows[4].ftb);
  EXPECT_LT(rep.rows[0].parameters, rep.rows[4].parameters);
  const json j = json::parse(slurp(root_ / "ablate" / "ablation.json"));
  EXPECT_EQ(j["rows"].size(), 5u);
  EXPECT_EQ(j["rows"][0]["reference"]["label"], kReferenceLabel);
  const std::string table = rep.render_table();
  EXPECT_NE(table.find("50.4 / 54.7"), std::string::npos);
  EXPECT_NE(table.find("80.8 / 86.2"), std::string::npos);
}

TEST_F(TrainedRun, AblationFailuresDoNotStopLaterRows) {
  std::ostringstream log;
  const auto train_set = load_dataset(root_ / "data", Split::kTrain);
  const auto empty = DatasetHandle::from_samples(Split::kTest, {});
  const auto rep = run_ablation(rc_, train_set, empty, {}, log);
  ASSERT_EQ(rep.rows.size(), 5u);
  for (const auto& r : rep.rows) {
    EXPECT_FALSE(r.ok);
    EXPECT_FALSE(r.error.empty());
  }
  EXPECT_NE(rep.render_table().find("FAILED"), std::string::npos);
}

}  // namespace
}  // namespace fdnet::cli
