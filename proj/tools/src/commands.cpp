// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "fdnet/checkpoint.hpp"
#include "fdnet/data.hpp"
#include "fdnet/image_io.hpp"

namespace fdnet::cli {
namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

bool non_empty_dir(const fs::path& p) {
  return fs::exists(p) && (!fs::is_directory(p) || fs::directory_iterator(p) != fs::directory_iterator());
}

}  // namespace

SynthResult cmd_synth(const RunConfig& rc, const fs::path& out, bool force, std::ostream& log) {
  if (non_empty_dir(out) && !force) {
    throw RefusalError("refusing to write into non-empty " + out.string() + " (use --force)");
  }
  if (force) {
    for (const char* sub : {"images", "masks", "phantom_meta.json"}) fs::remove_all(out / sub);
  }
  SynthResult result;
  result.train = rc.train_count;
  result.test = rc.test_count;
  if (rc.train_count == 0 && rc.test_count == 0) {
    result.warnings.push_back("train and test counts are both 0; writing an empty layout");
  }
  const json config = rc.effective();
  const std::string provenance = config.dump();
  json meta{{"config", config}, {"samples", json::array()}};
  for (Split split : {Split::kTrain, Split::kTest}) {
    fs::create_directories(out / "images" / split_name(split));
    fs::create_directories(out / "masks" / split_name(split));
    const int count = split == Split::kTrain ? rc.train_count : rc.test_count;
    for (const auto& ph : generate_phantom_set(rc.phantom, count, std::string(split_name(split)))) {
      write_sample(out, split, ph.sample, provenance);
      meta["samples"].push_back({{"id", ph.sample.id},
                                 {"split", split_name(split)},
                                 {"cells", ph.layout.cells.size()},
                                 {"blobs", ph.layout.blobs.size()},
                                 {"dropped_cells", ph.meta.dropped_cells},
                                 {"overlap_ratio", ph.meta.overlap_ratio},
                                 {"mask_pixels", ph.sample.mask.count()}});
    }
  }
  write_json(out / "phantom_meta.json", meta);
  for (const auto& w : result.warnings) log << "warning: " << w << '\n';
  log << "wrote " << result.train << " train and " << result.test << " test samples to "
      << out.string() << '\n';
  return result;
}

TrainResult cmd_train(const RunConfig& rc, const fs::path& dataset, const fs::path& out,
                      int64_t max_steps, std::ostream& log) {
  TrainConfig tc = rc.train;
  if (!dataset.empty()) tc.dataset_root = dataset.string();
  const DatasetHandle data = load_dataset(tc.dataset_root, tc.split);
  fs::create_directories(out);
  RunConfig effective = rc;
  effective.train = tc;
  const json config = effective.effective();
  write_json(out / "run_config.json", config);

  TrainOptions opt;
  opt.out_dir = out;
  opt.max_steps = max_steps;
  opt.provenance_json = config.dump();
  opt.on_epoch = [&log](const LogEntry& e) {
    char line[128];
    std::snprintf(line, sizeof(line), "epoch %4lld  step %6lld  lr %.3g  loss %.5f  %.1fs\n",
                  static_cast<long long>(e.epoch), static_cast<long long>(e.step), e.lr, e.loss,
                  e.wall_time);
    log << line << std::flush;
  };
  log << "training on " << data.size() << " samples from " << tc.dataset_root << '\n';
  TrainResult r = train(tc, data, opt);
  log << "wrote " << (out / "final.fdnet").string() << '\n';
  return r;
}

MetricsReport cmd_eval(const fs::path& checkpoint, const fs::path& dataset, Split split,
                       double threshold, const fs::path& out, std::ostream& log) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const DatasetHandle data = load_dataset(dataset, split);
  MetricsReport report = evaluate(ckpt, data, threshold);
  report.reference_scores = reference_comparison();
  json cfg = json::parse(report.config_json.empty() ? "{}" : report.config_json);
  cfg["eval"] = {{"checkpoint", checkpoint.string()},
                 {"dataset", dataset.string()},
                 {"split", split_name(split)},
                 {"threshold", threshold}};
  report.config_json = cfg.dump();
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(out / "metrics.json") << report.to_json() << '\n';
  }
  log << report.render_table();
  return report;
}

PredictResult cmd_predict(const fs::path& checkpoint, const fs::path& image, const fs::path& out,
                          double threshold, std::ostream& log) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Raster8 raw = read_png_gray(image);
  const TrainConfig tc = train_config_of(ckpt);
  const FdNet<float> model = model_from_checkpoint(ckpt);

  GrayImage gray{raw.height, raw.width, std::vector<float>(raw.data.size())};
  for (size_t i = 0; i < raw.data.size(); ++i) gray.pixels[i] = static_cast<float>(raw.data[i]) / 255.0f;
  SegmentationSample s{image.stem().string(), resize_bilinear(gray, tc.resize_height, tc.resize_width),
                       BinaryMask(tc.resize_height, tc.resize_width)};
  const auto logits_mask = model.predict_mask(replicate_gray(stack_images<float>({s})), threshold);
  BinaryMask small(tc.resize_height, tc.resize_width);
  small.pixels.assign(logits_mask.values().begin(), logits_mask.values().end());
  const BinaryMask mask = resize_nearest(small, raw.height, raw.width);

  json cfg = json::parse(ckpt.config_json);
  cfg["predict"] = {{"checkpoint", checkpoint.string()},
                    {"image", image.string()},
                    {"threshold", threshold}};
  const PngText text{{"fdnet-config", cfg.dump()}};

  fs::create_directories(out);
  PredictResult r{out / "mask.png", out / "overlay.png", mask.count()};
  Raster8 m{raw.height, raw.width, 1, std::vector<uint8_t>(mask.pixels.size())};
  for (size_t i = 0; i < mask.pixels.size(); ++i) m.data[i] = mask.pixels[i] ? 255 : 0;
  write_png(r.mask, m, text);

  Raster8 ov{raw.height, raw.width, 3, std::vector<uint8_t>(mask.pixels.size() * 3)};
  for (int64_t y = 0; y < raw.height; ++y) {
    for (int64_t x = 0; x < raw.width; ++x) {
      const auto idx = static_cast<size_t>(y * raw.width + x);
      bool edge = false;
      if (mask.pixels[idx]) {
        edge = y == 0 || x == 0 || y == raw.height - 1 || x == raw.width - 1 ||
               !mask.at(y - 1, x) || !mask.at(y + 1, x) || !mask.at(y, x - 1) || !mask.at(y, x + 1);
      }
      const uint8_t g = raw.data[idx];
      ov.data[3 * idx + 0] = edge ? 255 : g;
      ov.data[3 * idx + 1] = edge ? 0 : g;
      ov.data[3 * idx + 2] = edge ? 0 : g;
    }
  }
  write_png(r.overlay, ov, text);
  log << "wrote " << r.mask.string() << " (" << r.foreground << " foreground pixels) and "
      << r.overlay.string() << '\n';
  return r;
}

json AblationReport::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows) {
    json row{{"name", r.name},
             {"components", {{"cif", r.cif}, {"ab", r.ab}, {"ftb", r.ftb}}},
             {"parameters", r.parameters},
             {"architecture", r.architecture},
             {"ok", r.ok},
             {"seconds", r.seconds},
             {"reference", {{"label", kReferenceLabel},
                            {"miou_percent", r.reference.miou},
                            {"dice_percent", r.reference.dice}}}};
    if (r.ok) {
      row["miou"] = r.miou;
      row["dice"] = r.dice;
    } else {
      row["error"] = r.error;
    }
    rows_j.push_back(row);
  }
  return json{{"rows", rows_j}, {"config", config}};
}

std::string AblationReport::render_table() const {
  std::string s;
  char line[160];
  std::snprintf(line, sizeof(line), "%-5s %-4s %-4s %-4s %10s %8s %8s   %-s\n", "Row", "CIF", "AB",
                "FTB", "Params", "mIoU^", "Dice^", "ref mIoU / Dice");
  s += line;
  for (const auto& r : rows) {
    const char* on = "x";
    const char* off = "-";
    if (r.ok) {
      std::snprintf(line, sizeof(line), "%-5s %-4s %-4s %-4s %10lld %8.1f %8.1f   %.1f / %.1f\n",
                    r.name.c_str(), r.cif ? on : off, r.ab ? on : off, r.ftb ? on : off,
                    static_cast<long long>(r.parameters), 100.0 * r.miou, 100.0 * r.dice,
                    r.reference.miou, r.reference.dice);
    } else {
      std::snprintf(line, sizeof(line), "%-5s %-4s %-4s %-4s %10lld %8s %8s   %.1f / %.1f\n",
                    r.name.c_str(), r.cif ? on : off, r.ab ? on : off, r.ftb ? on : off,
                    static_cast<long long>(r.parameters), "FAILED", "", r.reference.miou,
                    r.reference.dice);
    }
    s += line;
  }
  s += std::string("reference column: ") + kReferenceLabel + "\n";
  for (const auto& r : rows) {
    if (!r.ok) s += r.name + " failed: " + r.error + "\n";
  }
  return s;
}

AblationReport run_ablation(const RunConfig& rc, const DatasetHandle& train_set,
                            const DatasetHandle& test_set, const fs::path& out, std::ostream& log) {
  AblationReport report;
  report.config = rc.effective();
  const auto& settings = ablation_settings();
  const auto& refs = reference_ablation();
  for (size_t i = 0; i < settings.size(); ++i) {
    const auto& setting = settings[i];
    AblationRow row;
    row.name = setting.name;
    row.cif = setting.enable_cif;
    row.ab = setting.enable_ab;
    row.ftb = setting.enable_ftb;
    row.reference = refs[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      TrainConfig tc = rc.train;
      tc.model = apply_ablation(tc.model, setting);
      {
        const FdNet<float> probe(tc.model, 0);
        row.parameters = probe.parameters().count();
        row.architecture = probe.describe();
      }
      RunConfig row_rc = rc;
      row_rc.train = tc;
      TrainOptions opt;
      if (!out.empty()) opt.out_dir = out / setting.name;
      opt.provenance_json = row_rc.effective().dump();
      log << "[" << setting.name << "] training " << row.parameters << " parameters\n" << std::flush;
      const TrainResult tr = train(tc, train_set, opt);
      const MetricsReport m = evaluate(tr.checkpoint, test_set, rc.threshold);
      row.miou = m.miou;
      row.dice = m.dice;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (row.ok) {
      char line[96];
      std::snprintf(line, sizeof(line), "[%s] mIoU %.1f  Dice %.1f  (%.0fs)\n", row.name.c_str(),
                    100.0 * row.miou, 100.0 * row.dice, row.seconds);
      log << line;
    } else {
      log << "[" << row.name << "] failed: " << row.error << '\n';
    }
    report.rows.push_back(std::move(row));
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_json(out / "ablation.json", report.to_json());
    std::ofstream(out / "ablation.txt") << report.render_table();
  }
  return report;
}

AblationReport cmd_ablate(const RunConfig& rc, const fs::path& dataset, const fs::path& out,
                          std::ostream& log) {
  const fs::path root = dataset.empty() ? fs::path(rc.train.dataset_root) : dataset;
  const DatasetHandle train_set = load_dataset(root, Split::kTrain);
  const DatasetHandle test_set = load_dataset(root, Split::kTest);
  RunConfig effective = rc;
  effective.train.dataset_root = root.string();
  AblationReport report = run_ablation(effective, train_set, test_set, out, log);
  log << report.render_table();
  return report;
}

}  // namespace fdnet::cli
