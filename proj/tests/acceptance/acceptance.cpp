// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blas_env.hpp"
#include "commands.hpp"
#include "fdnet/attention.hpp"
#include "fdnet/ftb.hpp"
#include "fdnet/metrics.hpp"
#include "fdnet/phantom.hpp"
#include "fdnet/training.hpp"
#include "../test_util.hpp"

namespace fdnet {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Tracks the worst value of a measured quantity against its bound.
struct Worst {
  double value = 0.0;
  void see(double v) { value = std::max(value, std::isnan(v) ? INFINITY : v); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

__attribute__((format(printf, 1, 2))) std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fdnet_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<double> plane(const Tensor<double>& x, int64_t c) {
  const int64_t n = x.dim(1) * x.dim(2);
  return {x.data() + c * n, x.data() + (c + 1) * n};
}

// 1 -----------------------------------------------------------------------
Outcome fft_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  Worst dft, round, parseval;
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = trial % 2 ? 8 : 4;
    const auto x = random_tensor({2, n, n}, rng);
    const auto s = ftb::forward_dft(x);
    for (int64_t c = 0; c < 2; ++c) {
      const auto ref = testing::naive_dft(plane(x, c), n, n);
      for (int64_t u = 0; u < n; ++u)
        for (int64_t v = 0; v < n; ++v)
          dft.see(std::abs(s.at(c, u, v) - ref[static_cast<size_t>(u * n + v)]));
    }
    round.see(max_abs_diff(ftb::inverse_dft<double>(s), x));
    double es = 0.0, ef = 0.0;
    for (double v : x.values()) es += v * v;
    for (const auto& b : s.bins()) ef += std::norm(b);
    parseval.see(std::abs(ef / static_cast<double>(n * n) - es) / es);
  }
  const double t = seconds_since(t0);
  return {dft.value <= 1e-6 && round.value <= 1e-5 && parseval.value <= 1e-5 && t < 5.0,
          fmt("dft err %.1e (<=1e-6), round trip %.1e (<=1e-5), Parseval rel %.1e (<=1e-5), "
              "%.2fs (<5s)",
              dft.value, round.value, parseval.value, t)};
}

// 2 -----------------------------------------------------------------------
Outcome ftb_semantics() {
  Rng rng(102);
  const int64_t n = 8;
  const auto m = ftb::build_highpass({0.1, n, n, ftb::FilterMode::kIdeal});
  const auto filt = [&](const Tensor<double>& x, const Tensor<double>& mask) {
    return ftb::filter_and_invert<double>(ftb::forward_dft(x), mask);
  };
  Worst constant, identity, idem, conv;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<double> c({2, n, n}, rng.uniform(-3.0, 3.0));
    for (double v : filt(c, m).values()) constant.see(std::abs(v));
    const auto x = random_tensor({2, n, n}, rng);
    identity.see(max_abs_diff(filt(x, Tensor<double>({n, n}, 1.0)), x));
    const auto once = filt(x, m);
    idem.see(max_abs_diff(filt(once, m), once));
    const double rho = rng.uniform(0.05, 0.6);
    const auto mask = ftb::build_highpass({rho, n, n, ftb::FilterMode::kIdeal});
    const auto y = filt(x, mask);
    for (int64_t ch = 0; ch < 2; ++ch) {
      const auto ref = testing::circular_filter(plane(x, ch), mask, n, n);
      for (int64_t i = 0; i < n * n; ++i)
        conv.see(std::abs(y[ch * n * n + i] - ref[static_cast<size_t>(i)]));
    }
  }
  return {constant.value <= 1e-6 && identity.value <= 1e-5 && idem.value <= 1e-5 &&
              conv.value <= 1e-5,
          fmt("constant %.1e (<=1e-6), identity %.1e, idempotence %.1e, convolution theorem "
              "%.1e (each <=1e-5)",
              constant.value, identity.value, idem.value, conv.value)};
}

// 3 -----------------------------------------------------------------------
Outcome attention_correctness() {
  using namespace attention;
  Rng rng(103);
  Worst rows, loop;
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t c = rng.uniform_int(1, 8), s = rng.uniform_int(1, 16);
    const auto q = random_tensor({c, s}, rng, -2.0, 2.0);
    const auto k = random_tensor({c, s}, rng, -2.0, 2.0);
    const auto m = channel_attention(q, k).m;
    for (int64_t i = 0; i < c; ++i) {
      double sum = 0.0;
      for (int64_t j = 0; j < c; ++j) {
        const double v = m[i * c + j];
        if (v < 0.0 || v > 1.0) rows.see(1.0);
        sum += v;
      }
      rows.see(std::abs(sum - 1.0));
    }
  }
  // Two channels, two pooled positions, one-hot rows: logits are the
  // identity, so each row is softmax(1, 0).
  const Tensor<double> eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  const auto m2 = channel_attention(eye, eye).m;
  const double hi = 1.0 / (1.0 + std::exp(-1.0));
  const double worked = std::max({std::abs(m2[0] - hi), std::abs(m2[1] - (1 - hi)),
                                  std::abs(m2[2] - (1 - hi)), std::abs(m2[3] - hi)});
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t c = rng.uniform_int(1, 6);
    const auto f = random_tensor({c, 4, 6}, rng);
    const auto b = build_qkv(f, 2);
    const auto map = channel_attention(b.q, b.k);
    const auto out = apply_attention(map, b.v, f);
    for (int64_t i = 0; i < c; ++i)
      for (int64_t n = 0; n < 24; ++n) {
        double acc = f[i * 24 + n];
        for (int64_t j = 0; j < c; ++j) acc += map.m[i * c + j] * b.v[j * 24 + n];
        loop.see(std::abs(out[i * 24 + n] - acc));
      }
  }
  ModelConfig with, without;
  with.backbone = without.backbone = backbone::BackboneConfig::tiny();
  without.enable_ab = false;
  const int64_t delta =
      FdNet<float>(with, 1).parameters().count() - FdNet<float>(without, 1).parameters().count();
  const int64_t own = AttentionBlock<float>::parameter_count();
  return {rows.value <= 1e-6 && worked <= 1e-6 && loop.value <= 1e-6 && delta == 0 && own == 0,
          fmt("row sums %.1e, C=2 example %.1e, triple loop %.1e (each <=1e-6), AB params %lld "
              "(model delta %lld)",
              rows.value, worked, loop.value, static_cast<long long>(own),
              static_cast<long long>(delta))};
}

// 4 -----------------------------------------------------------------------
PredictionSet<double> constant_maps(const Shape& shape, double logit) {
  PredictionSet<double> p;
  for (auto* group : {&p.coarse, &p.final})
    for (auto& m : *group) m = Var<double>(Tensor<double>(shape, logit));
  p.input_height = shape[2];
  p.input_width = shape[3];
  return p;
}

Outcome loss_values() {
  Rng rng(104);
  Tensor<double> gt({2, 1, 8, 8});
  for (auto& v : gt.values()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  const double zero = compute_loss(constant_maps(gt.shape(), 0.0), gt).value()[0];
  const double zero_err = std::abs(zero - 6.0 * std::numbers::ln2);

  PredictionSet<double> perfect = constant_maps(gt.shape(), 0.0);
  for (auto* group : {&perfect.coarse, &perfect.final})
    for (auto& m : *group)
      for (int64_t i = 0; i < gt.numel(); ++i) m.mutable_value()[i] = gt[i] > 0 ? 50.0 : -50.0;
  const double best = compute_loss(perfect, gt).value()[0];

  // One positive pixel predicted with probability 0.7 on every map.
  const Tensor<double> one({1, 1, 1, 1}, 1.0);
  const double logit = std::log(0.7 / 0.3);
  const double p7 = compute_loss(constant_maps(one.shape(), logit), one).value()[0];
  const double p7_err = std::abs(p7 - 6.0 * -std::log(0.7));
  return {zero_err <= 1e-6 && best >= 0.0 && best <= 1e-5 && p7_err <= 1e-4,
          fmt("zero logits %.8f vs 6 ln2 (err %.1e <=1e-6), perfect %.1e (<=1e-5), p=0.7 %.6f "
              "(err %.1e <=1e-4)",
              zero, zero_err, best, p7, p7_err)};
}

// 5 -----------------------------------------------------------------------
Outcome gradient_integrity() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(105);
  Var<double> x(random_tensor({2, 4, 8, 8}, rng, -0.5, 0.5), true);
  const attention::AttentionBlock<double> ab(2);
  const ftb::FourierTransformBlock<double> ftb(0.2);
  std::vector<testing::Probe> block_probes;
  for (int i = 0; i < 12; ++i) block_probes.push_back({x, rng.uniform_int(0, x.value().numel() - 1)});
  const double block = testing::gradient_check(
      [&] { return testing::probe_sum(ab(ftb(ab(x)), x)); }, block_probes);

  ModelConfig mc;
  mc.backbone = backbone::BackboneConfig::tiny();
  mc.cif_width = 8;
  FdNet<double> model(mc, 4);
  const auto img = random_tensor<double>({1, 3, 64, 64}, rng, 0.0, 1.0);
  Tensor<double> gt({1, 1, 64, 64});
  for (int64_t i = 0; i < gt.numel(); ++i) gt[i] = ((i % 64) / 8 + (i / 64) / 8) % 2;
  const auto& entries = model.parameters().entries();
  std::vector<testing::Probe> probes;
  for (size_t i = 0; i < entries.size(); i += std::max<size_t>(1, entries.size() / 16)) {
    const auto& v = entries[i].var;
    probes.push_back({v, rng.uniform_int(0, v.value().numel() - 1)});
  }
  const double full = testing::gradient_check(
      [&] { return compute_loss(model.forward(Var<double>(img)), gt); }, probes);
  const double t = seconds_since(t0);
  return {block <= 1e-3 && full <= 1e-2 && t < 120.0,
          fmt("AB->FTB->AB rel err %.1e (<=1e-3), model rel err %.1e over %zu probes (<=1e-2), "
              "%.1fs (<120s)",
              block, full, probes.size(), t)};
}

// 6 -----------------------------------------------------------------------
Outcome schedule() {
  const std::vector<std::pair<int, double>> want{{0, 0.001}, {100, 0.0005}, {200, 0.00025},
                                                 {399, 0.000125}};
  bool ok = true;
  std::string detail;
  for (auto [epoch, lr] : want) {
    const double got = lr_schedule(epoch, 1e-3);
    ok = ok && got == lr;
    detail += fmt("%s%d->%g", detail.empty() ? "" : ", ", epoch, got);
  }
  return {ok, detail + " (exact)"};
}

// 7 -----------------------------------------------------------------------
Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  PhantomSpec ps;
  ps.seed = 7;
  std::vector<SegmentationSample> samples;
  for (auto& p : generate_phantom_set(ps, 8, "train")) samples.push_back(std::move(p.sample));
  const auto ds = DatasetHandle::from_samples(Split::kTrain, samples);
  TrainConfig tc;
  tc.model.backbone = backbone::BackboneConfig::tiny();
  tc.resize_height = tc.resize_width = 256;
  tc.epochs = 300;  // batch 8 over 8 samples: one step per epoch
  tc.seed = 1;
  const auto r = train(tc, ds);
  const int64_t steps = r.log.empty() ? 0 : r.log.back().step;
  const auto rep = evaluate(r.checkpoint, ds);
  const double t = seconds_since(t0);
  return {rep.dice >= 0.95 && steps <= 300 && t <= 600.0,
          fmt("train Dice %.4f (>=0.95) after %lld steps (<=300), %.0fs (<=600s)", rep.dice,
              static_cast<long long>(steps), t)};
}

// 8 -----------------------------------------------------------------------
Outcome ftb_direction() {
  PhantomSpec ps;
  ps.height = ps.width = 128;
  ps.cell_radius_min = 7.0;
  ps.cell_radius_max = 11.0;
  ps.interference_count = 6;
  ps.interference_radius_min = 8.0;
  ps.interference_radius_max = 16.0;
  std::vector<double> with, without;
  std::string detail;
  for (uint64_t seed : {1, 2, 3}) {
    ps.seed = seed;
    std::vector<SegmentationSample> tr, te;
    for (auto& p : generate_phantom_set(ps, 16, "train")) tr.push_back(std::move(p.sample));
    for (auto& p : generate_phantom_set(ps, 8, "test")) te.push_back(std::move(p.sample));
    const auto train_set = DatasetHandle::from_samples(Split::kTrain, tr);
    const auto test_set = DatasetHandle::from_samples(Split::kTest, te);
    for (bool enable : {false, true}) {
      TrainConfig tc;
      tc.model.backbone = backbone::BackboneConfig::tiny();
      tc.model.enable_ftb = enable;
      tc.resize_height = tc.resize_width = 128;
      tc.epochs = 100;
      tc.seed = seed;
      const double d = evaluate(train(tc, train_set).checkpoint, test_set).dice;
      (enable ? with : without).push_back(d);
    }
    detail += fmt("seed %llu: %.4f vs %.4f; ", static_cast<unsigned long long>(seed),
                  with.back(), without.back());
  }
  std::sort(with.begin(), with.end());
  std::sort(without.begin(), without.end());
  return {with[1] > without[1],
          detail + fmt("median test Dice with FTB %.4f, without %.4f (strictly higher)", with[1],
                       without[1])};
}

// 9 -----------------------------------------------------------------------
Outcome metrics_oracle() {
  Rng rng(109);
  int exact = 0;
  Worst identity;
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = testing::random_mask(16, 16, rng, rng.uniform(0.05, 0.95));
    const auto b = testing::random_mask(16, 16, rng, rng.uniform(0.05, 0.95));
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < 256; ++i) {
      const bool p = a.pixels[i], g = b.pixels[i];
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
      tn += !p && !g;
    }
    const double d = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    const double fg = tp / static_cast<double>(tp + fp + fn);
    const double bg = tn / static_cast<double>(tn + fp + fn);
    exact += dice(a, b) == d && miou(a, b) == 0.5 * (fg + bg) && iou_foreground(a, b) == fg;
    identity.see(std::abs(dice(a, b) - 2.0 * fg / (1.0 + fg)));
  }
  return {exact == 200 && identity.value <= 1e-9,
          fmt("%d/200 exact matches, Dice-IoU identity %.1e (<=1e-9)", exact, identity.value)};
}

// 10 ----------------------------------------------------------------------
Outcome determinism() {
  PhantomSpec ps;
  ps.height = ps.width = 64;
  ps.cell_radius_min = 5.0;
  ps.cell_radius_max = 8.0;
  ps.interference_radius_min = 4.0;
  ps.interference_radius_max = 8.0;
  ps.seed = 11;
  std::vector<SegmentationSample> samples;
  for (auto& p : generate_phantom_set(ps, 6, "train")) samples.push_back(std::move(p.sample));
  const auto ds = DatasetHandle::from_samples(Split::kTrain, samples);
  TrainConfig tc;
  tc.model.backbone = backbone::BackboneConfig::tiny();
  tc.resize_height = tc.resize_width = 64;
  tc.batch_size = 4;
  tc.epochs = 5;
  tc.augment_flips = true;
  tc.seed = 12;
  const auto run = [&] {
    const auto r = train(tc, ds);
    std::vector<double> losses;
    for (const auto& e : r.log) losses.push_back(e.loss);
    const auto model = model_from_checkpoint(r.checkpoint);
    const auto mask = model.predict_mask(replicate_gray(stack_images<float>(samples)), 0.5);
    return std::pair{losses, std::vector<uint8_t>(mask.values().begin(), mask.values().end())};
  };
  const auto a = run(), b = run();
  return {a.first == b.first && a.second == b.second && !a.first.empty(),
          fmt("%zu logged losses %s, %zu mask pixels %s", a.first.size(),
              a.first == b.first ? "identical" : "DIFFER", a.second.size(),
              a.second == b.second ? "identical" : "DIFFER")};
}

// 11 ----------------------------------------------------------------------
Outcome ablation_harness() {
  const fs::path root = scratch("ablation");
  cli::RunConfig rc = cli::resolve_run_config(
      cli::desk_defaults(), std::nullopt,
      cli::json{{"seed", 5},
                {"train", {{"epochs", 1}, {"batch_size", 2}, {"resize", {64, 64}}}},
                {"phantom",
                 {{"height", 64},
                  {"width", 64},
                  {"cell_radius_min", 5.0},
                  {"cell_radius_max", 8.0},
                  {"interference_radius_min", 4.0},
                  {"interference_radius_max", 8.0},
                  {"train_count", 2},
                  {"test_count", 2}}}});
  std::ostringstream log;
  cli::cmd_synth(rc, root / "data", false, log);
  const auto rep = cli::cmd_ablate(rc, root / "data", root / "out", log);

  const std::vector<std::string> names{"No.1", "No.2", "No.3", "No.4", "Ours"};
  const bool cif[] = {false, true, true, true, true};
  const bool ab[] = {false, false, true, false, true};
  const bool ftb[] = {false, false, false, true, true};
  std::vector<std::string> bad;
  if (rep.rows.size() != 5) bad.push_back(fmt("%zu rows", rep.rows.size()));
  std::set<int64_t> with_cif;
  for (size_t i = 0; i < std::min<size_t>(5, rep.rows.size()); ++i) {
    const auto& r = rep.rows[i];
    const auto has = [&](const std::string& s) {
      return std::all_of(r.architecture.begin(), r.architecture.end(),
                         [&](const std::string& line) { return line.find(s) != std::string::npos; });
    };
    const auto lacks = [&](const std::string& s) {
      return std::none_of(r.architecture.begin(), r.architecture.end(),
                          [&](const std::string& line) { return line.find(s) != std::string::npos; });
    };
    const bool wiring = r.name == names[i] && r.cif == cif[i] && r.ab == ab[i] && r.ftb == ftb[i] &&
                        r.architecture.size() == 3 && (cif[i] ? has("cif") : lacks("cif")) &&
                        (ab[i] ? has("-> ab") : lacks("-> ab")) &&
                        (ftb[i] ? has("ftb") : lacks("ftb")) && r.ok;
    if (!wiring) bad.push_back(r.name + (r.ok ? "" : " failed: " + r.error));
    if (cif[i]) with_cif.insert(r.parameters);
  }
  // AB and FTB are parameter-free; CIF is not.
  const bool counts = rep.rows.size() == 5 && with_cif.size() == 1 &&
                      rep.rows[0].parameters < *with_cif.begin();
  std::string detail = fmt("rows:");
  for (const auto& r : rep.rows) detail += " " + r.name + "=" + std::to_string(r.parameters);
  detail += counts ? " params" : " PARAM MISMATCH";
  for (const auto& b : bad) detail += "; bad " + b;
  return {bad.empty() && counts && fs::exists(root / "out" / "ablation.json"), detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace fdnet

int main(int argc, char** argv) {
  using namespace fdnet;
  cli::maybe_reexec_for_blas(argv);
  const std::vector<Criterion> all{
      {1, "FFT correctness", fft_correctness},
      {2, "FTB filter semantics", ftb_semantics},
      {3, "attention correctness", attention_correctness},
      {4, "loss values", loss_values},
      {5, "gradient integrity", gradient_integrity},
      {6, "learning-rate schedule", schedule},
      {7, "overfit smoke test", overfit},
      {8, "FTB helps under heavy interference", ftb_direction},
      {9, "metrics oracle", metrics_oracle},
      {10, "determinism", determinism},
      {11, "ablation harness", ablation_harness},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%2d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
