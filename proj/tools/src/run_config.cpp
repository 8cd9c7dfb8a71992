// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FDNet Authors

#include "run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

namespace fdnet::cli {
namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename V>
void read_if(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for " + where + "." + key + ": " + j.at(key).dump());
  }
}

PhantomSpec phantom_from_json(const json& j, int& train_count, int& test_count) {
  reject_unknown(j,
                 {"height", "width", "cell_count", "interference_count", "cell_contrast",
                  "interference_contrast", "cell_radius_min", "cell_radius_max",
                  "interference_radius_min", "interference_radius_max", "overlap_threshold",
                  "background_amplitude", "noise_sigma", "illumination_drift", "train_count",
                  "test_count"},
                 "phantom");
  PhantomSpec s;
  const std::string w = "phantom";
  read_if(j, "height", s.height, w);
  read_if(j, "width", s.width, w);
  read_if(j, "cell_count", s.cell_count, w);
  read_if(j, "interference_count", s.interference_count, w);
  read_if(j, "cell_contrast", s.cell_contrast, w);
  read_if(j, "interference_contrast", s.interference_contrast, w);
  read_if(j, "cell_radius_min", s.cell_radius_min, w);
  read_if(j, "cell_radius_max", s.cell_radius_max, w);
  read_if(j, "interference_radius_min", s.interference_radius_min, w);
  read_if(j, "interference_radius_max", s.interference_radius_max, w);
  read_if(j, "overlap_threshold", s.overlap_threshold, w);
  read_if(j, "background_amplitude", s.background_amplitude, w);
  read_if(j, "noise_sigma", s.noise_sigma, w);
  read_if(j, "illumination_drift", s.illumination_drift, w);
  read_if(j, "train_count", train_count, w);
  read_if(j, "test_count", test_count, w);
  if (train_count < 0 || test_count < 0) throw ConfigError("phantom counts must be >= 0");
  s.validate();
  return s;
}

}  // namespace

json phantom_to_json(const PhantomSpec& s) {
  return json{{"height", s.height},
              {"width", s.width},
              {"cell_count", s.cell_count},
              {"interference_count", s.interference_count},
              {"cell_contrast", s.cell_contrast},
              {"interference_contrast", s.interference_contrast},
              {"cell_radius_min", s.cell_radius_min},
              {"cell_radius_max", s.cell_radius_max},
              {"interference_radius_min", s.interference_radius_min},
              {"interference_radius_max", s.interference_radius_max},
              {"overlap_threshold", s.overlap_threshold},
              {"background_amplitude", s.background_amplitude},
              {"noise_sigma", s.noise_sigma},
              {"illumination_drift", s.illumination_drift}};
}

json RunConfig::effective() const {
  json t = json::parse(train_config_to_json(train));
  json model = t.at("model");
  t.erase("model");
  t.erase("seed");
  json p = phantom_to_json(phantom);
  p["train_count"] = train_count;
  p["test_count"] = test_count;
  return json{{"seed", seed}, {"train", t}, {"model", model}, {"phantom", p},
              {"eval", {{"threshold", threshold}}}};
}

json desk_defaults() {
  return json{{"seed", 0},
              {"train", {{"epochs", 40}, {"resize", {256, 256}}}},
              {"model", {{"backbone", {{"variant", "tiny"}}}}},
              {"phantom", {{"height", 256}, {"width", 256}}}};
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

RunConfig resolve_run_config(const json& defaults, const std::optional<json>& file,
                             const json& overrides) {
  json merged = defaults;
  if (file) {
    if (!file->is_object()) throw ConfigError("config file must hold a JSON object");
    merged.merge_patch(*file);
  }
  merged.merge_patch(overrides);
  reject_unknown(merged, {"seed", "train", "model", "phantom", "eval"}, "config");

  RunConfig rc;
  read_if(merged, "seed", rc.seed, "config");

  json t = merged.value("train", json::object());
  if (!t.is_object()) throw ConfigError("train must be an object");
  for (const char* k : {"seed", "model", "provenance"}) {
    if (t.contains(k)) throw ConfigError(std::string("unknown key '") + k + "' in train");
  }
  t["seed"] = rc.seed;
  if (merged.contains("model")) t["model"] = merged.at("model");
  rc.train = train_config_from_json(t.dump());

  rc.phantom = phantom_from_json(merged.value("phantom", json::object()), rc.train_count,
                                 rc.test_count);
  rc.phantom.seed = rc.seed;

  const json ev = merged.value("eval", json::object());
  reject_unknown(ev, {"threshold"}, "eval");
  read_if(ev, "threshold", rc.threshold, "eval");
  if (!(rc.threshold > 0.0 && rc.threshold < 1.0)) {
    throw ConfigError("eval.threshold must lie in (0,1)");
  }
  return rc;
}

}  // namespace fdnet::cli
