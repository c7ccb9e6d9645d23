#include "greencod/run_config.h"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "greencod/error.h"

namespace greencod::config {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

void apply_train(const json& obj, gbdt::TrainConfig& t, const std::string& where) {
  reject_unknown(obj,
                 {"num_trees", "max_depth", "learning_rate", "lambda_l2", "gamma_min_gain",
                  "min_child_hessian", "histogram_bins", "row_subsample", "seed"},
                 where);
  if (obj.contains("num_trees")) t.num_trees = get_as<int>(obj, "num_trees", where);
  if (obj.contains("max_depth")) t.max_depth = get_as<int>(obj, "max_depth", where);
  if (obj.contains("learning_rate")) t.learning_rate = get_as<float>(obj, "learning_rate", where);
  if (obj.contains("lambda_l2")) t.lambda_l2 = get_as<float>(obj, "lambda_l2", where);
  if (obj.contains("gamma_min_gain")) t.gamma_min_gain = get_as<float>(obj, "gamma_min_gain", where);
  if (obj.contains("min_child_hessian")) {
    t.min_child_hessian = get_as<float>(obj, "min_child_hessian", where);
  }
  if (obj.contains("histogram_bins")) t.histogram_bins = get_as<int>(obj, "histogram_bins", where);
  if (obj.contains("row_subsample")) t.row_subsample = get_as<float>(obj, "row_subsample", where);
  if (obj.contains("seed")) t.seed = get_as<std::uint64_t>(obj, "seed", where);
}

std::filesystem::path resolve(const json& obj, const std::string& key,
                              const std::filesystem::path& base) {
  if (!obj.contains(key)) return {};
  std::filesystem::path p(get_as<std::string>(obj, key, "paths"));
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> kPresets = {
      {"D3-1000", 1000, 3},
      {"D3-10000", 10000, 3},
      {"D6-1000", 1000, 6},
      {"D6-10000", 10000, 6},
  };
  return kPresets;
}

std::optional<Preset> find_preset(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

std::string preset_names() {
  std::string out;
  for (const auto& p : presets()) {
    if (!out.empty()) out += ", ";
    out += p.name;
  }
  return out;
}

std::array<cascade::StageConfig, cascade::kNumStages> preset_stage_configs(std::string_view name) {
  const auto preset = find_preset(name);
  if (!preset) {
    throw ConfigError("unknown preset '" + std::string(name) + "' (valid: " + preset_names() + ")");
  }
  gbdt::TrainConfig train;
  train.num_trees = preset->num_trees;
  train.max_depth = preset->max_depth;
  return cascade::default_stage_configs(train);
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root,
                 {"preset", "train", "stages", "nc_window", "pixel_fraction", "metrics", "paths",
                  "threads"},
                 "config");

  RunConfig cfg;
  if (root.contains("preset")) {
    cfg.preset = get_as<std::string>(root, "preset", "config");
    cfg.stages = preset_stage_configs(cfg.preset);
  }
  if (root.contains("train")) {
    for (auto& s : cfg.stages) apply_train(root["train"], s.train, "train");
  }
  if (root.contains("stages")) {
    const json& stages = root["stages"];
    if (!stages.is_array() || stages.size() != cascade::kNumStages) {
      throw ConfigError("stages must be an array of 4 objects");
    }
    for (int k = 0; k < cascade::kNumStages; ++k) {
      apply_train(stages[k], cfg.stages[k].train, "stages[" + std::to_string(k) + "]");
    }
  }
  if (root.contains("nc_window")) {
    const int window = get_as<int>(root, "nc_window", "config");
    for (auto& s : cfg.stages) s.nc_window = window;
  }
  if (root.contains("pixel_fraction")) {
    const auto fractions = get_as<std::vector<float>>(root, "pixel_fraction", "config");
    if (fractions.size() != cascade::kNumStages) {
      throw ConfigError("pixel_fraction must list 4 values");
    }
    for (int k = 0; k < cascade::kNumStages; ++k) cfg.stages[k].pixel_fraction = fractions[k];
  }
  if (root.contains("metrics")) {
    const json& m = root["metrics"];
    reject_unknown(m, {"alpha", "beta_sq", "e_measure_mode", "f_threshold"}, "metrics");
    if (m.contains("alpha")) cfg.metrics.alpha = get_as<float>(m, "alpha", "metrics");
    if (m.contains("beta_sq")) cfg.metrics.beta_sq = get_as<float>(m, "beta_sq", "metrics");
    if (m.contains("e_measure_mode")) {
      const auto mode = get_as<std::string>(m, "e_measure_mode", "metrics");
      if (mode == "mean") {
        cfg.metrics.e_measure_mode = metrics::EMeasureMode::kMeanOverThresholds;
      } else if (mode == "adaptive") {
        cfg.metrics.e_measure_mode = metrics::EMeasureMode::kAdaptive;
      } else {
        throw ConfigError("metrics.e_measure_mode must be 'mean' or 'adaptive'");
      }
    }
    if (m.contains("f_threshold")) {
      const json& f = m["f_threshold"];
      if (f.is_string() && f.get<std::string>() == "adaptive") {
        cfg.metrics.f_fixed_threshold.reset();
      } else if (f.is_number()) {
        cfg.metrics.f_fixed_threshold = f.get<float>();
      } else {
        throw ConfigError("metrics.f_threshold must be 'adaptive' or a number");
      }
    }
  }
  if (root.contains("paths")) {
    const json& p = root["paths"];
    reject_unknown(p, {"train_manifest", "test_manifest", "feature_dir", "output_dir", "model"},
                   "paths");
    cfg.paths.train_manifest = resolve(p, "train_manifest", base_dir);
    cfg.paths.test_manifest = resolve(p, "test_manifest", base_dir);
    cfg.paths.feature_dir = resolve(p, "feature_dir", base_dir);
    cfg.paths.output_dir = resolve(p, "output_dir", base_dir);
    cfg.paths.model = resolve(p, "model", base_dir);
  }
  if (root.contains("threads")) {
    cfg.threads = get_as<int>(root, "threads", "config");
    if (cfg.threads < 0) throw ConfigError("threads must be >= 0");
  }
  cascade::validate_stage_configs(cfg.stages);
  cfg.metrics.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

}  // namespace greencod::config
