#ifndef GREENCOD_RUN_CONFIG_H_
#define GREENCOD_RUN_CONFIG_H_

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "greencod/cascade.h"
#include "greencod/metrics.h"

namespace greencod::config {

// Named trees/depth variants: D3-1000, D3-10000, D6-1000, D6-10000.
struct Preset {
  std::string name;
  int num_trees = 0;
  int max_depth = 0;
};

const std::vector<Preset>& presets();
std::optional<Preset> find_preset(std::string_view name);
// "D3-1000, D3-10000, D6-1000, D6-10000"
std::string preset_names();

// Default stage schedule with the preset's trees and depth on every stage.
// Throws ConfigError naming the valid presets for an unknown name.
std::array<cascade::StageConfig, cascade::kNumStages> preset_stage_configs(std::string_view name);

struct RunPaths {
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path feature_dir;
  std::filesystem::path output_dir;
  std::filesystem::path model;
};

struct RunConfig {
  std::string preset;
  std::array<cascade::StageConfig, cascade::kNumStages> stages =
      cascade::default_stage_configs();
  metrics::MetricConfig metrics;
  RunPaths paths;
  // 0 selects every hardware thread.
  int threads = 0;
};

// JSON layout (every key optional, unknown keys rejected):
// {
//   "preset": "D3-1000",
//   "train": { "num_trees", "max_depth", "learning_rate", "lambda_l2",
//              "gamma_min_gain", "min_child_hessian", "histogram_bins",
//              "row_subsample", "seed" },          // applied to all stages
//   "stages": [ {same keys as "train"} x 4 ],      // per-stage overrides
//   "nc_window": 19,
//   "pixel_fraction": [1.0, 1.0, 0.25, 0.25],
//   "metrics": { "alpha", "beta_sq", "e_measure_mode": "mean"|"adaptive",
//                "f_threshold": "adaptive" | number },
//   "paths": { "train_manifest", "test_manifest", "feature_dir",
//              "output_dir", "model" },            // relative to base_dir
//   "threads": 0
// }
RunConfig parse_run_config(std::string_view json_text,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace greencod::config

#endif  // GREENCOD_RUN_CONFIG_H_
