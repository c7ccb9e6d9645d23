#include "commands.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "greencod/cascade.h"
#include "greencod/complexity.h"
#include "greencod/error.h"
#include "greencod/metrics.h"
#include "greencod/parallel.h"
#include "greencod/run_config.h"
#include "greencod/tensorio.h"

namespace greencod::cli {
namespace {

namespace fs = std::filesystem;

// Flags shared by every subcommand that reads a config.
struct CommonFlags {
  std::string config;
  std::string preset;
  int threads = -1;
};

struct TrainFlags {
  std::string manifest, features, model;
  std::optional<int> trees, depth;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

struct PredictFlags {
  std::string model, manifest, features, out;
  bool native = false;
};

struct EvalFlags {
  std::string predictions, manifest, report;
  std::string e_mode;
  std::string f_threshold;
  std::optional<float> alpha, beta_sq;
};

struct ComplexityFlags {
  std::string model;
  bool no_backbone = false;
  bool json = false;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

config::RunConfig load_config(const CommonFlags& common) {
  config::RunConfig cfg;
  if (!common.config.empty()) cfg = config::load_run_config(common.config);
  if (!common.preset.empty()) {
    // Preset given on the command line replaces the config's trees/depth.
    const auto stages = config::preset_stage_configs(common.preset);
    for (int k = 0; k < cascade::kNumStages; ++k) {
      cfg.stages[k].train.num_trees = stages[k].train.num_trees;
      cfg.stages[k].train.max_depth = stages[k].train.max_depth;
    }
    cfg.preset = common.preset;
  }
  if (common.threads >= 0) cfg.threads = common.threads;
  return cfg;
}

int worker_count(const config::RunConfig& cfg) {
  return cfg.threads > 0 ? cfg.threads : hardware_threads();
}

fs::path pick(const std::string& flag, const fs::path& configured, const char* what) {
  if (!flag.empty()) return flag;
  if (configured.empty()) throw ConfigError(std::string("no ") + what + " given");
  return configured;
}

std::optional<fs::path> feature_base(const std::string& flag, const fs::path& configured) {
  if (!flag.empty()) return fs::path(flag);
  if (!configured.empty()) return configured;
  return std::nullopt;
}

int cmd_train(const CommonFlags& common, const TrainFlags& flags, std::ostream& out,
              std::ostream& err) {
  config::RunConfig cfg = load_config(common);
  for (auto& s : cfg.stages) {
    if (flags.trees) s.train.num_trees = *flags.trees;
    if (flags.depth) s.train.max_depth = *flags.depth;
    if (flags.seed) s.train.seed = *flags.seed;
  }
  cascade::validate_stage_configs(cfg.stages);
  const fs::path manifest_path = pick(flags.manifest, cfg.paths.train_manifest, "train manifest");
  const fs::path model_path = pick(flags.model, cfg.paths.model, "model path");

  const DatasetManifest manifest =
      load_manifest(manifest_path, feature_base(flags.features, cfg.paths.feature_dir));
  for (const auto& id : manifest.missing) err << "warning: missing files for " << id << '\n';

  cascade::TrainOptions options;
  options.threads = worker_count(cfg);
  if (flags.verbose) options.log = [&err](const std::string& line) { err << line << '\n'; };
  const cascade::TrainResult result = cascade::train_cascade(manifest, cfg.stages, options);
  for (const auto& s : result.skipped) err << "skipped " << s << '\n';

  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  cascade::save_cascade(result.model, model_path);
  for (int k = 0; k < cascade::kNumStages; ++k) {
    out << "stage " << (k + 1) << " MAE " << fixed(result.stage_mae[k]) << '\n';
  }
  out << "trained on " << result.trained_ids.size() << " images, model written to "
      << model_path.string() << '\n';
  return kOk;
}

int cmd_predict(const CommonFlags& common, const PredictFlags& flags, std::ostream& out,
                std::ostream& err) {
  const config::RunConfig cfg = load_config(common);
  const fs::path model_path = pick(flags.model, cfg.paths.model, "model path");
  const fs::path manifest_path = pick(flags.manifest, cfg.paths.test_manifest, "test manifest");
  const fs::path out_dir = pick(flags.out, cfg.paths.output_dir, "output directory");

  const cascade::CascadeModel model = cascade::load_cascade(model_path);
  const DatasetManifest manifest =
      load_manifest(manifest_path, feature_base(flags.features, cfg.paths.feature_dir));
  fs::create_directories(out_dir);
  if (flags.native) fs::create_directories(out_dir / "native");

  const int threads = worker_count(cfg);
  std::size_t written = 0;
  std::vector<std::string> failed;
  for (const ManifestEntry& e : manifest.entries) {
    try {
      const FeatureStack stack = read_feature_stack(e.feature_stack_path);
      const ProbabilityMap map = cascade::infer(model, stack, threads);
      write_mask(map, out_dir / (e.image_id + ".png"));
      if (flags.native) {
        if (e.original_height < 1 || e.original_width < 1) {
          throw InvariantError("no original size in manifest");
        }
        write_mask(cascade::upsample_prediction(map, e.original_height, e.original_width),
                   out_dir / "native" / (e.image_id + ".png"));
      }
      ++written;
    } catch (const Error& ex) {
      err << "failed " << e.image_id << ": " << ex.what() << '\n';
      failed.push_back(e.image_id);
    }
  }
  out << "wrote " << written << " masks to " << out_dir.string() << '\n';
  if (!failed.empty()) {
    out << failed.size() << " failed:";
    for (const auto& id : failed) out << ' ' << id;
    out << '\n';
    return kDataError;
  }
  return kOk;
}

int cmd_eval(const CommonFlags& common, const EvalFlags& flags, std::ostream& out,
             std::ostream& err) {
  config::RunConfig cfg = load_config(common);
  metrics::MetricConfig& m = cfg.metrics;
  if (flags.alpha) m.alpha = *flags.alpha;
  if (flags.beta_sq) m.beta_sq = *flags.beta_sq;
  if (flags.e_mode == "mean") {
    m.e_measure_mode = metrics::EMeasureMode::kMeanOverThresholds;
  } else if (flags.e_mode == "adaptive") {
    m.e_measure_mode = metrics::EMeasureMode::kAdaptive;
  }
  if (flags.f_threshold == "adaptive") {
    m.f_fixed_threshold.reset();
  } else if (!flags.f_threshold.empty()) {
    try {
      std::size_t used = 0;
      m.f_fixed_threshold = std::stof(flags.f_threshold, &used);
      if (used != flags.f_threshold.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw ConfigError("--f-threshold must be 'adaptive' or a number, got '" + flags.f_threshold +
                        "'");
    }
  }
  m.validate();

  const fs::path pred_dir = pick(flags.predictions, cfg.paths.output_dir, "prediction directory");
  const fs::path manifest_path = pick(flags.manifest, cfg.paths.test_manifest, "test manifest");
  const DatasetManifest manifest = load_manifest(manifest_path);
  const metrics::MetricsReport report =
      metrics::evaluate_dataset(pred_dir, manifest, m, worker_count(cfg));
  const fs::path report_path = flags.report.empty() ? pred_dir / "metrics.tsv" : fs::path(flags.report);
  metrics::write_report(report, report_path);

  out << "images " << report.per_image.size() << '\n'
      << "MAE " << fixed(report.mae) << '\n'
      << "S " << fixed(report.s_measure) << '\n'
      << "E " << fixed(report.e_measure) << '\n'
      << "F " << fixed(report.f_measure) << '\n'
      << "report written to " << report_path.string() << '\n';
  if (!report.missing.empty()) {
    err << "missing predictions for " << report.missing.size() << " images:";
    for (const auto& id : report.missing) err << ' ' << id;
    err << '\n';
    return kDataError;
  }
  return kOk;
}

int cmd_complexity(const CommonFlags& common, const std::string& positional,
                   const ComplexityFlags& flags, std::ostream& out) {
  CommonFlags c = common;
  if (!positional.empty()) {
    if (!c.preset.empty() && c.preset != positional) {
      throw ConfigError("preset given twice ('" + positional + "' and '" + c.preset + "')");
    }
    c.preset = positional;
  }
  if (c.preset.empty() && c.config.empty() && flags.model.empty()) {
    throw ConfigError("give a preset (" + config::preset_names() + "), --config or --model");
  }

  std::array<cascade::StageConfig, cascade::kNumStages> stages;
  std::optional<cascade::CascadeModel> model;
  if (!flags.model.empty()) {
    model = cascade::load_cascade(flags.model);
    stages = model->stages;
  } else {
    stages = load_config(c).stages;
  }
  const complexity::ComplexityReport report =
      complexity::cascade_complexity(stages, !flags.no_backbone);
  if (flags.json) {
    out << complexity::format_json(report) << '\n';
  } else {
    out << complexity::format_table(report);
  }
  if (model && !flags.json) {
    out << "\ntrained trees (actual / full-tree bound):\n";
    for (int k = 0; k < cascade::kNumStages; ++k) {
      const auto size = complexity::measure_trained_ensemble(model->ensembles[k]);
      out << "  XGBoost " << (k + 1) << ": params " << complexity::with_commas(size.params) << " / "
          << complexity::with_commas(size.params_upper_bound) << ", MACs/pixel "
          << complexity::with_commas(size.macs_per_pixel) << " / "
          << complexity::with_commas(size.macs_per_pixel_upper_bound) << '\n';
    }
  }
  return kOk;
}

void add_common(CLI::App* cmd, CommonFlags& common) {
  cmd->add_option("-c,--config", common.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("-p,--preset", common.preset,
                  "Variant preset: D3-1000, D3-10000, D6-1000, D6-10000");
  cmd->add_option("-j,--threads", common.threads, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"greencod: gradient-boosted camouflaged object segmentation"};
  app.name("greencod");
  app.require_subcommand(1);

  CommonFlags common;
  TrainFlags train;
  PredictFlags predict;
  EvalFlags eval;
  ComplexityFlags cx;
  std::string cx_preset;

  auto* train_cmd = app.add_subcommand("train", "Train the four-stage cascade");
  add_common(train_cmd, common);
  train_cmd->add_option("-m,--manifest", train.manifest, "Training manifest (TSV)");
  train_cmd->add_option("-f,--features", train.features, "Base directory for feature stacks");
  train_cmd->add_option("-o,--model", train.model, "Output model file (GCCM)");
  train_cmd->add_option("--trees", train.trees, "Trees per stage")->check(CLI::PositiveNumber);
  train_cmd->add_option("--depth", train.depth, "Maximum tree depth")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train.seed, "Training seed");
  train_cmd->add_flag("-v,--verbose", train.verbose, "Log progress to stderr");

  auto* predict_cmd = app.add_subcommand("predict", "Write 168x168 probability masks");
  add_common(predict_cmd, common);
  predict_cmd->add_option("--model", predict.model, "Trained model file (GCCM)");
  predict_cmd->add_option("-m,--manifest", predict.manifest, "Test manifest (TSV)");
  predict_cmd->add_option("-f,--features", predict.features, "Base directory for feature stacks");
  predict_cmd->add_option("-o,--out", predict.out, "Output directory for PNG masks");
  predict_cmd->add_flag("--native", predict.native,
                        "Also write masks upsampled to the original size under <out>/native");

  auto* eval_cmd = app.add_subcommand("eval", "Score predicted masks against ground truth");
  add_common(eval_cmd, common);
  eval_cmd->add_option("-P,--predictions", eval.predictions, "Directory of <image_id>.png masks");
  eval_cmd->add_option("-m,--manifest", eval.manifest, "Manifest with ground-truth masks");
  eval_cmd->add_option("-r,--report", eval.report, "Report file (default <predictions>/metrics.tsv)");
  eval_cmd->add_option("--e-mode", eval.e_mode, "E-measure binarization: mean or adaptive")
      ->check(CLI::IsMember({"mean", "adaptive"}));
  eval_cmd->add_option("--f-threshold", eval.f_threshold,
                       "F-measure threshold: 'adaptive' or a fixed value in [0,1]");
  eval_cmd->add_option("--alpha", eval.alpha, "S-measure region/object balance");
  eval_cmd->add_option("--beta-sq", eval.beta_sq, "F-measure beta squared");

  auto* cx_cmd = app.add_subcommand("complexity", "Report parameters and MACs");
  add_common(cx_cmd, common);
  cx_cmd->add_option("variant", cx_preset, "Preset name (same as --preset)");
  cx_cmd->add_option("--model", cx.model, "Report a trained model file instead of a preset");
  cx_cmd->add_flag("--no-backbone", cx.no_backbone, "Exclude the EfficientNetB4 row");
  cx_cmd->add_flag("--json", cx.json, "Machine-readable output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train_cmd) return cmd_train(common, train, out, err);
    if (*predict_cmd) return cmd_predict(common, predict, out, err);
    if (*eval_cmd) return cmd_eval(common, eval, out, err);
    return cmd_complexity(common, cx_preset, cx, out);
  } catch (const ConfigError& e) {
    err << "greencod: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    err << "greencod: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "greencod: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "greencod: internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace greencod::cli
