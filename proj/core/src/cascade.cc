#include "greencod/cascade.h"

#include <algorithm>
#include <cmath>
#include <optional>

#include "greencod/error.h"
#include "greencod/metrics.h"
#include "greencod/parallel.h"
#include "resize_detail.h"

namespace greencod::cascade {
namespace {

constexpr std::size_t kPixelChunk = 1024;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_hash(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t h = mix64(mix64(mix64(a) ^ b) ^ c);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void check_backbone(const FeatureStack& stack) {
  validate_feature_stack(stack);
  if (stack.total_channels() != kBackboneChannels) {
    throw InvariantError("feature stack '" + stack.source_image_id + "' carries " +
                         std::to_string(stack.total_channels()) + " channels, expected " +
                         std::to_string(kBackboneChannels));
  }
}

void check_window(int window) {
  if (window < 1 || window % 2 == 0) {
    throw InvariantError("neighborhood window must be odd and >= 1, got " +
                         std::to_string(window));
  }
}

// Per-tensor bilinear taps for one target resolution.
class BackboneSampler {
 public:
  BackboneSampler(const FeatureStack& stack, int resolution) : stack_(stack) {
    for (const auto& t : stack.tensors) {
      ys_.push_back(detail::bilinear_axis(t.height, resolution));
      xs_.push_back(detail::bilinear_axis(t.width, resolution));
    }
  }

  void sample(int y, int x, float* out) const {
    for (std::size_t i = 0; i < stack_.tensors.size(); ++i) {
      const FeatureTensor& t = stack_.tensors[i];
      const auto& ty = ys_[i][y];
      const auto& tx = xs_[i][x];
      const std::size_t c = static_cast<std::size_t>(t.channels);
      const float* base = t.data.data();
      const float* a = base + (static_cast<std::size_t>(ty.i0) * t.width + tx.i0) * c;
      const float* b = base + (static_cast<std::size_t>(ty.i0) * t.width + tx.i1) * c;
      const float* d = base + (static_cast<std::size_t>(ty.i1) * t.width + tx.i0) * c;
      const float* e = base + (static_cast<std::size_t>(ty.i1) * t.width + tx.i1) * c;
      for (std::size_t k = 0; k < c; ++k) {
        const float top = detail::lerp(a[k], b[k], tx.w);
        const float bottom = detail::lerp(d[k], e[k], tx.w);
        out[k] = detail::lerp(top, bottom, ty.w);
      }
      out += c;
    }
  }

 private:
  const FeatureStack& stack_;
  std::vector<std::vector<detail::AxisTap>> ys_;
  std::vector<std::vector<detail::AxisTap>> xs_;
};

void fill_neighborhood(const ProbabilityMap& map, int window, int y, int x, float* out) {
  const int r = window / 2;
  for (int dy = -r; dy <= r; ++dy) {
    const int yy = std::clamp(y + dy, 0, map.height - 1);
    for (int dx = -r; dx <= r; ++dx) {
      const int xx = std::clamp(x + dx, 0, map.width - 1);
      *out++ = map.at(yy, xx);
    }
  }
}

// Builds [backbone | neighborhood] rows for the pixels of one image at one
// stage. `context` is the previous stage map already at the stage resolution.
class StageRows {
 public:
  StageRows(const StageConfig& config, const FeatureStack& stack,
            const ProbabilityMap* context)
      : config_(config), sampler_(stack, config.resolution), context_(context) {}

  void fill(std::uint32_t pixel, float* row) const {
    const int y = static_cast<int>(pixel) / config_.resolution;
    const int x = static_cast<int>(pixel) % config_.resolution;
    sampler_.sample(y, x, row);
    if (config_.uses_nc) fill_neighborhood(*context_, config_.nc_window, y, x, row + kBackboneChannels);
  }

 private:
  const StageConfig& config_;
  BackboneSampler sampler_;
  const ProbabilityMap* context_;
};

void log_line(const TrainOptions& options, const std::string& line) {
  if (options.log) options.log(line);
}

}  // namespace

RowMatrix neighborhood_construct(const ProbabilityMap& map, int window) {
  check_window(window);
  if (map.height <= 0 || map.width <= 0) throw InvariantError("neighborhood_construct: empty map");
  RowMatrix rows(static_cast<std::size_t>(map.height) * map.width,
                 static_cast<std::size_t>(window) * window);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      fill_neighborhood(map, window, y, x,
                        rows.row(static_cast<std::size_t>(y) * map.width + x).data());
    }
  }
  return rows;
}

RowMatrix assemble_backbone_features(const FeatureStack& stack, int resolution) {
  check_backbone(stack);
  if (resolution <= 0) throw InvariantError("assemble_backbone_features: zero resolution");
  BackboneSampler sampler(stack, resolution);
  RowMatrix rows(static_cast<std::size_t>(resolution) * resolution, kBackboneChannels);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      sampler.sample(y, x, rows.row(static_cast<std::size_t>(y) * resolution + x).data());
    }
  }
  return rows;
}

std::array<StageConfig, kNumStages> default_stage_configs(const gbdt::TrainConfig& train) {
  std::array<StageConfig, kNumStages> configs;
  for (int k = 0; k < kNumStages; ++k) {
    StageConfig& c = configs[k];
    c.stage_index = k + 1;
    c.resolution = kStageResolutions[k];
    c.uses_nc = k > 0;
    c.nc_window = kDefaultWindow;
    c.pixel_fraction = k >= 2 ? 0.25f : 1.0f;
    c.train = train;
  }
  return configs;
}

void validate_stage_configs(std::span<const StageConfig> configs) {
  if (configs.size() != kNumStages) {
    throw ConfigError("cascade needs exactly 4 stage configs, got " +
                      std::to_string(configs.size()));
  }
  for (int k = 0; k < kNumStages; ++k) {
    const StageConfig& c = configs[k];
    const std::string where = "stage " + std::to_string(k + 1) + ": ";
    if (c.stage_index != k + 1) throw ConfigError(where + "stage_index out of order");
    if (c.resolution != kStageResolutions[k]) {
      throw ConfigError(where + "resolution must be " + std::to_string(kStageResolutions[k]));
    }
    if (c.uses_nc != (k > 0)) {
      throw ConfigError(where + "neighborhood features are used exactly on stages 2-4");
    }
    if (c.nc_window < 1 || c.nc_window % 2 == 0) {
      throw ConfigError(where + "nc_window must be odd and >= 1");
    }
    if (!(c.pixel_fraction > 0.0f && c.pixel_fraction <= 1.0f)) {
      throw ConfigError(where + "pixel_fraction must be in (0, 1]");
    }
    c.train.validate();
  }
}

int stage_feature_count(const StageConfig& config) {
  return kBackboneChannels + (config.uses_nc ? config.nc_window * config.nc_window : 0);
}

ProbabilityMap run_stage(const StageConfig& config, const gbdt::TreeEnsemble& ensemble,
                         const FeatureStack& stack, const ProbabilityMap* previous,
                         int threads) {
  check_backbone(stack);
  const int nf = stage_feature_count(config);
  if (ensemble.num_features != static_cast<std::uint32_t>(nf)) {
    throw InvariantError("stage " + std::to_string(config.stage_index) +
                         ": feature-dimension mismatch (model expects " +
                         std::to_string(ensemble.num_features) + ", stage builds " +
                         std::to_string(nf) + ")");
  }
  const int res = config.resolution;
  std::optional<ProbabilityMap> context;
  if (config.stage_index > 1) {
    if (previous == nullptr) throw InvariantError("stages 2-4 need the previous stage map");
    context = resize_bilinear(*previous, res, res);
  }
  const StageRows builder(config, stack, context ? &*context : nullptr);

  ProbabilityMap out(res, res);
  const std::size_t pixels = static_cast<std::size_t>(res) * res;
  const std::size_t chunks = (pixels + kPixelChunk - 1) / kPixelChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * kPixelChunk;
    const std::size_t end = std::min(pixels, begin + kPixelChunk);
    RowMatrix rows(end - begin, static_cast<std::size_t>(nf));
    std::vector<float> base;
    for (std::size_t p = begin; p < end; ++p) {
      builder.fill(static_cast<std::uint32_t>(p), rows.row(p - begin).data());
      if (context) base.push_back(logit_clamped(context->values[p]));
    }
    const auto margins = gbdt::predict_margin(ensemble, rows, base, 1);
    for (std::size_t p = begin; p < end; ++p) out.values[p] = gbdt::sigmoid(margins[p - begin]);
  });
  return out;
}

std::array<ProbabilityMap, kNumStages> infer_stages(const CascadeModel& model,
                                                    const FeatureStack& stack, int threads) {
  std::array<ProbabilityMap, kNumStages> maps;
  for (int k = 0; k < kNumStages; ++k) {
    maps[k] = run_stage(model.stages[k], model.ensembles[k], stack,
                        k > 0 ? &maps[k - 1] : nullptr, threads);
  }
  return maps;
}

ProbabilityMap infer(const CascadeModel& model, const FeatureStack& stack, int threads) {
  return std::move(infer_stages(model, stack, threads)[kNumStages - 1]);
}

TrainResult train_cascade(const DatasetManifest& manifest,
                          std::span<const StageConfig> configs, const TrainOptions& options) {
  validate_stage_configs(configs);
  if (manifest.entries.empty()) throw InvariantError("train_cascade: empty manifest");

  TrainResult result;
  std::vector<const ManifestEntry*> images;
  std::vector<std::array<GroundTruthMask, kNumStages>> targets;
  for (const ManifestEntry& e : manifest.entries) {
    FeatureStack stack;
    GroundTruthMask mask;
    try {
      stack = read_feature_stack(e.feature_stack_path);
      mask = read_mask(e.gt_mask_path);
    } catch (const IoError& err) {
      result.skipped.push_back(e.image_id + ": " + err.what());
      continue;
    } catch (const FormatError& err) {
      result.skipped.push_back(e.image_id + ": " + err.what());
      continue;
    }
    if (stack.total_channels() != kBackboneChannels) {
      throw InvariantError(e.image_id + ": feature-dimension mismatch (" +
                           std::to_string(stack.total_channels()) + " channels, expected " +
                           std::to_string(kBackboneChannels) + ")");
    }
    std::array<GroundTruthMask, kNumStages> t;
    for (int k = 0; k < kNumStages; ++k) t[k] = downsample_gt(mask, kStageResolutions[k]);
    images.push_back(&e);
    targets.push_back(std::move(t));
    result.trained_ids.push_back(e.image_id);
  }
  for (const auto& s : result.skipped) log_line(options, "skipped " + s);
  if (images.empty()) throw IoError("train_cascade: no readable manifest entries");

  const std::size_t n = images.size();
  std::vector<ProbabilityMap> previous(n);
  if (options.keep_stage_maps) result.stage_maps.resize(n);

  for (int k = 0; k < kNumStages; ++k) {
    const StageConfig& cfg = configs[k];
    result.model.stages[k] = cfg;
    const int res = cfg.resolution;
    const std::size_t pixels = static_cast<std::size_t>(res) * res;
    const auto nf = static_cast<std::size_t>(stage_feature_count(cfg));

    std::vector<ProbabilityMap> context(n);
    if (k > 0) {
      for (std::size_t i = 0; i < n; ++i) context[i] = resize_bilinear(previous[i], res, res);
    }

    // Training pixels per image.
    std::vector<std::vector<std::uint32_t>> train_px(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::uint32_t p = 0; p < pixels; ++p) {
        if (cfg.pixel_fraction >= 1.0f ||
            unit_hash(cfg.train.seed ^ 0xC0DEull, (static_cast<std::uint64_t>(k) << 32) | i, p) <
                cfg.pixel_fraction) {
          train_px[i].push_back(p);
        }
      }
      total += train_px[i].size();
    }
    if (total == 0) throw InvariantError("stage " + std::to_string(k + 1) + ": no training rows");

    // Bin edges from a bounded sample of the training rows.
    const double keep = total <= options.sketch_rows
                            ? 1.0
                            : static_cast<double>(options.sketch_rows) / static_cast<double>(total);
    std::vector<std::vector<std::uint32_t>> sketch_px(n);
    std::size_t sketch_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::uint32_t p : train_px[i]) {
        if (keep >= 1.0 ||
            unit_hash(cfg.train.seed ^ 0x5EEDull, (static_cast<std::uint64_t>(k) << 32) | i, p) < keep) {
          sketch_px[i].push_back(p);
        }
      }
      sketch_total += sketch_px[i].size();
    }
    if (sketch_total == 0) {
      sketch_px[0].push_back(train_px[0].empty() ? 0 : train_px[0][0]);
      sketch_total = 1;
    }

    gbdt::BinCuts cuts;
    {
      RowMatrix sample(sketch_total, nf);
      std::size_t r = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sketch_px[i].empty()) continue;
        const FeatureStack stack = read_feature_stack(images[i]->feature_stack_path);
        const StageRows builder(cfg, stack, k > 0 ? &context[i] : nullptr);
        for (std::uint32_t p : sketch_px[i]) builder.fill(p, sample.row(r++).data());
      }
      cuts = gbdt::BinCuts::from_rows(sample, cfg.train.histogram_bins);
    }
    log_line(options, "stage " + std::to_string(k + 1) + ": bin edges from " +
                          std::to_string(sketch_total) + " sampled rows");

    gbdt::BinnedMatrix binned(total, nf);
    std::vector<float> stage_targets(total);
    std::vector<float> base_margin(k > 0 ? total : 0);
    {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const FeatureStack stack = read_feature_stack(images[i]->feature_stack_path);
        const StageRows builder(cfg, stack, k > 0 ? &context[i] : nullptr);
        const auto& px = train_px[i];
        const std::size_t chunks = (px.size() + kPixelChunk - 1) / kPixelChunk;
        parallel_for(chunks, options.threads, [&](std::size_t c) {
          constexpr std::size_t kBlock = 64;
          std::vector<float> block(kBlock * nf);
          const std::size_t end = std::min(px.size(), (c + 1) * kPixelChunk);
          for (std::size_t j0 = c * kPixelChunk; j0 < end; j0 += kBlock) {
            const std::size_t count = std::min(kBlock, end - j0);
            for (std::size_t j = 0; j < count; ++j) builder.fill(px[j0 + j], &block[j * nf]);
            binned.set_rows(offset + j0, count, std::span<const float>(block).first(count * nf),
                            cuts);
          }
        });
        for (std::size_t j = 0; j < px.size(); ++j) {
          stage_targets[offset + j] = targets[i][k].values[px[j]];
          if (k > 0) base_margin[offset + j] = logit_clamped(context[i].values[px[j]]);
        }
        offset += px.size();
      }
    }

    log_line(options, "stage " + std::to_string(k + 1) + ": " + std::to_string(total) +
                          " rows x " + std::to_string(nf) + " features, " +
                          std::to_string(cfg.train.num_trees) + " trees depth " +
                          std::to_string(cfg.train.max_depth));
    gbdt::FitOptions fit_options;
    fit_options.threads = options.threads;
    result.model.ensembles[k] =
        gbdt::fit_ensemble(binned, cuts, stage_targets, base_margin, cfg.train, fit_options);
    log_line(options, "stage " + std::to_string(k + 1) + ": ensemble fitted");
    binned = gbdt::BinnedMatrix();

    double mae_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const FeatureStack stack = read_feature_stack(images[i]->feature_stack_path);
      ProbabilityMap map = run_stage(cfg, result.model.ensembles[k], stack,
                                     k > 0 ? &previous[i] : nullptr, options.threads);
      const GroundTruthMask gt = read_mask(images[i]->gt_mask_path);
      mae_sum += metrics::mae(upsample_prediction(map, gt.height, gt.width), gt);
      if (options.keep_stage_maps) result.stage_maps[i][k] = map;
      previous[i] = std::move(map);
    }
    log_line(options, "stage " + std::to_string(k + 1) + ": forward pass done");
    result.stage_mae[k] = mae_sum / static_cast<double>(n);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", result.stage_mae[k]);
    log_line(options, "stage " + std::to_string(k + 1) + " training MAE " + buf);
  }
  return result;
}

}  // namespace greencod::cascade
