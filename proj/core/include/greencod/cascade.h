#ifndef GREENCOD_CASCADE_H_
#define GREENCOD_CASCADE_H_

// Four-stage coarse-to-fine segmentation cascade over backbone feature maps.
//
// Stage k runs at a fixed resolution (42, 42, 84, 168). Every pixel's row is
// the 1152 backbone channels resized to that resolution; stages 2-4 append the
// window x window neighborhood of the previous stage's probability map
// (resized to the current resolution) and start boosting from that map's
// clamped logit.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "greencod/gbdt.h"
#include "greencod/tensorio.h"
#include "greencod/types.h"

namespace greencod::cascade {

inline constexpr int kNumStages = 4;
inline constexpr std::array<int, kNumStages> kStageResolutions = {42, 42, 84, 168};
inline constexpr int kDefaultWindow = 19;
inline constexpr int kOutputResolution = 168;

// Bilinear resize with half-pixel centers (align_corners = false). Source
// coordinates below 0 clamp to 0; the last row/column replicates.
Grid resize_bilinear(GridView input, int out_h, int out_w);
ProbabilityMap resize_bilinear(const ProbabilityMap& map, int out_h, int out_w);

// Area-average pooling to resolution x resolution. Each output value is the
// overlap-weighted mean of the source pixels it covers.
GroundTruthMask downsample_gt(const GroundTruthMask& mask, int resolution);

// Bilinear upsample to the original image size, clamped to [0,1].
ProbabilityMap upsample_prediction(const ProbabilityMap& map, int out_h, int out_w);

// One row per pixel (row-major pixel order) holding the window x window
// neighborhood flattened row-major; out-of-range positions replicate the
// nearest edge pixel. Throws InvariantError for an even or non-positive window.
RowMatrix neighborhood_construct(const ProbabilityMap& map, int window = kDefaultWindow);

// One row per pixel of a resolution x resolution grid holding every tensor
// resized to that grid, channels concatenated in stack order. Throws
// InvariantError unless the stack carries exactly 1152 channels.
RowMatrix assemble_backbone_features(const FeatureStack& stack, int resolution);

// ln(p/(1-p)) with p clamped to [1e-6, 1-1e-6].
inline float logit_clamped(float p) { return gbdt::logit_clamped(p); }

struct StageConfig {
  int stage_index = 1;
  int resolution = 42;
  bool uses_nc = false;
  int nc_window = kDefaultWindow;
  // Fraction of each image's pixels used as training rows.
  float pixel_fraction = 1.0f;
  gbdt::TrainConfig train;

  bool operator==(const StageConfig&) const = default;
};

// Stage schedule with `train` applied to every stage: NC on stages 2-4, and
// 25% pixel subsampling on the two high-resolution stages.
std::array<StageConfig, kNumStages> default_stage_configs(const gbdt::TrainConfig& train = {});

// Throws ConfigError unless the configs follow the fixed stage schedule.
void validate_stage_configs(std::span<const StageConfig> configs);

// Features per row consumed by the stage: 1152 (+ window^2 with NC).
int stage_feature_count(const StageConfig& config);

struct CascadeModel {
  std::array<StageConfig, kNumStages> stages;
  std::array<gbdt::TreeEnsemble, kNumStages> ensembles;
  int feature_channel_count = kBackboneChannels;

  bool operator==(const CascadeModel&) const = default;
};

// GCCM container:
//   "GCCM" | version u32 | feature_channel_count u32 | stage_count u32 |
//   per stage: stage_index u32, resolution u32, uses_nc u8, nc_window u32,
//              pixel_fraction f32, gcte_size u64, GCTE bytes
std::vector<std::uint8_t> serialize(const CascadeModel& model);
CascadeModel deserialize(std::span<const std::uint8_t> bytes);
void save_cascade(const CascadeModel& model, const std::filesystem::path& path);
CascadeModel load_cascade(const std::filesystem::path& path);

struct TrainOptions {
  int threads = 1;
  // Cap on rows used to place histogram bin edges per stage.
  std::size_t sketch_rows = 32768;
  bool keep_stage_maps = false;
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  CascadeModel model;
  // Mean over training images of MAE(stage map upsampled to GT size, GT).
  std::array<double, kNumStages> stage_mae{};
  std::vector<std::string> trained_ids;
  // image_id plus reason for every manifest entry that could not be read.
  std::vector<std::string> skipped;
  // Per trained image, the four stage maps (only with keep_stage_maps).
  std::vector<std::array<ProbabilityMap, kNumStages>> stage_maps;
};

TrainResult train_cascade(const DatasetManifest& manifest,
                          std::span<const StageConfig> configs,
                          const TrainOptions& options = {});

// Runs one trained stage on a full image. `previous` is ignored for stage 1.
ProbabilityMap run_stage(const StageConfig& config, const gbdt::TreeEnsemble& ensemble,
                         const FeatureStack& stack, const ProbabilityMap* previous,
                         int threads = 1);

std::array<ProbabilityMap, kNumStages> infer_stages(const CascadeModel& model,
                                                    const FeatureStack& stack,
                                                    int threads = 1);

// 168 x 168 probability mask.
ProbabilityMap infer(const CascadeModel& model, const FeatureStack& stack, int threads = 1);

}  // namespace greencod::cascade

#endif  // GREENCOD_CASCADE_H_
