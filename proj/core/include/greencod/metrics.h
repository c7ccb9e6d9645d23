#ifndef GREENCOD_METRICS_H_
#define GREENCOD_METRICS_H_

// MAE, S-measure, E-measure and F-measure for binary segmentation.
//
// Ground truth is binarized at 0.5 for the structural, alignment and
// precision/recall based measures. Kernels accumulate in double and report
// f32.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "greencod/tensorio.h"
#include "greencod/types.h"

namespace greencod::metrics {

enum class EMeasureMode {
  // Mean of the enhanced alignment over binarizations P > k/256, k = 0..255.
  kMeanOverThresholds,
  // Single binarization P >= min(2 mean(P), 1).
  kAdaptive,
};

struct MetricConfig {
  float alpha = 0.5f;
  float beta_sq = 0.3f;
  EMeasureMode e_measure_mode = EMeasureMode::kMeanOverThresholds;
  // nullopt selects the adaptive threshold min(2 mean(P), 1); otherwise P >= t.
  std::optional<float> f_fixed_threshold;

  void validate() const;
};

double mean_absolute_error(std::span<const float> a, std::span<const float> b);
float mae(const ProbabilityMap& p, const GroundTruthMask& g);

struct StructureParts {
  double object = 0.0;
  double region = 0.0;
};

// Object-aware and region-aware similarities of a non-degenerate pair.
StructureParts structure_parts(const ProbabilityMap& p, const GroundTruthMask& g);
// (1 - alpha) * object + alpha * region, floored at 0.
double combine_structure(double object, double region, double alpha);
float s_measure(const ProbabilityMap& p, const GroundTruthMask& g, const MetricConfig& cfg = {});

// Mean enhanced alignment of a binary prediction (values 0/1) against the
// binarized ground truth. An all-background GT scores 1 - FM per pixel and an
// all-foreground GT scores FM.
double enhanced_alignment(std::span<const float> binary_prediction, const GroundTruthMask& g);
float e_measure(const ProbabilityMap& p, const GroundTruthMask& g, const MetricConfig& cfg = {});

// min(2 mean(P), 1)
float adaptive_threshold(const ProbabilityMap& p);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Precision/recall of P >= threshold. Empty denominators give 0.
PrecisionRecall precision_recall(const ProbabilityMap& p, const GroundTruthMask& g,
                                 float threshold);
// (1 + b2) P R / (b2 P + R); 0 when the denominator is 0.
double f_beta(double precision, double recall, double beta_sq);
float f_measure(const ProbabilityMap& p, const GroundTruthMask& g, const MetricConfig& cfg = {});

struct ImageMetrics {
  std::string image_id;
  float mae = 0.0f;
  float s_measure = 0.0f;
  float e_measure = 0.0f;
  float f_measure = 0.0f;
};

ImageMetrics evaluate_image(const ProbabilityMap& p, const GroundTruthMask& g,
                            const MetricConfig& cfg = {});

struct MetricsReport {
  float mae = 0.0f;
  float s_measure = 0.0f;
  float e_measure = 0.0f;
  float f_measure = 0.0f;
  std::vector<ImageMetrics> per_image;
  // image_ids with no prediction file.
  std::vector<std::string> missing;
};

// Scores `<predictions>/<image_id>.png` against each manifest entry's mask.
// Predictions of a different size are bilinearly resized to the mask size.
// Per-image rows keep manifest order; means cover the scored images only.
MetricsReport evaluate_dataset(const std::filesystem::path& predictions,
                               const DatasetManifest& manifest, const MetricConfig& cfg = {},
                               int threads = 1);

// Tab-separated record file:
//   image_id  mae  s_measure  e_measure  f_measure      (header)
//   one line per image
//   #mean  <mae> <s> <e> <f>
//   #count <n>
//   #missing <id> ...                                     (only if any)
std::string format_report(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& destination);

}  // namespace greencod::metrics

#endif  // GREENCOD_METRICS_H_
