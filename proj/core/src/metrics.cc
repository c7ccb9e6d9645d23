#include "greencod/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "greencod/cascade.h"
#include "greencod/error.h"
#include "greencod/parallel.h"

namespace greencod::metrics {
namespace {

// Machine epsilon of double, used as the guard term of the structural and
// alignment formulas.
constexpr double kEps = 2.220446049250313e-16;

void check_same_shape(const ProbabilityMap& p, const GroundTruthMask& g, const char* what) {
  if (p.height != g.height || p.width != g.width || p.size() != g.size() || p.size() == 0) {
    throw InvariantError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(p.height) + "x" + std::to_string(p.width) + " vs " +
                         std::to_string(g.height) + "x" + std::to_string(g.width) + ")");
  }
}

bool fg(float g) { return g > 0.5f; }

float to_unit(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

double mean_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s / static_cast<double>(v.size());
}

// 2x / (x^2 + 1 + sigma + eps) over the selected values.
double object_score(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double sigma = 0.0;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    sigma = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return 2.0 * mean / (mean * mean + 1.0 + sigma + kEps);
}

// SSIM-style similarity of one block [y0,y1) x [x0,x1).
double block_ssim(const ProbabilityMap& p, const GroundTruthMask& g, int y0, int y1, int x0,
                  int x1) {
  const double n = static_cast<double>(y1 - y0) * (x1 - x0);
  double mx = 0.0;
  double my = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      mx += p.at(y, x);
      my += fg(g.at(y, x)) ? 1.0 : 0.0;
    }
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double dx = p.at(y, x) - mx;
      const double dy = (fg(g.at(y, x)) ? 1.0 : 0.0) - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  sxx /= n - 1.0 + kEps;
  syy /= n - 1.0 + kEps;
  sxy /= n - 1.0 + kEps;
  const double alpha = 4.0 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sxx + syy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

// Per-pixel enhanced alignment value for a (prediction, gt) binary pair given
// the two means.
double enhanced_value(double fm, double gt, double mu_fm, double mu_gt) {
  const double af = fm - mu_fm;
  const double ag = gt - mu_gt;
  const double align = 2.0 * ag * af / (ag * ag + af * af + kEps);
  return (align + 1.0) * (align + 1.0) / 4.0;
}

// Enhanced alignment from confusion counts (fm, gt) in {0,1}^2.
double enhanced_from_counts(double n11, double n10, double n01, double n00) {
  const double n = n11 + n10 + n01 + n00;
  const double g1 = n11 + n01;
  if (g1 == 0.0) return n00 / n + n01 / n;  // sum(1 - FM) / N with FM=1 on n10
  if (g1 == n) return n11 / n;
  const double mu_f = (n11 + n10) / n;
  const double mu_g = g1 / n;
  double total = 0.0;
  if (n11 > 0) total += n11 * enhanced_value(1.0, 1.0, mu_f, mu_g);
  if (n10 > 0) total += n10 * enhanced_value(1.0, 0.0, mu_f, mu_g);
  if (n01 > 0) total += n01 * enhanced_value(0.0, 1.0, mu_f, mu_g);
  if (n00 > 0) total += n00 * enhanced_value(0.0, 0.0, mu_f, mu_g);
  return total / n;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void MetricConfig::validate() const {
  if (!(alpha >= 0.0f && alpha <= 1.0f)) throw ConfigError("alpha must be in [0, 1]");
  if (!(beta_sq > 0.0f)) throw ConfigError("beta_sq must be > 0");
  if (f_fixed_threshold && !(*f_fixed_threshold >= 0.0f && *f_fixed_threshold <= 1.0f)) {
    throw ConfigError("fixed F threshold must be in [0, 1]");
  }
}

double mean_absolute_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) throw InvariantError("mae: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  }
  return s / static_cast<double>(a.size());
}

float mae(const ProbabilityMap& p, const GroundTruthMask& g) {
  check_same_shape(p, g, "mae");
  return to_unit(mean_absolute_error(p.values, g.values));
}

StructureParts structure_parts(const ProbabilityMap& p, const GroundTruthMask& g) {
  check_same_shape(p, g, "s_measure");
  const int h = g.height;
  const int w = g.width;
  const double n = static_cast<double>(p.size());

  std::vector<double> fg_values;
  std::vector<double> bg_values;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (fg(g.values[i])) {
      fg_values.push_back(p.values[i]);
    } else {
      bg_values.push_back(1.0 - p.values[i]);
    }
  }
  const double u = static_cast<double>(fg_values.size()) / n;

  StructureParts parts;
  parts.object = u * object_score(fg_values) + (1.0 - u) * object_score(bg_values);

  // Centroid in 1-based pixel coordinates, rounded half away from zero.
  int cx = 0;
  int cy = 0;
  if (fg_values.empty()) {
    cx = static_cast<int>(std::round(w / 2.0));
    cy = static_cast<int>(std::round(h / 2.0));
  } else {
    double sx = 0.0;
    double sy = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (fg(g.at(y, x))) {
          sx += x + 1;
          sy += y + 1;
        }
      }
    }
    cx = static_cast<int>(std::round(sx / static_cast<double>(fg_values.size())));
    cy = static_cast<int>(std::round(sy / static_cast<double>(fg_values.size())));
  }

  const double area = n;
  const double w1 = static_cast<double>(cx) * cy / area;
  const double w2 = static_cast<double>(w - cx) * cy / area;
  const double w3 = static_cast<double>(cx) * (h - cy) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const std::array<std::array<int, 4>, 4> blocks = {{
      {0, cy, 0, cx},
      {0, cy, cx, w},
      {cy, h, 0, cx},
      {cy, h, cx, w},
  }};
  const std::array<double, 4> weights = {w1, w2, w3, w4};
  double region = 0.0;
  for (int b = 0; b < 4; ++b) {
    const auto& [y0, y1, x0, x1] = blocks[b];
    if (y1 <= y0 || x1 <= x0) continue;
    region += weights[b] * block_ssim(p, g, y0, y1, x0, x1);
  }
  parts.region = region;
  return parts;
}

double combine_structure(double object, double region, double alpha) {
  return std::max(0.0, (1.0 - alpha) * object + alpha * region);
}

float s_measure(const ProbabilityMap& p, const GroundTruthMask& g, const MetricConfig& cfg) {
  check_same_shape(p, g, "s_measure");
  std::size_t fg_count = 0;
  for (float v : g.values) fg_count += fg(v) ? 1 : 0;
  const double mean_p = mean_of(p.values);
  if (fg_count == 0) return to_unit(1.0 - mean_p);
  if (fg_count == g.size()) return to_unit(mean_p);
  const StructureParts parts = structure_parts(p, g);
  return to_unit(combine_structure(parts.object, parts.region, cfg.alpha));
}

double enhanced_alignment(std::span<const float> binary_prediction, const GroundTruthMask& g) {
  if (binary_prediction.size() != g.size() || g.size() == 0) {
    throw InvariantError("e_measure: dimension mismatch");
  }
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool f = binary_prediction[i] > 0.5f;
    const bool t = fg(g.values[i]);
    if (f && t) ++n11;
    else if (f) ++n10;
    else if (t) ++n01;
    else ++n00;
  }
  return enhanced_from_counts(n11, n10, n01, n00);
}

float e_measure(const ProbabilityMap& p, const GroundTruthMask& g, const MetricConfig& cfg) {
  check_same_shape(p, g, "e_measure");
  if (cfg.e_measure_mode == EMeasureMode::kAdaptive) {
    const float thr = adaptive_threshold(p);
    std::vector<float> fm(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) fm[i] = p.values[i] >= thr ? 1.0f : 0.0f;
    return to_unit(enhanced_alignment(fm, g));
  }
  // level(P) = number of k in [0,256) with P > k/256 = clamp(ceil(256 P), 0, 256).
  std::array<double, 257> level_fg{};
  std::array<double, 257> level_bg{};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double scaled = std::ceil(static_cast<double>(p.values[i]) * 256.0);
    const auto level = static_cast<std::size_t>(std::clamp(scaled, 0.0, 256.0));
    (fg(g.values[i]) ? level_fg : level_bg)[level] += 1.0;
  }
  double g1 = 0.0;
  double g0 = 0.0;
  for (int l = 0; l <= 256; ++l) {
    g1 += level_fg[l];
    g0 += level_bg[l];
  }
  // Pixels with level > k are foreground in binarization k.
  double above_fg = g1 - level_fg[0];
  double above_bg = g0 - level_bg[0];
  double total = 0.0;
  for (int k = 0; k < 256; ++k) {
    total += enhanced_from_counts(above_fg, above_bg, g1 - above_fg, g0 - above_bg);
    above_fg -= level_fg[k + 1];
    above_bg -= level_bg[k + 1];
  }
  return to_unit(total / 256.0);
}

float adaptive_threshold(const ProbabilityMap& p) {
  return static_cast<float>(std::min(2.0 * mean_of(p.values), 1.0));
}

PrecisionRecall precision_recall(const ProbabilityMap& p, const GroundTruthMask& g,
                                 float threshold) {
  check_same_shape(p, g, "f_measure");
  double tp = 0.0;
  double predicted = 0.0;
  double actual = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool f = p.values[i] >= threshold;
    const bool t = fg(g.values[i]);
    tp += (f && t) ? 1.0 : 0.0;
    predicted += f ? 1.0 : 0.0;
    actual += t ? 1.0 : 0.0;
  }
  return {predicted > 0 ? tp / predicted : 0.0, actual > 0 ? tp / actual : 0.0};
}

double f_beta(double precision, double recall, double beta_sq) {
  const double denom = beta_sq * precision + recall;
  if (denom <= 0.0) return 0.0;
  return (1.0 + beta_sq) * precision * recall / denom;
}

float f_measure(const ProbabilityMap& p, const GroundTruthMask& g, const MetricConfig& cfg) {
  check_same_shape(p, g, "f_measure");
  const float thr = cfg.f_fixed_threshold.value_or(adaptive_threshold(p));
  const PrecisionRecall pr = precision_recall(p, g, thr);
  return to_unit(f_beta(pr.precision, pr.recall, cfg.beta_sq));
}

ImageMetrics evaluate_image(const ProbabilityMap& p, const GroundTruthMask& g,
                            const MetricConfig& cfg) {
  ImageMetrics m;
  m.mae = mae(p, g);
  m.s_measure = s_measure(p, g, cfg);
  m.e_measure = e_measure(p, g, cfg);
  m.f_measure = f_measure(p, g, cfg);
  return m;
}

MetricsReport evaluate_dataset(const std::filesystem::path& predictions,
                               const DatasetManifest& manifest, const MetricConfig& cfg,
                               int threads) {
  cfg.validate();
  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<ImageMetrics>> slots(n);
  std::vector<char> missing(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    const auto pred_path = predictions / (e.image_id + ".png");
    if (!std::filesystem::exists(pred_path)) {
      missing[i] = 1;
      return;
    }
    const GroundTruthMask pred_raw = read_mask(pred_path);
    const GroundTruthMask gt = read_mask(e.gt_mask_path);
    ProbabilityMap pred;
    pred.height = pred_raw.height;
    pred.width = pred_raw.width;
    pred.values = pred_raw.values;
    if (pred.height != gt.height || pred.width != gt.width) {
      pred = cascade::upsample_prediction(pred, gt.height, gt.width);
    }
    ImageMetrics m = evaluate_image(pred, gt, cfg);
    m.image_id = e.image_id;
    slots[i] = std::move(m);
  });

  MetricsReport report;
  double sums[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    if (missing[i]) {
      report.missing.push_back(manifest.entries[i].image_id);
      continue;
    }
    const ImageMetrics& m = *slots[i];
    sums[0] += m.mae;
    sums[1] += m.s_measure;
    sums[2] += m.e_measure;
    sums[3] += m.f_measure;
    report.per_image.push_back(m);
  }
  if (!report.per_image.empty()) {
    const auto count = static_cast<double>(report.per_image.size());
    report.mae = static_cast<float>(sums[0] / count);
    report.s_measure = static_cast<float>(sums[1] / count);
    report.e_measure = static_cast<float>(sums[2] / count);
    report.f_measure = static_cast<float>(sums[3] / count);
  }
  return report;
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream out;
  out << "image_id\tmae\ts_measure\te_measure\tf_measure\n";
  for (const auto& m : report.per_image) {
    out << m.image_id << '\t' << fmt6(m.mae) << '\t' << fmt6(m.s_measure) << '\t'
        << fmt6(m.e_measure) << '\t' << fmt6(m.f_measure) << '\n';
  }
  out << "#mean\t" << fmt6(report.mae) << '\t' << fmt6(report.s_measure) << '\t'
      << fmt6(report.e_measure) << '\t' << fmt6(report.f_measure) << '\n';
  out << "#count\t" << report.per_image.size() << '\n';
  if (!report.missing.empty()) {
    out << "#missing";
    for (const auto& id : report.missing) out << '\t' << id;
    out << '\n';
  }
  return out.str();
}

void write_report(const MetricsReport& report, const std::filesystem::path& destination) {
  std::ofstream out(destination, std::ios::trunc);
  if (!out) throw IoError("cannot open " + destination.string() + " for writing");
  out << format_report(report);
  if (!out) throw IoError("failed writing " + destination.string());
}

}  // namespace greencod::metrics
