#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "greencod/error.h"
#include "greencod/metrics.h"
#include "oracles.h"
#include "temp_dir.h"

namespace greencod::metrics {
namespace {

oracle::Image img(const std::vector<float>& v, int h, int w) {
  return {h, w, std::vector<double>(v.begin(), v.end())};
}

struct Case {
  ProbabilityMap p;
  GroundTruthMask g;
};

Case random_case(std::mt19937_64& rng, int index) {
  std::uniform_int_distribution<int> side(1, 16);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const int h = side(rng);
  const int w = side(rng);
  Case c{ProbabilityMap(h, w), GroundTruthMask(h, w)};
  const float fg_rate = index % 5 == 0 ? 0.0f : index % 7 == 0 ? 1.0f : u(rng);
  for (std::size_t i = 0; i < c.g.size(); ++i) {
    c.g.values[i] = u(rng) < fg_rate ? 1.0f : 0.0f;
    const float noise = u(rng);
    // Mix of informative, uniform and quantized predictions.
    if (index % 3 == 0) {
      c.p.values[i] = std::floor(noise * 8.0f) / 8.0f;
    } else if (index % 3 == 1) {
      c.p.values[i] = std::clamp(0.6f * c.g.values[i] + 0.5f * noise - 0.1f, 0.0f, 1.0f);
    } else {
      c.p.values[i] = noise;
    }
  }
  return c;
}

TEST(Metrics, PerfectPredictionScoresOne) {
  GroundTruthMask g(12, 9);
  for (int y = 3; y < 8; ++y) {
    for (int x = 2; x < 6; ++x) g.at(y, x) = 1.0f;
  }
  ProbabilityMap p(12, 9);
  p.values = g.values;
  const ImageMetrics m = evaluate_image(p, g);
  EXPECT_EQ(m.mae, 0.0f);
  EXPECT_EQ(m.s_measure, 1.0f);
  EXPECT_EQ(m.e_measure, 1.0f);
  EXPECT_EQ(m.f_measure, 1.0f);
  MetricConfig adaptive;
  adaptive.e_measure_mode = EMeasureMode::kAdaptive;
  EXPECT_EQ(e_measure(p, g, adaptive), 1.0f);
}

TEST(Metrics, InvertedBinaryHasUnitMae) {
  GroundTruthMask g(5, 5);
  ProbabilityMap p(5, 5);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.values[i] = i % 3 == 0 ? 1.0f : 0.0f;
    p.values[i] = 1.0f - g.values[i];
  }
  EXPECT_EQ(mae(p, g), 1.0f);
}

TEST(Metrics, FBetaExactValue) {
  EXPECT_EQ(static_cast<float>(f_beta(1.0, 0.5, 0.3)), 0.8125f);
  EXPECT_EQ(f_beta(0.0, 0.0, 0.3), 0.0);
  GroundTruthMask g(1, 4);
  g.values = {1, 1, 0, 0};
  ProbabilityMap p(1, 4);
  p.values = {1, 0, 0, 0};
  MetricConfig cfg;
  cfg.f_fixed_threshold = 0.5f;
  EXPECT_EQ(f_measure(p, g, cfg), 0.8125f);
}

TEST(Metrics, DegenerateGroundTruth) {
  ProbabilityMap p(4, 4, 0.25f);
  GroundTruthMask empty(4, 4, 0.0f);
  GroundTruthMask full(4, 4, 1.0f);
  EXPECT_FLOAT_EQ(s_measure(p, empty), 0.75f);
  EXPECT_FLOAT_EQ(s_measure(p, full), 0.25f);
  ProbabilityMap zeros(4, 4, 0.0f);
  EXPECT_EQ(e_measure(zeros, empty), 1.0f);
  EXPECT_EQ(f_measure(zeros, empty), 0.0f);
}

TEST(Metrics, MatchReferenceOraclesOnRandomCases) {
  std::mt19937_64 rng(42);
  MetricConfig adaptive;
  adaptive.e_measure_mode = EMeasureMode::kAdaptive;
  for (int i = 0; i < 50; ++i) {
    const Case c = random_case(rng, i);
    const auto P = img(c.p.values, c.p.height, c.p.width);
    const auto G = img(c.g.values, c.g.height, c.g.width);
    EXPECT_NEAR(s_measure(c.p, c.g), oracle::s_measure(P, G), 1e-6) << i;
    EXPECT_NEAR(e_measure(c.p, c.g), oracle::e_measure_mean(P, G), 1e-6) << i;
    EXPECT_NEAR(e_measure(c.p, c.g, adaptive), oracle::e_measure_adaptive(P, G), 1e-6) << i;
    EXPECT_NEAR(f_measure(c.p, c.g), oracle::f_measure(P, G, adaptive_threshold(c.p), 0.3), 1e-6);
  }
}

TEST(Metrics, StructureWeightsObjectAndRegion) {
  EXPECT_DOUBLE_EQ(combine_structure(0.8, 0.4, 0.5), 0.6);
  EXPECT_DOUBLE_EQ(combine_structure(0.8, 0.4, 0.0), 0.8);
  EXPECT_DOUBLE_EQ(combine_structure(0.8, 0.4, 1.0), 0.4);
  EXPECT_DOUBLE_EQ(combine_structure(-0.5, -0.1, 0.5), 0.0);
}

TEST(Metrics, FixedThresholdOnlyAltersF) {
  std::mt19937_64 rng(3);
  const Case c = random_case(rng, 4);
  MetricConfig fixed;
  fixed.f_fixed_threshold = 0.5f;
  const ImageMetrics a = evaluate_image(c.p, c.g);
  const ImageMetrics b = evaluate_image(c.p, c.g, fixed);
  EXPECT_EQ(a.mae, b.mae);
  EXPECT_EQ(a.s_measure, b.s_measure);
  EXPECT_EQ(a.e_measure, b.e_measure);
  const auto P = img(c.p.values, c.p.height, c.p.width);
  const auto G = img(c.g.values, c.g.height, c.g.width);
  EXPECT_NEAR(b.f_measure, oracle::f_measure(P, G, 0.5, 0.3), 1e-6);
}

TEST(Metrics, ShapeMismatchAndConfigValidation) {
  EXPECT_THROW(mae(ProbabilityMap(2, 3), GroundTruthMask(3, 2)), InvariantError);
  EXPECT_THROW(s_measure(ProbabilityMap(2, 2), GroundTruthMask(2, 3)), InvariantError);
  MetricConfig bad;
  bad.alpha = 1.5f;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.f_fixed_threshold = -0.1f;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(MetricsDataset, ScoresPresentAndListsMissing) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "gt");
  std::filesystem::create_directories(dir / "pred");
  DatasetManifest manifest;
  for (const char* id : {"a", "b", "c"}) {
    GroundTruthMask g(20, 30);
    for (int y = 5; y < 15; ++y) g.at(y, 10) = 1.0f;
    ProbabilityMap as_map(20, 30);
    as_map.values = g.values;
    write_mask(as_map, dir.path() / "gt" / (std::string(id) + ".png"));
    manifest.entries.push_back({id, "", dir.path() / "gt" / (std::string(id) + ".png"), 20, 30});
  }
  // "a" is perfect at native size, "b" is a constant 168x168 map, "c" is missing.
  ProbabilityMap perfect(20, 30);
  for (int y = 5; y < 15; ++y) perfect.at(y, 10) = 1.0f;
  write_mask(perfect, dir.path() / "pred" / "a.png");
  write_mask(ProbabilityMap(168, 168, 0.0f), dir.path() / "pred" / "b.png");

  const MetricsReport r = evaluate_dataset(dir.path() / "pred", manifest, {}, 2);
  ASSERT_EQ(r.per_image.size(), 2u);
  EXPECT_EQ(r.missing, std::vector<std::string>{"c"});
  EXPECT_EQ(r.per_image[0].image_id, "a");
  EXPECT_EQ(r.per_image[0].mae, 0.0f);
  EXPECT_EQ(r.per_image[0].s_measure, 1.0f);
  EXPECT_NEAR(r.per_image[1].mae, 10.0f / 600.0f, 1e-6);
  EXPECT_NEAR(r.mae, (r.per_image[0].mae + r.per_image[1].mae) / 2, 1e-7);

  const std::string text = format_report(r);
  EXPECT_EQ(text.rfind("image_id\tmae\ts_measure\te_measure\tf_measure\n", 0), 0u);
  EXPECT_NE(text.find("\n#count\t2\n"), std::string::npos);
  EXPECT_NE(text.find("\n#missing\tc\n"), std::string::npos);
  write_report(r, dir / "report.tsv");
  std::ifstream in(dir / "report.tsv");
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(in), {}), text);
}

}  // namespace
}  // namespace greencod::metrics
