#ifndef GREENCOD_TESTS_ORACLES_H_
#define GREENCOD_TESTS_ORACLES_H_

// Straightforward reference implementations used to cross-check the library.
// Written for clarity, not speed, and without sharing library internals.

#include <cstdint>
#include <vector>

namespace greencod::oracle {

// Dense row-major image, double precision.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  double operator()(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// --- Boosting -------------------------------------------------------------

struct GreedyParams {
  int num_trees = 10;
  int max_depth = 3;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_hessian = 1.0;
};

struct GreedyNode {
  bool leaf = true;
  int feature = 0;
  float threshold = 0.0f;
  float value = 0.0f;
  int left = -1;
  int right = -1;
};

// Preorder node list, same layout idea as the library's trees.
struct GreedyTree {
  std::vector<GreedyNode> nodes;
};

struct GreedyModel {
  float base = 0.0f;
  std::vector<GreedyTree> trees;
  std::vector<float> train_margins;
};

// Exact greedy second-order boosting on logistic loss. Candidate thresholds
// are every distinct training value of a feature ("x < t goes left").
GreedyModel exact_greedy(const std::vector<std::vector<float>>& rows,
                         const std::vector<float>& targets, const GreedyParams& params);

float greedy_predict(const GreedyModel& model, const std::vector<float>& row);

// Logistic loss in long double: log(1 + e^m) - y m.
long double logistic_loss_ld(long double margin, long double target);

// --- Resizing and neighborhoods -------------------------------------------

// Half-pixel-center bilinear with clamped taps, evaluated directly.
Image bilinear(const Image& in, int out_h, int out_w);

// Exact area-weighted average over the continuous footprint of each output cell.
Image area_average(const Image& in, int out_h, int out_w);

// window x window neighborhood of (y, x), row-major, coordinates clamped.
std::vector<double> neighborhood(const Image& in, int y, int x, int window);

// --- Metrics ----------------------------------------------------------------

// Structure measure as in the reference MATLAB implementation:
// alpha * S_object + (1 - alpha) * S_region, floored at 0. GT binarized at 0.5.
double s_measure(const Image& pred, const Image& gt, double alpha = 0.5);

// Per-pixel enhanced alignment of a binary map, averaged over N pixels.
double enhanced_alignment(const std::vector<int>& fm, const std::vector<int>& gt);

// Mean over k = 0..255 of enhanced_alignment(P > k/256, G).
double e_measure_mean(const Image& pred, const Image& gt);
// enhanced_alignment(P >= min(2 mean(P), 1), G).
double e_measure_adaptive(const Image& pred, const Image& gt);

// F_beta of P >= threshold.
double f_measure(const Image& pred, const Image& gt, double threshold, double beta_sq);

}  // namespace greencod::oracle

#endif  // GREENCOD_TESTS_ORACLES_H_
