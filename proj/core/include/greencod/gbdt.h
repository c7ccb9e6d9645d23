#ifndef GREENCOD_GBDT_H_
#define GREENCOD_GBDT_H_

// Second-order gradient-boosted regression trees with histogram split
// finding and a binary logistic objective.
//
// Split rule: a row goes left iff feature < threshold. Thresholds are always
// bin edges, so a float row and its binned image route identically.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "greencod/types.h"

namespace greencod::gbdt {

struct TrainConfig {
  int num_trees = 100;
  int max_depth = 3;
  float learning_rate = 0.1f;
  float lambda_l2 = 1.0f;
  float gamma_min_gain = 0.0f;
  float min_child_hessian = 1.0f;
  int histogram_bins = 256;
  float row_subsample = 1.0f;
  std::uint64_t seed = 0;

  // Throws ConfigError when a field is out of range.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct GradHess {
  float g = 0.0f;
  float h = 0.0f;
};

float sigmoid(float margin);

// ln(p / (1 - p)) with p clamped to [1e-6, 1 - 1e-6].
float logit_clamped(float p);

// p = sigmoid(margin); g = p - target; h = p (1 - p).
GradHess logistic_grad_hess(float margin, float target);

// -[y ln p + (1 - y) ln(1 - p)], evaluated stably in margin space.
double logistic_loss(float margin, float target);

// Mean logistic loss over all rows.
double mean_logistic_loss(std::span<const float> margins, std::span<const float> targets);

struct BinStats {
  double sum_g = 0.0;
  double sum_h = 0.0;
  std::uint32_t count = 0;

  bool operator==(const BinStats&) const = default;
};

// Bin of `value` given ascending edges: the last edge <= value, or bin 0
// when value is below every edge.
std::size_t bin_index(std::span<const float> bin_edges, float value);

// Per-bin (sum g, sum h, count) over the rows in row_set. An empty row set
// yields an all-zero histogram.
std::vector<BinStats> build_histogram(std::span<const float> feature_column,
                                      std::span<const float> bin_edges,
                                      std::span<const GradHess> stats,
                                      std::span<const std::uint32_t> row_set);

struct FeatureHistogram {
  std::span<const float> bin_edges;
  std::span<const BinStats> bins;
};

struct SplitParams {
  double lambda_l2 = 1.0;
  double gamma_min_gain = 0.0;
  double min_child_hessian = 1.0;
};

struct SplitCandidate {
  std::uint32_t feature = 0;
  // Rows with bin < split_bin go left.
  std::uint32_t split_bin = 0;
  float threshold = 0.0f;
  double gain = 0.0;

  bool operator==(const SplitCandidate&) const = default;
};

// Gain of separating (G_L, H_L) from (G_R, H_R):
//   1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - (G_L+G_R)^2/(H_L+H_R+l)] - gamma
double split_gain(double g_left, double h_left, double g_right, double h_right,
                  const SplitParams& params);

// Best split across all features, or nullopt when no candidate has gain > 0
// with both children carrying at least min_child_hessian. Ties keep the
// lowest feature index, then the lowest threshold. Node totals are taken from
// each feature's own histogram.
std::optional<SplitCandidate> find_best_split(std::span<const FeatureHistogram> histograms,
                                              const SplitParams& params);

struct TreeNode {
  bool is_leaf = true;
  std::uint32_t feature = 0;
  float threshold = 0.0f;
  std::int32_t left = -1;
  std::int32_t right = -1;
  float value = 0.0f;

  bool operator==(const TreeNode&) const = default;
};

// Binary tree stored in preorder; nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  float leaf_value(std::span<const float> row) const;
  int depth() const;
  std::size_t leaf_count() const;
  std::size_t internal_count() const;
  bool operator==(const Tree&) const = default;
};

// Additive model in margin space. Leaf values are already scaled by the
// learning rate, so margin = base + sum_t leaf_t(row).
struct TreeEnsemble {
  std::vector<Tree> trees;
  float base_score = 0.0f;
  std::uint32_t num_features = 0;
  TrainConfig config;

  bool operator==(const TreeEnsemble&) const = default;
};

// Per-feature ascending bin edges (lower bounds). A feature with at most
// max_bins distinct values gets one edge per distinct value.
class BinCuts {
 public:
  BinCuts() = default;
  explicit BinCuts(std::vector<std::vector<float>> edges);

  static BinCuts from_rows(const RowMatrix& sample, int max_bins);

  std::size_t num_features() const { return edges_.size(); }
  std::span<const float> edges(std::size_t feature) const { return edges_[feature]; }
  std::uint8_t bin(std::size_t feature, float value) const {
    return static_cast<std::uint8_t>(bin_index(edges_[feature], value));
  }
  // Offset of each feature's first bin in a flat multi-feature histogram.
  std::size_t offset(std::size_t feature) const { return offsets_[feature]; }
  std::size_t total_bins() const { return offsets_.back(); }

 private:
  std::vector<std::vector<float>> edges_;
  std::vector<std::size_t> offsets_{0};
};

// Column-major u8 bin codes.
class BinnedMatrix {
 public:
  BinnedMatrix() = default;
  BinnedMatrix(std::size_t rows, std::size_t features)
      : rows_(rows), features_(features), codes_(rows * features, 0) {}

  static BinnedMatrix from_rows(const RowMatrix& rows, const BinCuts& cuts);

  std::size_t rows() const { return rows_; }
  std::size_t features() const { return features_; }
  void set_row(std::size_t row, std::span<const float> values, const BinCuts& cuts);
  // Bins `count` consecutive rows given row-major in `values`.
  void set_rows(std::size_t first_row, std::size_t count, std::span<const float> values,
                const BinCuts& cuts);
  std::span<const std::uint8_t> column(std::size_t feature) const {
    return {codes_.data() + feature * rows_, rows_};
  }
  std::uint8_t at(std::size_t row, std::size_t feature) const {
    return codes_[feature * rows_ + row];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t features_ = 0;
  std::vector<std::uint8_t> codes_;
};

struct FitOptions {
  int threads = 1;
  // Called after each boosting round with the updated training margins.
  std::function<void(std::size_t round, std::span<const float> margins)> on_round;
};

// One boosting step over `rows` (ascending row indices). Leaves hold the
// unscaled Newton step -sum g / (sum h + lambda).
Tree fit_tree(const BinnedMatrix& features, const BinCuts& cuts,
              std::span<const GradHess> stats, std::span<const std::uint32_t> rows,
              const TrainConfig& config, int threads = 1);

// Convenience overload: bins `features` with cuts built from all rows.
Tree fit_tree(const RowMatrix& features, std::span<const GradHess> stats,
              std::span<const std::uint32_t> rows, const TrainConfig& config);

// Fits config.num_trees trees. Margins start at base_margin when non-empty,
// else at logit_clamped(mean target) which is stored as base_score.
// The result depends only on (data, config); never on options.threads.
TreeEnsemble fit_ensemble(const BinnedMatrix& features, const BinCuts& cuts,
                          std::span<const float> targets,
                          std::span<const float> base_margin, const TrainConfig& config,
                          const FitOptions& options = {});

TreeEnsemble fit_ensemble(const RowMatrix& features, std::span<const float> targets,
                          std::span<const float> base_margin, const TrainConfig& config,
                          const FitOptions& options = {});

// margin = base + sum of leaf values; base is base_margin[row] when
// base_margin is non-empty, else ensemble.base_score.
std::vector<float> predict_margin(const TreeEnsemble& ensemble, const RowMatrix& features,
                                  std::span<const float> base_margin = {}, int threads = 1);

// GCTE model file:
//   "GCTE" | version u32 | config block | num_features u32 | base_score f32 |
//   tree_count u32 | per tree preorder node records
//   (flag u8 0=internal: feature u32, threshold f32 | 1=leaf: value f32)
// Config block: num_trees u32, max_depth u32, learning_rate f32, lambda_l2 f32,
// gamma_min_gain f32, min_child_hessian f32, histogram_bins u32,
// row_subsample f32, seed u64.
std::vector<std::uint8_t> serialize(const TreeEnsemble& ensemble);
TreeEnsemble deserialize(std::span<const std::uint8_t> bytes);
void save_ensemble(const TreeEnsemble& ensemble, const std::filesystem::path& path);
TreeEnsemble load_ensemble(const std::filesystem::path& path);

// Lossless text dump (floats printed with 9 significant digits).
std::string to_text(const TreeEnsemble& ensemble);

}  // namespace greencod::gbdt

#endif  // GREENCOD_GBDT_H_
