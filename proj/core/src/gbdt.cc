#include "greencod/gbdt.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "greencod/error.h"
#include "greencod/parallel.h"

namespace greencod::gbdt {
namespace {

constexpr double kLogitClamp = 1e-6;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform in [0,1) from (seed, round, row); independent of iteration order.
double row_uniform(std::uint64_t seed, std::uint64_t round, std::uint64_t row) {
  const std::uint64_t h = splitmix64(splitmix64(seed ^ splitmix64(round)) ^ row);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

struct GrownTree {
  Tree tree;
  // split_bins[i] is the bin boundary of internal node i (preorder).
  std::vector<std::uint32_t> split_bins;
};

inline void accumulate(BinStats& b, double g, double h) {
  b.sum_g += g;
  b.sum_h += h;
  ++b.count;
}

class TreeGrower {
 public:
  TreeGrower(const BinnedMatrix& features, const BinCuts& cuts,
             std::span<const GradHess> stats, const TrainConfig& config, int threads)
      : x_(features),
        cuts_(cuts),
        stats_(stats),
        config_(config),
        params_{config.lambda_l2, config.gamma_min_gain, config.min_child_hessian},
        threads_(threads) {}

  GrownTree grow(std::span<const std::uint32_t> rows);

 private:
  struct Pending {
    int node = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    int depth = 0;
    double sum_g = 0.0;
    double sum_h = 0.0;
    std::vector<BinStats> hist;
  };

  void sums(std::uint32_t begin, std::uint32_t end, double& g, double& h) const;
  std::vector<BinStats> build(std::uint32_t begin, std::uint32_t end) const;
  std::optional<SplitCandidate> best_split(const Pending& p) const;
  float leaf_value(double g, double h) const {
    return static_cast<float>(-g / (h + static_cast<double>(config_.lambda_l2)));
  }

  const BinnedMatrix& x_;
  const BinCuts& cuts_;
  std::span<const GradHess> stats_;
  const TrainConfig& config_;
  SplitParams params_;
  int threads_;
  std::vector<std::uint32_t> rows_;
};

void TreeGrower::sums(std::uint32_t begin, std::uint32_t end, double& g, double& h) const {
  g = 0.0;
  h = 0.0;
  for (std::uint32_t i = begin; i < end; ++i) {
    g += stats_[rows_[i]].g;
    h += stats_[rows_[i]].h;
  }
}

std::vector<BinStats> TreeGrower::build(std::uint32_t begin, std::uint32_t end) const {
  std::vector<BinStats> hist(cuts_.total_bins());
  const std::size_t n = end - begin;
  // Gather the node's statistics once so the per-feature loop only gathers codes.
  std::vector<GradHess> ordered(n);
  for (std::size_t i = 0; i < n; ++i) ordered[i] = stats_[rows_[begin + i]];
  const std::uint32_t* idx = rows_.data() + begin;
  // Four features per pass share the index and statistic loads; each feature
  // still accumulates in row order, so the sums do not depend on grouping.
  constexpr std::size_t kGroup = 4;
  const std::size_t features = x_.features();
  const std::size_t groups = (features + kGroup - 1) / kGroup;
  parallel_for(groups, threads_, [&](std::size_t grp) {
    const std::size_t f0 = grp * kGroup;
    const std::size_t f1 = std::min(features, f0 + kGroup);
    if (f1 - f0 == kGroup) {
      const std::uint8_t* c0 = x_.column(f0).data();
      const std::uint8_t* c1 = x_.column(f0 + 1).data();
      const std::uint8_t* c2 = x_.column(f0 + 2).data();
      const std::uint8_t* c3 = x_.column(f0 + 3).data();
      BinStats* h0 = hist.data() + cuts_.offset(f0);
      BinStats* h1 = hist.data() + cuts_.offset(f0 + 1);
      BinStats* h2 = hist.data() + cuts_.offset(f0 + 2);
      BinStats* h3 = hist.data() + cuts_.offset(f0 + 3);
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t r = idx[i];
        const double g = ordered[i].g;
        const double h = ordered[i].h;
        accumulate(h0[c0[r]], g, h);
        accumulate(h1[c1[r]], g, h);
        accumulate(h2[c2[r]], g, h);
        accumulate(h3[c3[r]], g, h);
      }
      return;
    }
    for (std::size_t f = f0; f < f1; ++f) {
      const std::uint8_t* col = x_.column(f).data();
      BinStats* h = hist.data() + cuts_.offset(f);
      for (std::size_t i = 0; i < n; ++i) {
        accumulate(h[col[idx[i]]], ordered[i].g, ordered[i].h);
      }
    }
  });
  return hist;
}

std::optional<SplitCandidate> scan_feature(std::uint32_t feature,
                                           std::span<const float> edges,
                                           std::span<const BinStats> bins, double total_g,
                                           double total_h, std::uint64_t total_count,
                                           const SplitParams& params) {
  std::optional<SplitCandidate> best;
  double best_gain = 0.0;
  double gl = 0.0;
  double hl = 0.0;
  std::uint64_t cl = 0;
  for (std::size_t b = 1; b < edges.size(); ++b) {
    gl += bins[b - 1].sum_g;
    hl += bins[b - 1].sum_h;
    cl += bins[b - 1].count;
    if (cl == 0) continue;
    if (cl >= total_count) break;
    const double gr = total_g - gl;
    const double hr = total_h - hl;
    if (hl < params.min_child_hessian || hr < params.min_child_hessian) continue;
    const double gain = split_gain(gl, hl, gr, hr, params);
    if (gain > best_gain) {
      best_gain = gain;
      best = SplitCandidate{feature, static_cast<std::uint32_t>(b), edges[b], gain};
    }
  }
  return best;
}

std::optional<SplitCandidate> reduce_candidates(
    const std::vector<std::optional<SplitCandidate>>& per_feature) {
  std::optional<SplitCandidate> best;
  for (const auto& c : per_feature) {
    if (c && (!best || c->gain > best->gain)) best = c;
  }
  return best;
}

std::optional<SplitCandidate> TreeGrower::best_split(const Pending& p) const {
  std::vector<std::optional<SplitCandidate>> per_feature(x_.features());
  const std::uint64_t count = p.end - p.begin;
  parallel_for(x_.features(), threads_, [&](std::size_t f) {
    const auto edges = cuts_.edges(f);
    per_feature[f] = scan_feature(static_cast<std::uint32_t>(f), edges,
                                  {p.hist.data() + cuts_.offset(f), edges.size()},
                                  p.sum_g, p.sum_h, count, params_);
  });
  return reduce_candidates(per_feature);
}

GrownTree TreeGrower::grow(std::span<const std::uint32_t> rows) {
  rows_.assign(rows.begin(), rows.end());
  std::vector<TreeNode> bfs(1);
  std::vector<std::uint32_t> bfs_bins(1, 0);

  std::vector<Pending> level(1);
  level[0].end = static_cast<std::uint32_t>(rows_.size());
  sums(0, level[0].end, level[0].sum_g, level[0].sum_h);
  if (config_.max_depth > 0 && rows_.size() >= 2) level[0].hist = build(0, level[0].end);

  while (!level.empty()) {
    std::vector<Pending> next;
    for (Pending& p : level) {
      std::optional<SplitCandidate> split;
      if (p.depth < config_.max_depth && p.end - p.begin >= 2) split = best_split(p);
      if (!split) {
        bfs[p.node].is_leaf = true;
        bfs[p.node].value = leaf_value(p.sum_g, p.sum_h);
        continue;
      }
      const std::uint8_t* col = x_.column(split->feature).data();
      const auto bin = split->split_bin;
      auto mid_it = std::stable_partition(rows_.begin() + p.begin, rows_.begin() + p.end,
                                          [&](std::uint32_t r) { return col[r] < bin; });
      const auto mid = static_cast<std::uint32_t>(mid_it - rows_.begin());

      Pending left;
      Pending right;
      left.begin = p.begin;
      left.end = mid;
      right.begin = mid;
      right.end = p.end;
      left.depth = right.depth = p.depth + 1;
      sums(left.begin, left.end, left.sum_g, left.sum_h);
      sums(right.begin, right.end, right.sum_g, right.sum_h);
      left.node = static_cast<int>(bfs.size());
      right.node = left.node + 1;
      bfs.resize(bfs.size() + 2);
      bfs_bins.resize(bfs.size(), 0);

      TreeNode& n = bfs[p.node];
      n.is_leaf = false;
      n.feature = split->feature;
      n.threshold = split->threshold;
      n.left = left.node;
      n.right = right.node;
      bfs_bins[p.node] = bin;

      if (left.depth < config_.max_depth) {
        Pending& small = (left.end - left.begin) <= (right.end - right.begin) ? left : right;
        Pending& large = &small == &left ? right : left;
        small.hist = build(small.begin, small.end);
        large.hist = std::move(p.hist);
        for (std::size_t i = 0; i < large.hist.size(); ++i) {
          large.hist[i].sum_g -= small.hist[i].sum_g;
          large.hist[i].sum_h -= small.hist[i].sum_h;
          large.hist[i].count -= small.hist[i].count;
        }
      }
      p.hist.clear();
      p.hist.shrink_to_fit();
      next.push_back(std::move(left));
      next.push_back(std::move(right));
    }
    level = std::move(next);
  }

  GrownTree out;
  out.tree.nodes.reserve(bfs.size());
  out.split_bins.reserve(bfs.size());
  auto emit = [&](auto&& self, int id) -> std::int32_t {
    const auto pos = static_cast<std::int32_t>(out.tree.nodes.size());
    out.tree.nodes.push_back(bfs[id]);
    out.split_bins.push_back(bfs_bins[id]);
    if (!bfs[id].is_leaf) {
      const std::int32_t l = self(self, bfs[id].left);
      const std::int32_t r = self(self, bfs[id].right);
      out.tree.nodes[pos].left = l;
      out.tree.nodes[pos].right = r;
    }
    return pos;
  };
  emit(emit, 0);
  return out;
}

float binned_leaf(const GrownTree& grown, const BinnedMatrix& x, std::size_t row) {
  const auto& nodes = grown.tree.nodes;
  std::size_t i = 0;
  while (!nodes[i].is_leaf) {
    i = x.at(row, nodes[i].feature) < grown.split_bins[i] ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].value;
}

void check_fit_inputs(std::size_t rows, std::span<const float> targets,
                      std::span<const float> base_margin) {
  if (rows == 0) throw InvariantError("fit_ensemble: empty dataset");
  if (targets.size() != rows) {
    throw InvariantError("fit_ensemble: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(rows) + " rows");
  }
  if (!base_margin.empty() && base_margin.size() != rows) {
    throw InvariantError("fit_ensemble: base_margin length mismatch");
  }
  for (float t : targets) {
    if (!(t >= 0.0f && t <= 1.0f)) throw InvariantError("fit_ensemble: target outside [0,1]");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (num_trees < 1) throw ConfigError("num_trees must be >= 1");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (histogram_bins < 2 || histogram_bins > 256) {
    throw ConfigError("histogram_bins must be in [2, 256]");
  }
  if (!(row_subsample > 0.0f && row_subsample <= 1.0f)) {
    throw ConfigError("row_subsample must be in (0, 1]");
  }
  if (!(learning_rate > 0.0f)) throw ConfigError("learning_rate must be > 0");
  if (!(lambda_l2 >= 0.0f)) throw ConfigError("lambda_l2 must be >= 0");
  if (!(gamma_min_gain >= 0.0f)) throw ConfigError("gamma_min_gain must be >= 0");
  if (!(min_child_hessian >= 0.0f)) throw ConfigError("min_child_hessian must be >= 0");
}

float sigmoid(float margin) {
  return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(margin))));
}

float logit_clamped(float p) {
  const double q = std::clamp(static_cast<double>(p), kLogitClamp, 1.0 - kLogitClamp);
  return static_cast<float>(std::log(q / (1.0 - q)));
}

GradHess logistic_grad_hess(float margin, float target) {
  const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(margin)));
  return {static_cast<float>(p - target), static_cast<float>(p * (1.0 - p))};
}

double logistic_loss(float margin, float target) {
  const double m = margin;
  // softplus(m) - y m
  const double softplus = m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
  return softplus - static_cast<double>(target) * m;
}

double mean_logistic_loss(std::span<const float> margins, std::span<const float> targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) total += logistic_loss(margins[i], targets[i]);
  return margins.empty() ? 0.0 : total / static_cast<double>(margins.size());
}

std::size_t bin_index(std::span<const float> bin_edges, float value) {
  // Branchless form of upper_bound(value) - 1, clamped at 0.
  if (bin_edges.empty()) return 0;
  const float* base = bin_edges.data();
  std::size_t n = bin_edges.size();
  while (n > 1) {
    const std::size_t half = n / 2;
    base = !(value < base[half]) ? base + half : base;
    n -= half;
  }
  return static_cast<std::size_t>(base - bin_edges.data());
}

std::vector<BinStats> build_histogram(std::span<const float> feature_column,
                                      std::span<const float> bin_edges,
                                      std::span<const GradHess> stats,
                                      std::span<const std::uint32_t> row_set) {
  std::vector<BinStats> hist(std::max<std::size_t>(bin_edges.size(), 1));
  for (std::uint32_t r : row_set) {
    BinStats& b = hist[bin_index(bin_edges, feature_column[r])];
    b.sum_g += stats[r].g;
    b.sum_h += stats[r].h;
    ++b.count;
  }
  return hist;
}

double split_gain(double g_left, double h_left, double g_right, double h_right,
                  const SplitParams& params) {
  const double l = params.lambda_l2;
  const double g = g_left + g_right;
  const double h = h_left + h_right;
  return 0.5 * (g_left * g_left / (h_left + l) + g_right * g_right / (h_right + l) -
                g * g / (h + l)) -
         params.gamma_min_gain;
}

std::optional<SplitCandidate> find_best_split(std::span<const FeatureHistogram> histograms,
                                              const SplitParams& params) {
  std::vector<std::optional<SplitCandidate>> per_feature(histograms.size());
  for (std::size_t f = 0; f < histograms.size(); ++f) {
    const auto& fh = histograms[f];
    double g = 0.0;
    double h = 0.0;
    std::uint64_t count = 0;
    for (const auto& b : fh.bins) {
      g += b.sum_g;
      h += b.sum_h;
      count += b.count;
    }
    per_feature[f] =
        scan_feature(static_cast<std::uint32_t>(f), fh.bin_edges, fh.bins, g, h, count, params);
  }
  return reduce_candidates(per_feature);
}

float Tree::leaf_value(std::span<const float> row) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf) {
    i = row[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  auto rec = [&](auto&& self, std::size_t i) -> int {
    if (nodes[i].is_leaf) return 0;
    return 1 + std::max(self(self, nodes[i].left), self(self, nodes[i].right));
  };
  return rec(rec, 0);
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf; }));
}

std::size_t Tree::internal_count() const { return nodes.size() - leaf_count(); }

BinCuts::BinCuts(std::vector<std::vector<float>> edges) : edges_(std::move(edges)) {
  offsets_.assign(1, 0);
  for (auto& e : edges_) {
    if (e.empty() || e.size() > 256 || !std::is_sorted(e.begin(), e.end()) ||
        std::adjacent_find(e.begin(), e.end()) != e.end()) {
      throw InvariantError("bin edges must be 1..256 strictly ascending values");
    }
    offsets_.push_back(offsets_.back() + e.size());
  }
}

BinCuts BinCuts::from_rows(const RowMatrix& sample, int max_bins) {
  if (sample.rows() == 0) throw InvariantError("cannot build bin cuts from zero rows");
  if (max_bins < 2 || max_bins > 256) throw ConfigError("histogram_bins must be in [2, 256]");
  const std::size_t rows = sample.rows();
  const std::size_t cols = sample.cols();
  std::vector<std::vector<float>> edges(cols);
  // Columns are gathered a block at a time to keep the row reads contiguous.
  constexpr std::size_t kBlock = 64;
  std::vector<float> block;
  for (std::size_t f0 = 0; f0 < cols; f0 += kBlock) {
    const std::size_t width = std::min(kBlock, cols - f0);
    block.resize(width * rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const float* src = sample.row(r).data() + f0;
      for (std::size_t j = 0; j < width; ++j) block[j * rows + r] = src[j];
    }
    for (std::size_t j = 0; j < width; ++j) {
      const auto column = std::span<float>(block).subspan(j * rows, rows);
      std::sort(column.begin(), column.end());
      std::vector<float> distinct(column.begin(), column.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      auto& e = edges[f0 + j];
      if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
        e = std::move(distinct);
        continue;
      }
      for (int k = 0; k < max_bins; ++k) {
        e.push_back(column[static_cast<std::size_t>(k) * rows / static_cast<std::size_t>(max_bins)]);
      }
      e.erase(std::unique(e.begin(), e.end()), e.end());
    }
  }
  return BinCuts(std::move(edges));
}

BinnedMatrix BinnedMatrix::from_rows(const RowMatrix& rows, const BinCuts& cuts) {
  BinnedMatrix m(rows.rows(), rows.cols());
  m.set_rows(0, rows.rows(), rows.data(), cuts);
  return m;
}

void BinnedMatrix::set_row(std::size_t row, std::span<const float> values,
                           const BinCuts& cuts) {
  set_rows(row, 1, values, cuts);
}

void BinnedMatrix::set_rows(std::size_t first_row, std::size_t count,
                            std::span<const float> values, const BinCuts& cuts) {
  if (values.size() != count * features_ || cuts.num_features() != features_) {
    throw InvariantError("BinnedMatrix::set_rows: feature-count mismatch");
  }
  if (first_row + count > rows_) throw InvariantError("BinnedMatrix::set_rows: row out of range");
  // Short row blocks keep both the strided reads and the column writes cached.
  constexpr std::size_t kBlock = 64;
  for (std::size_t r0 = 0; r0 < count; r0 += kBlock) {
    const std::size_t r1 = std::min(count, r0 + kBlock);
    for (std::size_t f = 0; f < features_; ++f) {
      const auto edges = cuts.edges(f);
      std::uint8_t* out = codes_.data() + f * rows_ + first_row;
      for (std::size_t r = r0; r < r1; ++r) {
        out[r] = static_cast<std::uint8_t>(bin_index(edges, values[r * features_ + f]));
      }
    }
  }
}

Tree fit_tree(const BinnedMatrix& features, const BinCuts& cuts,
              std::span<const GradHess> stats, std::span<const std::uint32_t> rows,
              const TrainConfig& config, int threads) {
  config.validate();
  TreeGrower grower(features, cuts, stats, config, threads);
  return grower.grow(rows).tree;
}

Tree fit_tree(const RowMatrix& features, std::span<const GradHess> stats,
              std::span<const std::uint32_t> rows, const TrainConfig& config) {
  const BinCuts cuts = BinCuts::from_rows(features, config.histogram_bins);
  const BinnedMatrix binned = BinnedMatrix::from_rows(features, cuts);
  return fit_tree(binned, cuts, stats, rows, config, 1);
}

TreeEnsemble fit_ensemble(const BinnedMatrix& features, const BinCuts& cuts,
                          std::span<const float> targets,
                          std::span<const float> base_margin, const TrainConfig& config,
                          const FitOptions& options) {
  config.validate();
  const std::size_t n = features.rows();
  check_fit_inputs(n, targets, base_margin);
  if (cuts.num_features() != features.features()) {
    throw InvariantError("fit_ensemble: feature-count mismatch between data and bin cuts");
  }

  TreeEnsemble ensemble;
  ensemble.config = config;
  ensemble.num_features = static_cast<std::uint32_t>(features.features());

  std::vector<float> margins(n);
  if (base_margin.empty()) {
    double mean = 0.0;
    for (float t : targets) mean += t;
    mean /= static_cast<double>(n);
    ensemble.base_score = logit_clamped(static_cast<float>(mean));
    std::fill(margins.begin(), margins.end(), ensemble.base_score);
  } else {
    ensemble.base_score = 0.0f;
    std::copy(base_margin.begin(), base_margin.end(), margins.begin());
  }

  std::vector<GradHess> stats(n);
  std::vector<std::uint32_t> rows;
  rows.reserve(n);
  TreeGrower grower(features, cuts, stats, config, options.threads);
  for (int t = 0; t < config.num_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) stats[i] = logistic_grad_hess(margins[i], targets[i]);
    rows.clear();
    for (std::uint32_t i = 0; i < n; ++i) {
      if (config.row_subsample >= 1.0f ||
          row_uniform(config.seed, static_cast<std::uint64_t>(t), i) < config.row_subsample) {
        rows.push_back(i);
      }
    }
    GrownTree grown;
    if (rows.empty()) {
      grown.tree.nodes.assign(1, TreeNode{});
      grown.split_bins.assign(1, 0);
    } else {
      grown = grower.grow(rows);
    }
    for (auto& node : grown.tree.nodes) {
      if (node.is_leaf) node.value = config.learning_rate * node.value;
    }
    for (std::size_t i = 0; i < n; ++i) margins[i] += binned_leaf(grown, features, i);
    ensemble.trees.push_back(std::move(grown.tree));
    if (options.on_round) options.on_round(static_cast<std::size_t>(t), margins);
  }
  return ensemble;
}

TreeEnsemble fit_ensemble(const RowMatrix& features, std::span<const float> targets,
                          std::span<const float> base_margin, const TrainConfig& config,
                          const FitOptions& options) {
  config.validate();
  check_fit_inputs(features.rows(), targets, base_margin);
  const BinCuts cuts = BinCuts::from_rows(features, config.histogram_bins);
  const BinnedMatrix binned = BinnedMatrix::from_rows(features, cuts);
  return fit_ensemble(binned, cuts, targets, base_margin, config, options);
}

std::vector<float> predict_margin(const TreeEnsemble& ensemble, const RowMatrix& features,
                                  std::span<const float> base_margin, int threads) {
  if (features.cols() != ensemble.num_features) {
    throw InvariantError("predict_margin: feature-count mismatch (model expects " +
                         std::to_string(ensemble.num_features) + ", got " +
                         std::to_string(features.cols()) + ")");
  }
  if (!base_margin.empty() && base_margin.size() != features.rows()) {
    throw InvariantError("predict_margin: base_margin length mismatch");
  }
  std::vector<float> out(features.rows());
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (features.rows() + kBlock - 1) / kBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t end = std::min(features.rows(), (b + 1) * kBlock);
    for (std::size_t r = b * kBlock; r < end; ++r) {
      float m = base_margin.empty() ? ensemble.base_score : base_margin[r];
      const auto row = features.row(r);
      for (const Tree& tree : ensemble.trees) m += tree.leaf_value(row);
      out[r] = m;
    }
  });
  return out;
}

}  // namespace greencod::gbdt
