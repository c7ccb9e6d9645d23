#ifndef GREENCOD_COMPLEXITY_H_
#define GREENCOD_COMPLEXITY_H_

// Parameter and multiply-accumulate accounting for the cascade.
//
// A depth-d tree is counted as a full binary tree: 2^d - 1 internal nodes
// (feature index + threshold = 2 parameters each) and 2^d leaves (1 each),
// so 3 * 2^d - 2 parameters. Evaluating one tree on one pixel costs d
// comparisons plus one accumulate.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "greencod/cascade.h"
#include "greencod/gbdt.h"

namespace greencod::complexity {

// EfficientNetB4 constants at a 672 x 672 input.
inline constexpr std::uint64_t kBackboneParams = 16'742'216;
inline constexpr std::uint64_t kBackboneMacs = 13'503'446'880;

// trees * (3 * 2^depth - 2). Throws InvariantError on overflow or zero input.
std::uint64_t tree_ensemble_params(std::uint64_t num_trees, std::uint32_t depth);

// height * width * trees * (depth + 1). Throws InvariantError on overflow or
// zero input.
std::uint64_t tree_ensemble_macs(std::uint64_t height, std::uint64_t width,
                                 std::uint64_t num_trees, std::uint32_t depth);

struct ComplexityRow {
  std::string name;
  // 0 for the backbone row.
  int size = 0;
  int num_trees = 0;
  int depth = 0;
  std::uint64_t params = 0;
  double params_pct = 0.0;
  std::uint64_t macs = 0;
  double macs_pct = 0.0;
};

struct ComplexityReport {
  std::vector<ComplexityRow> rows;
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;
};

ComplexityReport cascade_complexity(std::span<const cascade::StageConfig> stages,
                                    bool include_backbone);

struct TrainedSize {
  // Sum over nodes: 2 per internal node, 1 per leaf.
  std::uint64_t params = 0;
  // Sum over trees of (tree depth + 1).
  std::uint64_t macs_per_pixel = 0;
  // Full-tree counts at the configured depth and the actual tree count.
  std::uint64_t params_upper_bound = 0;
  std::uint64_t macs_per_pixel_upper_bound = 0;
};

TrainedSize measure_trained_ensemble(const gbdt::TreeEnsemble& ensemble);

// Fixed-width table with thousands separators and percentages.
std::string format_table(const ComplexityReport& report);
// JSON object with "rows" and "totals".
std::string format_json(const ComplexityReport& report);

// "17,622,216"
std::string with_commas(std::uint64_t value);

}  // namespace greencod::complexity

#endif  // GREENCOD_COMPLEXITY_H_
