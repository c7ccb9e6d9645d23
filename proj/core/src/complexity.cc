#include "greencod/complexity.h"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "greencod/error.h"

namespace greencod::complexity {
namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw InvariantError("complexity: overflow");
  return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw InvariantError("complexity: overflow");
  return out;
}

double pct(std::uint64_t part, std::uint64_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(total);
}

std::string fmt_pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f%%", v);
  return buf;
}

}  // namespace

std::uint64_t tree_ensemble_params(std::uint64_t num_trees, std::uint32_t depth) {
  if (num_trees == 0 || depth == 0) throw InvariantError("tree_ensemble_params: zero input");
  if (depth > 60) throw InvariantError("complexity: overflow");
  const std::uint64_t per_tree = 3 * (std::uint64_t{1} << depth) - 2;
  return checked_mul(num_trees, per_tree);
}

std::uint64_t tree_ensemble_macs(std::uint64_t height, std::uint64_t width,
                                 std::uint64_t num_trees, std::uint32_t depth) {
  if (height == 0 || width == 0 || num_trees == 0 || depth == 0) {
    throw InvariantError("tree_ensemble_macs: zero input");
  }
  return checked_mul(checked_mul(checked_mul(height, width), num_trees),
                     static_cast<std::uint64_t>(depth) + 1);
}

ComplexityReport cascade_complexity(std::span<const cascade::StageConfig> stages,
                                    bool include_backbone) {
  ComplexityReport report;
  if (include_backbone) {
    report.rows.push_back({"EfficientNetB4", 0, 0, 0, kBackboneParams, 0.0, kBackboneMacs, 0.0});
  }
  for (const auto& s : stages) {
    ComplexityRow row;
    row.name = "XGBoost " + std::to_string(s.stage_index);
    row.size = s.resolution;
    row.num_trees = s.train.num_trees;
    row.depth = s.train.max_depth;
    row.params = tree_ensemble_params(static_cast<std::uint64_t>(s.train.num_trees),
                                      static_cast<std::uint32_t>(s.train.max_depth));
    row.macs = tree_ensemble_macs(static_cast<std::uint64_t>(s.resolution),
                                  static_cast<std::uint64_t>(s.resolution),
                                  static_cast<std::uint64_t>(s.train.num_trees),
                                  static_cast<std::uint32_t>(s.train.max_depth));
    report.rows.push_back(row);
  }
  for (const auto& r : report.rows) {
    report.total_params = checked_add(report.total_params, r.params);
    report.total_macs = checked_add(report.total_macs, r.macs);
  }
  for (auto& r : report.rows) {
    r.params_pct = pct(r.params, report.total_params);
    r.macs_pct = pct(r.macs, report.total_macs);
  }
  return report;
}

TrainedSize measure_trained_ensemble(const gbdt::TreeEnsemble& ensemble) {
  TrainedSize out;
  for (const auto& tree : ensemble.trees) {
    for (const auto& node : tree.nodes) out.params += node.is_leaf ? 1 : 2;
    out.macs_per_pixel += static_cast<std::uint64_t>(tree.depth()) + 1;
  }
  if (!ensemble.trees.empty()) {
    const auto depth = static_cast<std::uint32_t>(ensemble.config.max_depth);
    out.params_upper_bound = tree_ensemble_params(ensemble.trees.size(), depth);
    out.macs_per_pixel_upper_bound = tree_ensemble_macs(1, 1, ensemble.trees.size(), depth);
  }
  return out;
}

std::string with_commas(std::uint64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  const int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string format_table(const ComplexityReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %6s %8s %6s %26s %30s\n", "Submodule", "Size",
                "Trees", "Depth", "Parameters (%)", "MACs (%)");
  out << line;
  for (const auto& r : report.rows) {
    const std::string p = with_commas(r.params) + " (" + fmt_pct(r.params_pct) + ")";
    const std::string m = with_commas(r.macs) + " (" + fmt_pct(r.macs_pct) + ")";
    const std::string size = r.size ? std::to_string(r.size) : "-";
    const std::string trees = r.num_trees ? std::to_string(r.num_trees) : "-";
    const std::string depth = r.depth ? std::to_string(r.depth) : "-";
    std::snprintf(line, sizeof(line), "%-16s %6s %8s %6s %26s %30s\n", r.name.c_str(),
                  size.c_str(), trees.c_str(), depth.c_str(), p.c_str(), m.c_str());
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-16s %6s %8s %6s %26s %30s\n", "Total", "-", "-", "-",
                with_commas(report.total_params).c_str(),
                with_commas(report.total_macs).c_str());
  out << line;
  return out.str();
}

std::string format_json(const ComplexityReport& report) {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["size"] = r.size;
    row["num_trees"] = r.num_trees;
    row["depth"] = r.depth;
    row["params"] = r.params;
    row["params_pct"] = r.params_pct;
    row["macs"] = r.macs;
    row["macs_pct"] = r.macs_pct;
    j["rows"].push_back(row);
  }
  j["totals"] = {{"params", report.total_params}, {"macs", report.total_macs}};
  return j.dump(2);
}

}  // namespace greencod::complexity
