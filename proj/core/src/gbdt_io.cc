#include <cstdio>
#include <sstream>

#include "binary_io.h"
#include "greencod/error.h"
#include "greencod/gbdt.h"

namespace greencod::gbdt {
namespace {

constexpr char kMagic[] = "GCTE";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kInternal = 0;
constexpr std::uint8_t kLeaf = 1;

void write_node(detail::ByteWriter& w, const Tree& tree, std::size_t i) {
  const TreeNode& n = tree.nodes[i];
  if (n.is_leaf) {
    w.put_u8(kLeaf);
    w.put_f32(n.value);
    return;
  }
  w.put_u8(kInternal);
  w.put_u32(n.feature);
  w.put_f32(n.threshold);
  write_node(w, tree, static_cast<std::size_t>(n.left));
  write_node(w, tree, static_cast<std::size_t>(n.right));
}

std::int32_t read_node(detail::ByteReader& r, Tree& tree, std::uint32_t num_features,
                       int depth) {
  if (depth > 64) throw FormatError("GCTE: tree deeper than 64 levels");
  const auto pos = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  const std::uint8_t flag = r.get_u8();
  if (flag == kLeaf) {
    tree.nodes[pos].value = r.get_f32();
    return pos;
  }
  if (flag != kInternal) throw FormatError("GCTE: bad node flag " + std::to_string(flag));
  TreeNode n;
  n.is_leaf = false;
  n.feature = r.get_u32();
  n.threshold = r.get_f32();
  if (n.feature >= num_features) throw FormatError("GCTE: split feature out of range");
  n.left = read_node(r, tree, num_features, depth + 1);
  n.right = read_node(r, tree, num_features, depth + 1);
  tree.nodes[pos] = n;
  return pos;
}

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

void text_node(std::ostringstream& out, const Tree& tree, std::size_t i, int depth) {
  const TreeNode& n = tree.nodes[i];
  out << std::string(static_cast<std::size_t>(depth) * 2, ' ');
  if (n.is_leaf) {
    out << "leaf value=" << fmt_float(n.value) << '\n';
    return;
  }
  out << "split f" << n.feature << " < " << fmt_float(n.threshold) << '\n';
  text_node(out, tree, static_cast<std::size_t>(n.left), depth + 1);
  text_node(out, tree, static_cast<std::size_t>(n.right), depth + 1);
}

}  // namespace

std::vector<std::uint8_t> serialize(const TreeEnsemble& ensemble) {
  detail::ByteWriter w;
  const TrainConfig& c = ensemble.config;
  w.put_raw({kMagic, 4});
  w.put_u32(kVersion);
  w.put_u32(static_cast<std::uint32_t>(c.num_trees));
  w.put_u32(static_cast<std::uint32_t>(c.max_depth));
  w.put_f32(c.learning_rate);
  w.put_f32(c.lambda_l2);
  w.put_f32(c.gamma_min_gain);
  w.put_f32(c.min_child_hessian);
  w.put_u32(static_cast<std::uint32_t>(c.histogram_bins));
  w.put_f32(c.row_subsample);
  w.put_u64(c.seed);
  w.put_u32(ensemble.num_features);
  w.put_f32(ensemble.base_score);
  w.put_u32(static_cast<std::uint32_t>(ensemble.trees.size()));
  for (const Tree& t : ensemble.trees) {
    if (t.nodes.empty()) throw InvariantError("serialize: empty tree");
    write_node(w, t, 0);
  }
  return w.take();
}

TreeEnsemble deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "GCTE");
  if (r.remaining() < 4 || r.get_string(4) != std::string_view(kMagic, 4)) {
    throw FormatError("GCTE: bad magic");
  }
  const std::uint32_t version = r.get_u32();
  if (version != kVersion) {
    throw FormatError("GCTE: unsupported version " + std::to_string(version));
  }
  TreeEnsemble e;
  TrainConfig& c = e.config;
  c.num_trees = static_cast<int>(r.get_u32());
  c.max_depth = static_cast<int>(r.get_u32());
  c.learning_rate = r.get_f32();
  c.lambda_l2 = r.get_f32();
  c.gamma_min_gain = r.get_f32();
  c.min_child_hessian = r.get_f32();
  c.histogram_bins = static_cast<int>(r.get_u32());
  c.row_subsample = r.get_f32();
  c.seed = r.get_u64();
  e.num_features = r.get_u32();
  e.base_score = r.get_f32();
  const std::uint32_t count = r.get_u32();
  if (count > static_cast<std::uint32_t>(c.num_trees)) {
    throw FormatError("GCTE: tree count exceeds configured num_trees");
  }
  e.trees.resize(count);
  for (Tree& t : e.trees) read_node(r, t, e.num_features, 0);
  if (!r.at_end()) throw FormatError("GCTE: trailing bytes");
  return e;
}

void save_ensemble(const TreeEnsemble& ensemble, const std::filesystem::path& path) {
  detail::write_file_bytes(path, serialize(ensemble));
}

TreeEnsemble load_ensemble(const std::filesystem::path& path) {
  return deserialize(detail::read_file_bytes(path));
}

std::string to_text(const TreeEnsemble& ensemble) {
  const TrainConfig& c = ensemble.config;
  std::ostringstream out;
  out << "gcte version=" << kVersion << '\n';
  out << "config num_trees=" << c.num_trees << " max_depth=" << c.max_depth
      << " learning_rate=" << fmt_float(c.learning_rate)
      << " lambda_l2=" << fmt_float(c.lambda_l2)
      << " gamma_min_gain=" << fmt_float(c.gamma_min_gain)
      << " min_child_hessian=" << fmt_float(c.min_child_hessian)
      << " histogram_bins=" << c.histogram_bins
      << " row_subsample=" << fmt_float(c.row_subsample) << " seed=" << c.seed << '\n';
  out << "num_features=" << ensemble.num_features
      << " base_score=" << fmt_float(ensemble.base_score)
      << " trees=" << ensemble.trees.size() << '\n';
  for (std::size_t t = 0; t < ensemble.trees.size(); ++t) {
    out << "tree " << t << '\n';
    text_node(out, ensemble.trees[t], 0, 1);
  }
  return out.str();
}

}  // namespace greencod::gbdt
