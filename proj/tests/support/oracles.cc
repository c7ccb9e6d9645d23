#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace greencod::oracle {
namespace {

constexpr double kEps = 2.220446049250313e-16;

struct Stats {
  double g = 0.0;
  double h = 0.0;
};

float logit(double p) {
  p = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
  return static_cast<float>(std::log(p / (1.0 - p)));
}

double gain_of(const Stats& l, const Stats& r, const GreedyParams& p) {
  auto score = [&](double g, double h) { return g * g / (h + p.lambda); };
  return 0.5 * (score(l.g, l.h) + score(r.g, r.h) - score(l.g + r.g, l.h + r.h)) - p.gamma;
}

class Builder {
 public:
  Builder(const std::vector<std::vector<float>>& rows, const std::vector<float>& g,
          const std::vector<float>& h, const GreedyParams& params)
      : rows_(rows), g_(g), h_(h), params_(params) {
    const std::size_t nf = rows.empty() ? 0 : rows[0].size();
    candidates_.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      std::set<float> distinct;
      for (const auto& r : rows) distinct.insert(r[f]);
      candidates_[f].assign(distinct.begin(), distinct.end());
    }
  }

  int build(const std::vector<std::size_t>& members, int depth, GreedyTree& tree) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    Stats total;
    for (std::size_t r : members) {
      total.g += g_[r];
      total.h += h_[r];
    }
    int best_f = -1;
    float best_t = 0.0f;
    double best_gain = 0.0;
    if (depth < params_.max_depth && members.size() >= 2) {
      for (std::size_t f = 0; f < candidates_.size(); ++f) {
        // The smallest candidate can never leave anything on the left.
        for (std::size_t c = 1; c < candidates_[f].size(); ++c) {
          const float t = candidates_[f][c];
          Stats left;
          Stats right;
          std::size_t nl = 0;
          for (std::size_t r : members) {
            if (rows_[r][f] < t) {
              left.g += g_[r];
              left.h += h_[r];
              ++nl;
            }
          }
          if (nl == 0 || nl == members.size()) continue;
          right.g = total.g - left.g;
          right.h = total.h - left.h;
          if (left.h < params_.min_child_hessian || right.h < params_.min_child_hessian) continue;
          const double gain = gain_of(left, right, params_);
          if (gain > best_gain) {
            best_gain = gain;
            best_f = static_cast<int>(f);
            best_t = t;
          }
        }
      }
    }
    if (best_f < 0) {
      tree.nodes[id].leaf = true;
      tree.nodes[id].value = static_cast<float>(-total.g / (total.h + params_.lambda));
      return id;
    }
    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : members) {
      (rows_[r][best_f] < best_t ? left_rows : right_rows).push_back(r);
    }
    tree.nodes[id].leaf = false;
    tree.nodes[id].feature = best_f;
    tree.nodes[id].threshold = best_t;
    const int l = build(left_rows, depth + 1, tree);
    const int r = build(right_rows, depth + 1, tree);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

 private:
  const std::vector<std::vector<float>>& rows_;
  const std::vector<float>& g_;
  const std::vector<float>& h_;
  const GreedyParams& params_;
  std::vector<std::vector<float>> candidates_;
};

float tree_value(const GreedyTree& t, const std::vector<float>& row) {
  int n = 0;
  while (!t.nodes[n].leaf) {
    n = row[t.nodes[n].feature] < t.nodes[n].threshold ? t.nodes[n].left : t.nodes[n].right;
  }
  return t.nodes[n].value;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double object(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double x = mean(v);
  return 2.0 * x / (x * x + 1.0 + sample_std(v) + kEps);
}

double ssim(const std::vector<double>& p, const std::vector<double>& g) {
  const double n = static_cast<double>(p.size());
  const double x = mean(p);
  const double y = mean(g);
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sx += (p[i] - x) * (p[i] - x);
    sy += (g[i] - y) * (g[i] - y);
    sxy += (p[i] - x) * (g[i] - y);
  }
  sx /= n - 1 + kEps;
  sy /= n - 1 + kEps;
  sxy /= n - 1 + kEps;
  const double a = 4 * x * y * sxy;
  const double b = (x * x + y * y) * (sx + sy);
  if (a != 0) return a / (b + kEps);
  if (b == 0) return 1.0;
  return 0.0;
}

double round_half_away(double v) { return v < 0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5); }

}  // namespace

GreedyModel exact_greedy(const std::vector<std::vector<float>>& rows,
                         const std::vector<float>& targets, const GreedyParams& params) {
  GreedyModel model;
  double sum = 0.0;
  for (float t : targets) sum += t;
  model.base = logit(sum / static_cast<double>(targets.size()));
  std::vector<float> margin(rows.size(), model.base);
  std::vector<float> g(rows.size());
  std::vector<float> h(rows.size());
  std::vector<std::size_t> all(rows.size());
  std::iota(all.begin(), all.end(), 0);
  for (int t = 0; t < params.num_trees; ++t) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(margin[i])));
      g[i] = static_cast<float>(p - targets[i]);
      h[i] = static_cast<float>(p * (1.0 - p));
    }
    GreedyTree tree;
    Builder(rows, g, h, params).build(all, 0, tree);
    for (auto& n : tree.nodes) {
      if (n.leaf) n.value = static_cast<float>(params.learning_rate) * n.value;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) margin[i] += tree_value(tree, rows[i]);
    model.trees.push_back(std::move(tree));
  }
  model.train_margins = margin;
  return model;
}

float greedy_predict(const GreedyModel& model, const std::vector<float>& row) {
  float m = model.base;
  for (const auto& t : model.trees) m += tree_value(t, row);
  return m;
}

long double logistic_loss_ld(long double margin, long double target) {
  return std::log1p(std::exp(margin)) - target * margin;
}

Image bilinear(const Image& in, int out_h, int out_w) {
  Image out{out_h, out_w, std::vector<double>(static_cast<std::size_t>(out_h) * out_w)};
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double sy = (oy + 0.5) * in.h / out_h - 0.5;
      double sx = (ox + 0.5) * in.w / out_w - 0.5;
      sy = std::max(sy, 0.0);
      sx = std::max(sx, 0.0);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), in.h - 1);
      const int x0 = std::min(static_cast<int>(std::floor(sx)), in.w - 1);
      const int y1 = std::min(y0 + 1, in.h - 1);
      const int x1 = std::min(x0 + 1, in.w - 1);
      const double wy = sy - y0;
      const double wx = sx - x0;
      out.v[static_cast<std::size_t>(oy) * out_w + ox] =
          (1 - wy) * ((1 - wx) * in(y0, x0) + wx * in(y0, x1)) +
          wy * ((1 - wx) * in(y1, x0) + wx * in(y1, x1));
    }
  }
  return out;
}

Image area_average(const Image& in, int out_h, int out_w) {
  Image out{out_h, out_w, std::vector<double>(static_cast<std::size_t>(out_h) * out_w)};
  for (int oy = 0; oy < out_h; ++oy) {
    const double ya = static_cast<double>(oy) * in.h / out_h;
    const double yb = static_cast<double>(oy + 1) * in.h / out_h;
    for (int ox = 0; ox < out_w; ++ox) {
      const double xa = static_cast<double>(ox) * in.w / out_w;
      const double xb = static_cast<double>(ox + 1) * in.w / out_w;
      double acc = 0.0;
      double area = 0.0;
      for (int y = 0; y < in.h; ++y) {
        const double oy_len = std::min<double>(y + 1, yb) - std::max<double>(y, ya);
        if (oy_len <= 0) continue;
        for (int x = 0; x < in.w; ++x) {
          const double ox_len = std::min<double>(x + 1, xb) - std::max<double>(x, xa);
          if (ox_len <= 0) continue;
          acc += oy_len * ox_len * in(y, x);
          area += oy_len * ox_len;
        }
      }
      out.v[static_cast<std::size_t>(oy) * out_w + ox] = acc / area;
    }
  }
  return out;
}

std::vector<double> neighborhood(const Image& in, int y, int x, int window) {
  std::vector<double> out;
  const int r = window / 2;
  for (int i = 0; i < window; ++i) {
    for (int j = 0; j < window; ++j) {
      int yy = y - r + i;
      int xx = x - r + j;
      if (yy < 0) yy = 0;
      if (yy >= in.h) yy = in.h - 1;
      if (xx < 0) xx = 0;
      if (xx >= in.w) xx = in.w - 1;
      out.push_back(in(yy, xx));
    }
  }
  return out;
}

double s_measure(const Image& pred, const Image& gt, double alpha) {
  const int hei = gt.h;
  const int wid = gt.w;
  std::vector<int> G(gt.v.size());
  for (std::size_t i = 0; i < G.size(); ++i) G[i] = gt.v[i] > 0.5 ? 1 : 0;
  const double y = std::accumulate(G.begin(), G.end(), 0.0) / static_cast<double>(G.size());
  if (y == 0) return 1.0 - mean(pred.v);
  if (y == 1) return mean(pred.v);

  // S_object
  std::vector<double> fg;
  std::vector<double> bg;
  for (std::size_t i = 0; i < G.size(); ++i) {
    if (G[i]) fg.push_back(pred.v[i]);
    else bg.push_back(1.0 - pred.v[i]);
  }
  const double so = y * object(fg) + (1 - y) * object(bg);

  // S_region: centroid (1-based), quadrants, weighted SSIM.
  double total = 0.0, sx = 0.0, sy = 0.0;
  for (int r = 0; r < hei; ++r) {
    for (int c = 0; c < wid; ++c) {
      if (G[static_cast<std::size_t>(r) * wid + c]) {
        total += 1;
        sx += c + 1;
        sy += r + 1;
      }
    }
  }
  const int X = static_cast<int>(round_half_away(sx / total));
  const int Y = static_cast<int>(round_half_away(sy / total));
  const double area = static_cast<double>(wid) * hei;
  const double w1 = static_cast<double>(X) * Y / area;
  const double w2 = static_cast<double>(wid - X) * Y / area;
  const double w3 = static_cast<double>(X) * (hei - Y) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  auto quadrant = [&](int r0, int r1, int c0, int c1) {
    std::vector<double> p;
    std::vector<double> g;
    for (int r = r0; r < r1; ++r) {
      for (int c = c0; c < c1; ++c) {
        p.push_back(pred(r, c));
        g.push_back(G[static_cast<std::size_t>(r) * wid + c]);
      }
    }
    return p.empty() ? 0.0 : ssim(p, g);
  };
  const double sr = w1 * quadrant(0, Y, 0, X) + w2 * quadrant(0, Y, X, wid) +
                    w3 * quadrant(Y, hei, 0, X) + w4 * quadrant(Y, hei, X, wid);
  return std::max(0.0, alpha * so + (1 - alpha) * sr);
}

double enhanced_alignment(const std::vector<int>& fm, const std::vector<int>& gt) {
  const double n = static_cast<double>(fm.size());
  double sum_gt = 0.0;
  double sum_fm = 0.0;
  for (std::size_t i = 0; i < fm.size(); ++i) {
    sum_gt += gt[i];
    sum_fm += fm[i];
  }
  double total = 0.0;
  if (sum_gt == 0) {
    for (int f : fm) total += 1.0 - f;
  } else if (sum_gt == n) {
    for (int f : fm) total += f;
  } else {
    const double mf = sum_fm / n;
    const double mg = sum_gt / n;
    for (std::size_t i = 0; i < fm.size(); ++i) {
      const double af = fm[i] - mf;
      const double ag = gt[i] - mg;
      const double align = 2.0 * ag * af / (ag * ag + af * af + kEps);
      total += (align + 1) * (align + 1) / 4.0;
    }
  }
  return total / n;
}

double e_measure_mean(const Image& pred, const Image& gt) {
  std::vector<int> G(gt.v.size());
  for (std::size_t i = 0; i < G.size(); ++i) G[i] = gt.v[i] > 0.5;
  double acc = 0.0;
  for (int k = 0; k < 256; ++k) {
    std::vector<int> fm(pred.v.size());
    for (std::size_t i = 0; i < fm.size(); ++i) fm[i] = pred.v[i] > k / 256.0;
    acc += enhanced_alignment(fm, G);
  }
  return acc / 256.0;
}

double e_measure_adaptive(const Image& pred, const Image& gt) {
  const double thr = std::min(2.0 * mean(pred.v), 1.0);
  std::vector<int> G(gt.v.size());
  std::vector<int> fm(pred.v.size());
  for (std::size_t i = 0; i < G.size(); ++i) {
    G[i] = gt.v[i] > 0.5;
    fm[i] = pred.v[i] >= thr;
  }
  return enhanced_alignment(fm, G);
}

double f_measure(const Image& pred, const Image& gt, double threshold, double beta_sq) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const bool f = pred.v[i] >= threshold;
    const bool t = gt.v[i] > 0.5;
    tp += f && t;
    fp += f && !t;
    fn += !f && t;
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  if (beta_sq * precision + recall == 0) return 0.0;
  return (1 + beta_sq) * precision * recall / (beta_sq * precision + recall);
}

}  // namespace greencod::oracle
