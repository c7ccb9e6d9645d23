#include <algorithm>
#include <cmath>

#include "greencod/cascade.h"
#include "greencod/error.h"
#include "resize_detail.h"

namespace greencod {
namespace detail {

std::vector<AxisTap> bilinear_axis(int in_size, int out_size) {
  std::vector<AxisTap> taps(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<int>(std::floor(src));
    AxisTap& t = taps[o];
    if (i0 >= in_size - 1) {
      t.i0 = t.i1 = in_size - 1;
      t.w = 0.0f;
    } else {
      t.i0 = i0;
      t.i1 = i0 + 1;
      t.w = static_cast<float>(src - i0);
    }
  }
  return taps;
}

}  // namespace detail

namespace cascade {
namespace {

// Overlap weights of an area-average resample along one axis.
std::vector<std::vector<std::pair<int, double>>> area_axis(int in_size, int out_size) {
  std::vector<std::vector<std::pair<int, double>>> taps(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in_size - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int i = first; i <= last; ++i) {
      const double overlap = std::min<double>(i + 1, hi) - std::max<double>(i, lo);
      if (overlap > 0.0) taps[o].emplace_back(i, overlap / scale);
    }
  }
  return taps;
}

}  // namespace

Grid resize_bilinear(GridView input, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw InvariantError("resize_bilinear: zero-sized target");
  if (input.height <= 0 || input.width <= 0 || input.channels <= 0 ||
      input.data.size() !=
          static_cast<std::size_t>(input.height) * input.width * input.channels) {
    throw InvariantError("resize_bilinear: malformed input grid");
  }
  const auto ys = detail::bilinear_axis(input.height, out_h);
  const auto xs = detail::bilinear_axis(input.width, out_w);
  const int c = input.channels;
  Grid out{out_h, out_w, c, std::vector<float>(static_cast<std::size_t>(out_h) * out_w * c)};
  const float* src = input.data.data();
  const auto at = [&](int y, int x) {
    return src + (static_cast<std::size_t>(y) * input.width + x) * c;
  };
  float* dst = out.data.data();
  for (int y = 0; y < out_h; ++y) {
    const auto& ty = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const auto& tx = xs[x];
      const float* a = at(ty.i0, tx.i0);
      const float* b = at(ty.i0, tx.i1);
      const float* d = at(ty.i1, tx.i0);
      const float* e = at(ty.i1, tx.i1);
      for (int k = 0; k < c; ++k) {
        const float top = detail::lerp(a[k], b[k], tx.w);
        const float bottom = detail::lerp(d[k], e[k], tx.w);
        *dst++ = detail::lerp(top, bottom, ty.w);
      }
    }
  }
  return out;
}

ProbabilityMap resize_bilinear(const ProbabilityMap& map, int out_h, int out_w) {
  Grid g = resize_bilinear(as_grid(map), out_h, out_w);
  ProbabilityMap out;
  out.height = out_h;
  out.width = out_w;
  out.values = std::move(g.data);
  return out;
}

GroundTruthMask downsample_gt(const GroundTruthMask& mask, int resolution) {
  if (resolution <= 0) throw InvariantError("downsample_gt: zero-sized target");
  if (mask.height <= 0 || mask.width <= 0) throw InvariantError("downsample_gt: empty mask");
  const auto ys = area_axis(mask.height, resolution);
  const auto xs = area_axis(mask.width, resolution);
  GroundTruthMask out(resolution, resolution);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      double acc = 0.0;
      for (const auto& [sy, wy] : ys[y]) {
        double row = 0.0;
        for (const auto& [sx, wx] : xs[x]) row += wx * mask.at(sy, sx);
        acc += wy * row;
      }
      out.at(y, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

ProbabilityMap upsample_prediction(const ProbabilityMap& map, int out_h, int out_w) {
  ProbabilityMap out = resize_bilinear(map, out_h, out_w);
  for (float& v : out.values) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace cascade
}  // namespace greencod
