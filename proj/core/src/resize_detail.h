#ifndef GREENCOD_SRC_RESIZE_DETAIL_H_
#define GREENCOD_SRC_RESIZE_DETAIL_H_

#include <vector>

namespace greencod::detail {

// Source taps for one output coordinate of a half-pixel-center bilinear
// resize: value = src[i0] + w * (src[i1] - src[i0]).
struct AxisTap {
  int i0 = 0;
  int i1 = 0;
  float w = 0.0f;
};

std::vector<AxisTap> bilinear_axis(int in_size, int out_size);

inline float lerp(float a, float b, float w) { return a + w * (b - a); }

}  // namespace greencod::detail

#endif  // GREENCOD_SRC_RESIZE_DETAIL_H_
