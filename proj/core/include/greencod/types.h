#ifndef GREENCOD_TYPES_H_
#define GREENCOD_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace greencod {

// Single-channel H x W plane of f32 values, row-major. The tag keeps
// predictions and ground truth from being mixed up at call sites.
template <typename Tag>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Plane() = default;
  Plane(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }

  bool operator==(const Plane&) const = default;
};

struct ProbabilityTag {};
struct GroundTruthTag {};

// Per-pixel foreground probabilities in [0,1].
using ProbabilityMap = Plane<ProbabilityTag>;
// Binary or soft target in [0,1]; 1 marks the camouflaged object.
using GroundTruthMask = Plane<GroundTruthTag>;

// Read-only view of a [height][width][channels] f32 grid.
struct GridView {
  std::span<const float> data;
  int height = 0;
  int width = 0;
  int channels = 1;
};

// Owning [height][width][channels] f32 grid.
struct Grid {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> data;

  GridView view() const { return {data, height, width, channels}; }
};

template <typename Tag>
GridView as_grid(const Plane<Tag>& plane) {
  return {plane.values, plane.height, plane.width, 1};
}

// Dense row-major matrix of f32 feature vectors, one row per sample.
class RowMatrix {
 public:
  RowMatrix() = default;
  RowMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  bool operator==(const RowMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

}  // namespace greencod

#endif  // GREENCOD_TYPES_H_
