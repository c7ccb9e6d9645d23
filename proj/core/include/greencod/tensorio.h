#ifndef GREENCOD_TENSORIO_H_
#define GREENCOD_TENSORIO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "greencod/types.h"

namespace greencod {

// Channel total produced by the eight captured backbone blocks.
inline constexpr int kBackboneChannels = 1152;
// Side of the square backbone input image.
inline constexpr int kBackboneInputSize = 672;

// One backbone block output at its native resolution, row-major [h][w][c].
struct FeatureTensor {
  std::string name;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  GridView view() const { return {data, height, width, channels}; }
  bool operator==(const FeatureTensor&) const = default;
};

// Ordered collection of block outputs for one image.
struct FeatureStack {
  std::vector<FeatureTensor> tensors;
  std::string source_image_id;
  int input_size = kBackboneInputSize;

  int total_channels() const;
  bool operator==(const FeatureStack&) const = default;
};

// Throws InvariantError if a tensor's payload size disagrees with its shape,
// a dimension is zero, or two tensors share a name.
void validate_feature_stack(const FeatureStack& stack);

// GCFM container:
//   "GCFM" | version u32 (=1) | tensor_count u32 |
//   per tensor: name_len u16, name, height u32, width u32, channels u32,
//               payload f32[h*w*c]
// All integers and floats little-endian. Output is byte-deterministic.
void write_feature_stack(const FeatureStack& stack,
                         const std::filesystem::path& destination);

// The container carries no image id, so the returned stack takes its
// source_image_id from the file stem and input_size from kBackboneInputSize.
FeatureStack read_feature_stack(const std::filesystem::path& source);

// Reads an 8-bit single-channel PNG and scales pixels by v/255.
GroundTruthMask read_mask(const std::filesystem::path& source);

// Writes an 8-bit grayscale PNG with pixel = floor(v * 255 + 0.5).
void write_mask(const ProbabilityMap& map, const std::filesystem::path& destination);

enum class DatasetSplit { kUnspecified, kTrain, kTest };

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path feature_stack_path;
  std::filesystem::path gt_mask_path;
  int original_height = 0;
  int original_width = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  DatasetSplit split = DatasetSplit::kUnspecified;
  // Entries whose feature stack or mask path did not exist at load time.
  std::vector<std::string> missing;
};

// Line format (UTF-8, tab separated):
//   image_id  feature_stack_path  gt_mask_path  original_height  original_width
// Blank lines and lines starting with '#' are ignored, except the directive
// "#split<TAB>train" / "#split<TAB>test". Relative feature paths are resolved
// against `feature_base` when given, otherwise against the manifest's
// directory; relative mask paths always against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& source,
                              const std::optional<std::filesystem::path>& feature_base = {});

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& destination);

}  // namespace greencod

#endif  // GREENCOD_TENSORIO_H_
