#ifndef GREENCOD_TOOLS_SYNTHETIC_H_
#define GREENCOD_TOOLS_SYNTHETIC_H_

// Deterministic synthetic camouflage suite: wobbly blobs whose backbone-like
// feature maps carry only a weak object signal under a shared texture field
// that covers object and background alike.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "greencod/tensorio.h"
#include "greencod/types.h"

namespace greencod::synthetic {

struct BlockSpec {
  const char* name;
  int size;
  int channels;
};

// Eight blocks, 1152 channels in total.
inline constexpr std::array<BlockSpec, 8> kBlocks = {{
    {"block1", 84, 48},
    {"block2", 84, 24},
    {"block3", 42, 32},
    {"block4", 21, 56},
    {"block5", 21, 112},
    {"block6", 21, 160},
    {"block7", 11, 272},
    {"block8", 11, 448},
}};

struct SuiteOptions {
  int num_images = 50;
  int mask_size = 336;
  std::uint64_t seed = 20231015;
};

// Small counter-based generator; identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

GroundTruthMask make_mask(std::uint64_t seed, int size);
FeatureStack make_feature_stack(const GroundTruthMask& mask, std::uint64_t seed,
                                const std::string& image_id);

// Writes <dir>/features/<id>.gcfm, <dir>/masks/<id>.png and
// <dir>/manifest.tsv (split "train"); returns the manifest path.
std::filesystem::path generate_suite(const std::filesystem::path& dir,
                                     const SuiteOptions& options = {});

}  // namespace greencod::synthetic

#endif  // GREENCOD_TOOLS_SYNTHETIC_H_
