#include "synthetic/synthetic.h"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "greencod/cascade.h"

namespace greencod::synthetic {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string image_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "syn_%03d", index);
  return buf;
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (stream * 0xD1342543DE82EF95ull));
  return r.next();
}

// Low-frequency texture shared by object and background.
struct Texture {
  std::array<double, 6> fx{}, fy{}, phase{}, amp{};

  explicit Texture(Rng& rng) {
    for (int i = 0; i < 6; ++i) {
      fx[i] = rng.uniform(-6.0, 6.0);
      fy[i] = rng.uniform(-6.0, 6.0);
      phase[i] = rng.uniform(0.0, kTwoPi);
      amp[i] = rng.uniform(0.3, 1.0);
    }
  }

  // (u, v) in [0,1)^2
  double at(double u, double v) const {
    double s = 0.0;
    for (int i = 0; i < 6; ++i) s += amp[i] * std::sin(kTwoPi * (fx[i] * u + fy[i] * v) + phase[i]);
    return s / 2.0;
  }
};

}  // namespace

std::uint64_t Rng::next() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  has_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

GroundTruthMask make_mask(std::uint64_t seed, int size) {
  Rng rng(seed);
  struct Blob {
    double cx, cy, rx, ry, angle;
    std::array<double, 4> wobble_amp, wobble_phase;
  };
  const int blobs = 1 + static_cast<int>(rng.uniform() * 2.0);
  std::vector<Blob> shapes;
  for (int b = 0; b < blobs; ++b) {
    Blob s{};
    s.cx = rng.uniform(0.3, 0.7);
    s.cy = rng.uniform(0.3, 0.7);
    s.rx = rng.uniform(0.12, 0.28);
    s.ry = rng.uniform(0.12, 0.28);
    s.angle = rng.uniform(0.0, std::numbers::pi);
    for (int i = 0; i < 4; ++i) {
      s.wobble_amp[i] = rng.uniform(0.0, 0.12) / (i + 1);
      s.wobble_phase[i] = rng.uniform(0.0, kTwoPi);
    }
    shapes.push_back(s);
  }
  GroundTruthMask mask(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size;
      const double v = (y + 0.5) / size;
      for (const Blob& s : shapes) {
        const double dx = u - s.cx;
        const double dy = v - s.cy;
        const double c = std::cos(s.angle);
        const double sn = std::sin(s.angle);
        const double px = (c * dx + sn * dy) / s.rx;
        const double py = (-sn * dx + c * dy) / s.ry;
        const double theta = std::atan2(py, px);
        double radius = 1.0;
        for (int i = 0; i < 4; ++i) radius += s.wobble_amp[i] * std::sin((i + 2) * theta + s.wobble_phase[i]);
        if (px * px + py * py < radius * radius) {
          mask.at(y, x) = 1.0f;
          break;
        }
      }
    }
  }
  return mask;
}

FeatureStack make_feature_stack(const GroundTruthMask& mask, std::uint64_t seed,
                                const std::string& image_id) {
  Rng rng(seed);
  const Texture texture(rng);
  FeatureStack stack;
  stack.source_image_id = image_id;
  for (const BlockSpec& block : kBlocks) {
    // Finer blocks see the object more sharply but more weakly.
    const GroundTruthMask object = cascade::downsample_gt(mask, block.size);
    const double signal = block.size >= 84 ? 0.45 : block.size >= 42 ? 0.55 : 0.7;
    std::vector<double> gain(block.channels), mix(block.channels);
    for (int c = 0; c < block.channels; ++c) {
      gain[c] = rng.uniform() < 0.3 ? signal * rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1 : 1) : 0.0;
      mix[c] = rng.uniform(0.5, 1.5);
    }
    FeatureTensor t;
    t.name = block.name;
    t.height = t.width = block.size;
    t.channels = block.channels;
    t.data.resize(static_cast<std::size_t>(block.size) * block.size * block.channels);
    std::size_t i = 0;
    for (int y = 0; y < block.size; ++y) {
      for (int x = 0; x < block.size; ++x) {
        const double tex = texture.at((x + 0.5) / block.size, (y + 0.5) / block.size);
        const double obj = object.at(y, x);
        for (int c = 0; c < block.channels; ++c) {
          t.data[i++] = static_cast<float>(gain[c] * obj + mix[c] * tex + 0.8 * rng.normal());
        }
      }
    }
    stack.tensors.push_back(std::move(t));
  }
  return stack;
}

std::filesystem::path generate_suite(const std::filesystem::path& dir, const SuiteOptions& options) {
  std::filesystem::create_directories(dir / "features");
  std::filesystem::create_directories(dir / "masks");
  DatasetManifest manifest;
  manifest.split = DatasetSplit::kTrain;
  for (int i = 0; i < options.num_images; ++i) {
    const std::string id = image_name(i);
    const GroundTruthMask mask = make_mask(derive(options.seed, 2 * i), options.mask_size);
    const FeatureStack stack = make_feature_stack(mask, derive(options.seed, 2 * i + 1), id);
    ManifestEntry e;
    e.image_id = id;
    e.feature_stack_path = std::filesystem::path("features") / (id + ".gcfm");
    e.gt_mask_path = std::filesystem::path("masks") / (id + ".png");
    e.original_height = e.original_width = options.mask_size;
    write_feature_stack(stack, dir / e.feature_stack_path);
    ProbabilityMap png(mask.height, mask.width);
    png.values = mask.values;
    write_mask(png, dir / e.gt_mask_path);
    manifest.entries.push_back(std::move(e));
  }
  const auto path = dir / "manifest.tsv";
  write_manifest(manifest, path);
  return path;
}

}  // namespace greencod::synthetic
