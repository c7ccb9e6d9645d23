#include "binary_io.h"
#include "greencod/cascade.h"
#include "greencod/error.h"

namespace greencod::cascade {
namespace {

constexpr char kMagic[] = "GCCM";
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize(const CascadeModel& model) {
  detail::ByteWriter w;
  w.put_raw({kMagic, 4});
  w.put_u32(kVersion);
  w.put_u32(static_cast<std::uint32_t>(model.feature_channel_count));
  w.put_u32(kNumStages);
  for (int k = 0; k < kNumStages; ++k) {
    const StageConfig& s = model.stages[k];
    w.put_u32(static_cast<std::uint32_t>(s.stage_index));
    w.put_u32(static_cast<std::uint32_t>(s.resolution));
    w.put_u8(s.uses_nc ? 1 : 0);
    w.put_u32(static_cast<std::uint32_t>(s.nc_window));
    w.put_f32(s.pixel_fraction);
    const auto blob = gbdt::serialize(model.ensembles[k]);
    w.put_u64(blob.size());
    w.put_bytes(blob);
  }
  return w.take();
}

CascadeModel deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "GCCM");
  if (r.remaining() < 4 || r.get_string(4) != std::string_view(kMagic, 4)) {
    throw FormatError("GCCM: bad magic");
  }
  const std::uint32_t version = r.get_u32();
  if (version != kVersion) throw FormatError("GCCM: unsupported version " + std::to_string(version));
  CascadeModel model;
  model.feature_channel_count = static_cast<int>(r.get_u32());
  if (model.feature_channel_count != kBackboneChannels) {
    throw FormatError("GCCM: feature_channel_count must be 1152");
  }
  if (r.get_u32() != kNumStages) throw FormatError("GCCM: stage count must be 4");
  for (int k = 0; k < kNumStages; ++k) {
    StageConfig& s = model.stages[k];
    s.stage_index = static_cast<int>(r.get_u32());
    s.resolution = static_cast<int>(r.get_u32());
    s.uses_nc = r.get_u8() != 0;
    s.nc_window = static_cast<int>(r.get_u32());
    s.pixel_fraction = r.get_f32();
    const std::uint64_t size = r.get_u64();
    if (size > r.remaining()) throw FormatError("GCCM: truncated payload in stage " + std::to_string(k + 1));
    model.ensembles[k] = gbdt::deserialize(r.get_bytes(static_cast<std::size_t>(size)));
    s.train = model.ensembles[k].config;
    if (model.ensembles[k].num_features != static_cast<std::uint32_t>(stage_feature_count(s))) {
      throw FormatError("GCCM: stage " + std::to_string(k + 1) +
                        " ensemble feature count disagrees with its stage config");
    }
  }
  if (!r.at_end()) throw FormatError("GCCM: trailing bytes");
  try {
    validate_stage_configs(model.stages);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("GCCM: ") + e.what());
  }
  return model;
}

void save_cascade(const CascadeModel& model, const std::filesystem::path& path) {
  detail::write_file_bytes(path, serialize(model));
}

CascadeModel load_cascade(const std::filesystem::path& path) {
  return deserialize(detail::read_file_bytes(path));
}

}  // namespace greencod::cascade
