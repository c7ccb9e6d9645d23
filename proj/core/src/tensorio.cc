#include "greencod/tensorio.h"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_set>

#include "binary_io.h"
#include "greencod/error.h"

namespace greencod {
namespace {

constexpr char kGcfmMagic[] = "GCFM";
constexpr std::uint32_t kGcfmVersion = 1;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

int parse_dimension(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || value <= 0 || value > (1 << 24)) {
    throw FormatError(where + ": bad dimension '" + text + "'");
  }
  return static_cast<int>(value);
}

}  // namespace

int FeatureStack::total_channels() const {
  int total = 0;
  for (const auto& t : tensors) total += t.channels;
  return total;
}

void validate_feature_stack(const FeatureStack& stack) {
  std::unordered_set<std::string> names;
  for (const auto& t : stack.tensors) {
    if (!names.insert(t.name).second) {
      throw InvariantError("duplicate tensor name '" + t.name + "'");
    }
    if (t.name.size() > 0xFFFF) throw InvariantError("tensor name too long");
    if (t.height <= 0 || t.width <= 0 || t.channels <= 0) {
      throw InvariantError("tensor '" + t.name + "' has a zero dimension");
    }
    const auto expected = static_cast<std::size_t>(t.height) * t.width * t.channels;
    if (t.data.size() != expected) {
      throw InvariantError("tensor '" + t.name + "' payload has " +
                           std::to_string(t.data.size()) + " values, shape implies " +
                           std::to_string(expected));
    }
  }
}

void write_feature_stack(const FeatureStack& stack,
                         const std::filesystem::path& destination) {
  validate_feature_stack(stack);
  detail::ByteWriter w;
  w.put_raw({kGcfmMagic, 4});
  w.put_u32(kGcfmVersion);
  w.put_u32(static_cast<std::uint32_t>(stack.tensors.size()));
  for (const auto& t : stack.tensors) {
    w.put_u16(static_cast<std::uint16_t>(t.name.size()));
    w.put_raw(t.name);
    w.put_u32(static_cast<std::uint32_t>(t.height));
    w.put_u32(static_cast<std::uint32_t>(t.width));
    w.put_u32(static_cast<std::uint32_t>(t.channels));
    w.put_f32s(t.data);
  }
  detail::write_file_bytes(destination, w.bytes());
}

FeatureStack read_feature_stack(const std::filesystem::path& source) {
  const auto bytes = detail::read_file_bytes(source);
  detail::ByteReader r(bytes, "GCFM " + source.string());
  if (r.remaining() < 4 || r.get_string(4) != std::string_view(kGcfmMagic, 4)) {
    throw FormatError("GCFM " + source.string() + ": bad magic");
  }
  const std::uint32_t version = r.get_u32();
  if (version != kGcfmVersion) {
    throw FormatError("GCFM " + source.string() + ": unsupported version " +
                      std::to_string(version));
  }
  const std::uint32_t count = r.get_u32();
  FeatureStack stack;
  stack.source_image_id = source.stem().string();
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureTensor t;
    t.name = r.get_string(r.get_u16());
    const std::uint64_t h = r.get_u32();
    const std::uint64_t wd = r.get_u32();
    const std::uint64_t c = r.get_u32();
    if (h == 0 || wd == 0 || c == 0 || h > 0x7FFFFFFF || wd > 0x7FFFFFFF ||
        c > 0x7FFFFFFF) {
      throw FormatError("GCFM " + source.string() + ": dimension overflow in tensor '" +
                        t.name + "'");
    }
    std::uint64_t n = 0;
    if (__builtin_mul_overflow(h, wd, &n) || __builtin_mul_overflow(n, c, &n) ||
        n > (std::uint64_t{1} << 40)) {
      throw FormatError("GCFM " + source.string() + ": dimension overflow in tensor '" +
                        t.name + "'");
    }
    if (n * 4 > r.remaining()) {
      throw FormatError("GCFM " + source.string() + ": truncated payload in tensor '" +
                        t.name + "'");
    }
    t.height = static_cast<int>(h);
    t.width = static_cast<int>(wd);
    t.channels = static_cast<int>(c);
    t.data.resize(static_cast<std::size_t>(n));
    r.get_f32s(t.data);
    stack.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) {
    throw FormatError("GCFM " + source.string() + ": trailing bytes after last tensor");
  }
  try {
    validate_feature_stack(stack);
  } catch (const InvariantError& e) {
    throw FormatError("GCFM " + source.string() + ": " + e.what());
  }
  return stack;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp message) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = message;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

GroundTruthMask read_mask(const std::filesystem::path& source) {
  FilePtr file(std::fopen(source.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + source.string());

  std::string message;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  GroundTruthMask mask;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  bool unsupported = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG " + source.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
    unsupported = true;
  } else {
    const auto w = static_cast<int>(png_get_image_width(png, info));
    const auto h = static_cast<int>(png_get_image_height(png, info));
    pixels.resize(static_cast<std::size_t>(w) * h);
    rows.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    mask = GroundTruthMask(h, w);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      mask.values[i] = static_cast<float>(pixels[i]) / 255.0f;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (unsupported) {
    throw FormatError("PNG " + source.string() +
                      ": unsupported bit depth or color image (need 8-bit grayscale)");
  }
  return mask;
}

void write_mask(const ProbabilityMap& map, const std::filesystem::path& destination) {
  if (map.height <= 0 || map.width <= 0 || map.size() != static_cast<std::size_t>(map.height) * map.width) {
    throw InvariantError("write_mask: malformed probability map");
  }
  std::vector<png_byte> pixels(map.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = std::floor(static_cast<double>(map.values[i]) * 255.0 + 0.5);
    pixels[i] = static_cast<png_byte>(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v));
  }

  FilePtr file(std::fopen(destination.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + destination.string() + " for writing");
  std::string message;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(static_cast<std::size_t>(map.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG " + destination.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(map.width),
               static_cast<png_uint_32>(map.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < map.height; ++y) {
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * map.width;
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("failed writing " + destination.string());
}

DatasetManifest load_manifest(const std::filesystem::path& source,
                              const std::optional<std::filesystem::path>& feature_base) {
  std::ifstream in(source);
  if (!in) throw IoError("cannot open manifest " + source.string());
  const std::filesystem::path base = source.parent_path();
  const std::filesystem::path fbase = feature_base.value_or(base);

  DatasetManifest manifest;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source.string() + ":" + std::to_string(line_no);
    if (line[0] == '#') {
      const auto fields = split_tabs(line);
      if (fields[0] == "#split") {
        if (fields.size() != 2 || (fields[1] != "train" && fields[1] != "test")) {
          throw FormatError(where + ": malformed split directive");
        }
        manifest.split = fields[1] == "train" ? DatasetSplit::kTrain : DatasetSplit::kTest;
      }
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 5) {
      throw FormatError(where + ": malformed line (expected 5 tab-separated fields, got " +
                        std::to_string(fields.size()) + ")");
    }
    ManifestEntry e;
    e.image_id = fields[0];
    if (e.image_id.empty()) throw FormatError(where + ": empty image_id");
    if (!ids.insert(e.image_id).second) {
      throw FormatError(where + ": duplicate image_id '" + e.image_id + "'");
    }
    const std::filesystem::path fp(fields[1]);
    const std::filesystem::path gp(fields[2]);
    e.feature_stack_path = fp.is_absolute() ? fp : fbase / fp;
    e.gt_mask_path = gp.is_absolute() ? gp : base / gp;
    e.original_height = parse_dimension(fields[3], where);
    e.original_width = parse_dimension(fields[4], where);
    if (!std::filesystem::exists(e.feature_stack_path) ||
        !std::filesystem::exists(e.gt_mask_path)) {
      manifest.missing.push_back(e.image_id);
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& destination) {
  std::ofstream out(destination, std::ios::trunc);
  if (!out) throw IoError("cannot open " + destination.string() + " for writing");
  if (manifest.split != DatasetSplit::kUnspecified) {
    out << "#split\t" << (manifest.split == DatasetSplit::kTrain ? "train" : "test") << '\n';
  }
  for (const auto& e : manifest.entries) {
    out << e.image_id << '\t' << e.feature_stack_path.generic_string() << '\t'
        << e.gt_mask_path.generic_string() << '\t' << e.original_height << '\t'
        << e.original_width << '\n';
  }
  if (!out) throw IoError("failed writing " + destination.string());
}

}  // namespace greencod
