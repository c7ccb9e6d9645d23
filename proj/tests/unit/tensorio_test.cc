#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>
#include <png.h>

#include "greencod/error.h"
#include "greencod/tensorio.h"
#include "temp_dir.h"

namespace greencod {
namespace {

using testing::TempDir;

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FeatureTensor tensor(const std::string& name, int h, int w, int c, float start = 0.0f) {
  FeatureTensor t{name, h, w, c, {}};
  for (int i = 0; i < h * w * c; ++i) t.data.push_back(start + 0.25f * static_cast<float>(i));
  return t;
}

void write_png(const std::filesystem::path& path, int w, int h, int bit_depth, int color_type) {
  FILE* f = std::fopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  std::vector<png_byte> row(static_cast<std::size_t>(w) * channels * (bit_depth / 8), 0x80);
  for (int y = 0; y < h; ++y) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

TEST(FeatureStackFile, RoundTripKeepsTensorsAndOrder) {
  TempDir dir;
  FeatureStack stack;
  stack.tensors = {tensor("block1", 3, 2, 4), tensor("block2", 1, 5, 2, -3.0f)};
  write_feature_stack(stack, dir / "img_007.gcfm");
  const FeatureStack back = read_feature_stack(dir / "img_007.gcfm");
  EXPECT_EQ(back.tensors, stack.tensors);
  EXPECT_EQ(back.source_image_id, "img_007");
  EXPECT_EQ(back.input_size, kBackboneInputSize);
  EXPECT_EQ(back.total_channels(), 6);
}

TEST(FeatureStackFile, ByteLayoutIsLittleEndian) {
  TempDir dir;
  FeatureStack stack;
  stack.tensors = {{"ab", 1, 1, 2, {1.0f, -2.0f}}};
  write_feature_stack(stack, dir / "x.gcfm");
  const std::vector<std::uint8_t> expected = {
      'G', 'C', 'F', 'M', 1, 0, 0, 0, 1, 0, 0, 0,  // magic, version, count
      2, 0, 'a', 'b',                              // name
      1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,          // h, w, c
      0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  EXPECT_EQ(slurp(dir / "x.gcfm"), expected);
}

TEST(FeatureStackFile, WritesAreByteDeterministic) {
  TempDir dir;
  FeatureStack stack;
  stack.tensors = {tensor("a", 4, 4, 3), tensor("b", 2, 2, 7)};
  write_feature_stack(stack, dir / "1.gcfm");
  write_feature_stack(stack, dir / "2.gcfm");
  EXPECT_EQ(slurp(dir / "1.gcfm"), slurp(dir / "2.gcfm"));
}

TEST(FeatureStackFile, RejectsBadMagic) {
  TempDir dir;
  spit(dir / "bad.gcfm", {'G', 'C', 'F', 'X', 1, 0, 0, 0, 0, 0, 0, 0});
  try {
    read_feature_stack(dir / "bad.gcfm");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
}

TEST(FeatureStackFile, RejectsUnsupportedVersion) {
  TempDir dir;
  spit(dir / "v2.gcfm", {'G', 'C', 'F', 'M', 2, 0, 0, 0, 0, 0, 0, 0});
  EXPECT_THROW(read_feature_stack(dir / "v2.gcfm"), FormatError);
}

TEST(FeatureStackFile, RejectsTruncatedPayload) {
  TempDir dir;
  FeatureStack stack;
  stack.tensors = {tensor("a", 2, 2, 2)};
  write_feature_stack(stack, dir / "t.gcfm");
  auto bytes = slurp(dir / "t.gcfm");
  bytes.resize(bytes.size() - 4);
  spit(dir / "t.gcfm", bytes);
  try {
    read_feature_stack(dir / "t.gcfm");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
  }
}

TEST(FeatureStackFile, RejectsTrailingBytes) {
  TempDir dir;
  FeatureStack stack;
  stack.tensors = {tensor("a", 1, 1, 1)};
  write_feature_stack(stack, dir / "t.gcfm");
  auto bytes = slurp(dir / "t.gcfm");
  bytes.push_back(0);
  spit(dir / "t.gcfm", bytes);
  EXPECT_THROW(read_feature_stack(dir / "t.gcfm"), FormatError);
}

TEST(FeatureStackFile, RejectsOverflowingDimensions) {
  TempDir dir;
  std::vector<std::uint8_t> bytes = {'G', 'C', 'F', 'M', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 'a'};
  for (int i = 0; i < 3; ++i) bytes.insert(bytes.end(), {0xff, 0xff, 0xff, 0xff});
  spit(dir / "o.gcfm", bytes);
  EXPECT_THROW(read_feature_stack(dir / "o.gcfm"), FormatError);
}

TEST(FeatureStackFile, MissingFileIsIoError) {
  EXPECT_THROW(read_feature_stack("/nonexistent/dir/x.gcfm"), IoError);
}

TEST(FeatureStackValidation, DuplicateNamesAndShapeMismatch) {
  FeatureStack dup;
  dup.tensors = {tensor("a", 1, 1, 1), tensor("a", 1, 1, 1)};
  EXPECT_THROW(validate_feature_stack(dup), InvariantError);

  FeatureStack bad;
  bad.tensors = {tensor("a", 2, 2, 2)};
  bad.tensors[0].data.pop_back();
  EXPECT_THROW(validate_feature_stack(bad), InvariantError);

  FeatureStack zero;
  zero.tensors = {{"z", 0, 3, 1, {}}};
  EXPECT_THROW(validate_feature_stack(zero), InvariantError);

  TempDir dir;
  EXPECT_THROW(write_feature_stack(dup, dir / "d.gcfm"), InvariantError);
}

TEST(MaskFile, RoundTripQuantizesToEightBits) {
  TempDir dir;
  ProbabilityMap map(2, 3);
  map.values = {0.0f, 1.0f, 0.5f, 0.2f, 0.999f, 0.001f};
  write_mask(map, dir / "m.png");
  const GroundTruthMask back = read_mask(dir / "m.png");
  ASSERT_EQ(back.height, 2);
  ASSERT_EQ(back.width, 3);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const float expected = std::floor(map.values[i] * 255.0f + 0.5f) / 255.0f;
    EXPECT_FLOAT_EQ(back.values[i], expected);
    EXPECT_LE(std::abs(back.values[i] - map.values[i]), 0.5f / 255.0f + 1e-6f);
  }
}

TEST(MaskFile, RejectsColorAndSixteenBitImages) {
  TempDir dir;
  write_png(dir / "rgb.png", 4, 4, 8, PNG_COLOR_TYPE_RGB);
  write_png(dir / "g16.png", 4, 4, 16, PNG_COLOR_TYPE_GRAY);
  EXPECT_THROW(read_mask(dir / "rgb.png"), FormatError);
  EXPECT_THROW(read_mask(dir / "g16.png"), FormatError);
  write_png(dir / "ok.png", 4, 4, 8, PNG_COLOR_TYPE_GRAY);
  EXPECT_FLOAT_EQ(read_mask(dir / "ok.png").values[0], 128.0f / 255.0f);
}

TEST(MaskFile, GarbageIsFormatError) {
  TempDir dir;
  spit(dir / "junk.png", {1, 2, 3, 4, 5, 6, 7, 8, 9});
  EXPECT_THROW(read_mask(dir / "junk.png"), FormatError);
}

class ManifestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::filesystem::create_directories(dir_ / "feat");
    std::filesystem::create_directories(dir_ / "gt");
    for (const char* id : {"a", "b"}) {
      std::ofstream(dir_.path() / "feat" / (std::string(id) + ".gcfm")) << "x";
      std::ofstream(dir_.path() / "gt" / (std::string(id) + ".png")) << "x";
    }
  }
  void write(const std::string& text) { std::ofstream(dir_ / "m.tsv") << text; }

  TempDir dir_;
};

TEST_F(ManifestTest, ParsesEntriesCommentsAndSplit) {
  write("# dataset\n#split\ttest\n\na\tfeat/a.gcfm\tgt/a.png\t480\t640\nb\tfeat/b.gcfm\tgt/b.png\t10\t20\n");
  const DatasetManifest m = load_manifest(dir_ / "m.tsv");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.split, DatasetSplit::kTest);
  EXPECT_EQ(m.entries[0].image_id, "a");
  EXPECT_EQ(m.entries[0].feature_stack_path, dir_.path() / "feat/a.gcfm");
  EXPECT_EQ(m.entries[0].gt_mask_path, dir_.path() / "gt/a.png");
  EXPECT_EQ(m.entries[0].original_height, 480);
  EXPECT_EQ(m.entries[0].original_width, 640);
  EXPECT_TRUE(m.missing.empty());
}

TEST_F(ManifestTest, FeatureBaseOverridesFeatureDirectoryOnly) {
  write("a\ta.gcfm\tgt/a.png\t1\t1\n");
  const DatasetManifest m = load_manifest(dir_ / "m.tsv", dir_.path() / "feat");
  EXPECT_EQ(m.entries[0].feature_stack_path, dir_.path() / "feat" / "a.gcfm");
  EXPECT_EQ(m.entries[0].gt_mask_path, dir_.path() / "gt/a.png");
  EXPECT_TRUE(m.missing.empty());
}

TEST_F(ManifestTest, ReportsMissingFiles) {
  write("a\tfeat/a.gcfm\tgt/a.png\t1\t1\nc\tfeat/c.gcfm\tgt/c.png\t1\t1\n");
  const DatasetManifest m = load_manifest(dir_ / "m.tsv");
  EXPECT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.missing, std::vector<std::string>{"c"});
}

TEST_F(ManifestTest, DuplicateIdIsRejectedByName) {
  write("a\tfeat/a.gcfm\tgt/a.png\t1\t1\na\tfeat/b.gcfm\tgt/b.png\t1\t1\n");
  try {
    load_manifest(dir_ / "m.tsv");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate image_id 'a'"), std::string::npos);
  }
}

TEST_F(ManifestTest, MalformedLines) {
  write("a\tfeat/a.gcfm\tgt/a.png\t1\n");
  EXPECT_THROW(load_manifest(dir_ / "m.tsv"), FormatError);
  write("a\tfeat/a.gcfm\tgt/a.png\tten\t1\n");
  EXPECT_THROW(load_manifest(dir_ / "m.tsv"), FormatError);
  write("#split\tvalidation\n");
  EXPECT_THROW(load_manifest(dir_ / "m.tsv"), FormatError);
}

TEST_F(ManifestTest, MissingManifestNamesPath) {
  try {
    load_manifest(dir_ / "nope.tsv");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.tsv"), std::string::npos);
  }
}

TEST_F(ManifestTest, WriteThenLoadRoundTrips) {
  DatasetManifest m;
  m.split = DatasetSplit::kTrain;
  m.entries.push_back({"a", "feat/a.gcfm", "gt/a.png", 3, 4});
  m.entries.push_back({"b", "feat/b.gcfm", "gt/b.png", 5, 6});
  write_manifest(m, dir_ / "out.tsv");
  const DatasetManifest back = load_manifest(dir_ / "out.tsv");
  EXPECT_EQ(back.split, DatasetSplit::kTrain);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[1].image_id, "b");
  EXPECT_EQ(back.entries[1].feature_stack_path, dir_.path() / "feat/b.gcfm");
  EXPECT_EQ(back.entries[1].original_width, 6);
}

}  // namespace
}  // namespace greencod
