#include "binary_io.h"

#include <cstring>
#include <fstream>

#include "greencod/error.h"

namespace greencod::detail {

void ByteWriter::put_f32s(std::span<const float> values) {
  const std::size_t start = bytes_.size();
  bytes_.resize(start + values.size() * 4);
  std::uint8_t* out = bytes_.data() + start;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out, values.data(), values.size() * 4);
  } else {
    for (float v : values) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) *out++ = static_cast<std::uint8_t>(u >> (8 * i));
    }
  }
}

void ByteReader::require(std::size_t n) const {
  if (n > remaining()) {
    throw FormatError(what_ + ": truncated payload (need " + std::to_string(n) +
                      " bytes, " + std::to_string(remaining()) + " left)");
  }
}

std::uint8_t ByteReader::get_u8() {
  require(1);
  return bytes_[pos_++];
}

std::uint64_t ByteReader::get_le(int n) {
  require(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

void ByteReader::get_f32s(std::span<float> out) {
  require(out.size() * 4);
  const std::uint8_t* in = bytes_.data() + pos_;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), in, out.size() * 4);
  } else {
    for (float& v : out) {
      std::uint32_t u = 0;
      for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(*in++) << (8 * i);
      v = std::bit_cast<float>(u);
    }
  }
  pos_ += out.size() * 4;
}

std::string ByteReader::get_string(std::size_t n) {
  require(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::span<const std::uint8_t> ByteReader::get_bytes(std::size_t n) {
  require(n);
  auto s = bytes_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()),
                           static_cast<std::streamsize>(size))) {
    throw IoError("failed reading " + path.string());
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace greencod::detail
