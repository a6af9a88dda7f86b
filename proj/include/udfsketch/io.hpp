#pragma once

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "udfsketch/grid.hpp"
#include "udfsketch/udf.hpp"

namespace udfsketch {

// ---------------------------------------------------------------------------
// Little-endian byte helpers shared by the binary formats.

class ByteWriter {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  const std::string& str() const noexcept { return out_; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16() {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) fail(ErrorCode::format_error, "unexpected end of data");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::format_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::format_error, "cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) fail(ErrorCode::format_error, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Binary portable graymap (P5, maxval 255).

inline std::string encode_p5(int width, int height, std::span<const std::uint8_t> bytes) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return out;
}

inline GrayBitmap decode_p5(std::string_view data) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    if (pos >= data.size() || !std::isdigit(static_cast<unsigned char>(data[pos])))
      fail(ErrorCode::format_error, "malformed P5 header");
    long v = 0;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) {
      v = v * 10 + (data[pos++] - '0');
      if (v > (1L << 24)) fail(ErrorCode::format_error, "P5 dimension too large");
    }
    return static_cast<int>(v);
  };
  if (data.substr(0, 2) != "P5") fail(ErrorCode::format_error, "not a P5 graymap");
  pos = 2;
  const int width = number();
  const int height = number();
  const int maxval = number();
  if (maxval != 255) fail(ErrorCode::format_error, "only maxval 255 is supported");
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
    fail(ErrorCode::format_error, "malformed P5 header");
  ++pos;
  if (width <= 0 || height <= 0) fail(ErrorCode::format_error, "P5 dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (data.size() - pos != n) fail(ErrorCode::format_error, "P5 payload length mismatch");
  std::vector<std::uint8_t> px(n);
  std::memcpy(px.data(), data.data() + pos, n);
  return GrayBitmap(width, height, std::move(px));
}

/// Ink is written as 0, background as 255.
inline std::string to_p5(const SketchBitmap& sketch) {
  std::vector<std::uint8_t> px(sketch.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = sketch[i] ? 0 : 255;
  return encode_p5(sketch.width(), sketch.height(), px);
}

/// Inside is written as 255.
inline std::string to_p5(const InstanceMask& mask) {
  std::vector<std::uint8_t> px(mask.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask[i] ? 255 : 0;
  return encode_p5(mask.width(), mask.height(), px);
}

inline std::string to_p5(const GrayBitmap& image) {
  return encode_p5(image.width(), image.height(), image.values());
}

/// Dark pixels (< 128) are ink.
inline SketchBitmap sketch_from_p5(std::string_view data) {
  const GrayBitmap g = decode_p5(data);
  SketchBitmap out(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] < 128 ? 1 : 0;
  return out;
}

/// Bright pixels (>= 128) are inside.
inline InstanceMask mask_from_p5(std::string_view data) {
  const GrayBitmap g = decode_p5(data);
  InstanceMask out(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] >= 128 ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// UDFG: "UDFG", u8 version, u32 width, u32 height, f32 T, f32 values row-major.

inline constexpr std::uint8_t kUdfgVersion = 1;

inline std::string encode_udfg(const UdfGrid& field) {
  ByteWriter w;
  w.bytes("UDFG");
  w.u8(kUdfgVersion);
  w.u32(static_cast<std::uint32_t>(field.width()));
  w.u32(static_cast<std::uint32_t>(field.height()));
  w.f32(static_cast<float>(field.time_constant()));
  for (float v : field.values()) w.f32(v);
  return w.take();
}

inline UdfGrid decode_udfg(std::string_view data) {
  ByteReader r(data);
  if (r.bytes(4) != "UDFG") fail(ErrorCode::format_error, "bad UDFG magic");
  const auto version = r.u8();
  if (version != kUdfgVersion) fail(ErrorCode::format_error, "unsupported UDFG version " + std::to_string(version));
  const auto width = r.u32();
  const auto height = r.u32();
  const float t = r.f32();
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16))
    fail(ErrorCode::format_error, "bad UDFG dimensions");
  if (!(t > 0.0f) || !std::isfinite(t)) fail(ErrorCode::format_error, "bad UDFG time constant");
  UdfGrid field(static_cast<int>(width), static_cast<int>(height), t);
  for (auto& v : field.values()) v = r.f32();
  if (!r.at_end()) fail(ErrorCode::format_error, "trailing bytes after UDFG payload");
  return field;
}

}  // namespace udfsketch
