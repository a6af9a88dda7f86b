#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "udfsketch/io.hpp"
#include "udfsketch/nn/tensor.hpp"

namespace udfsketch::nn {

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// "CKPT", u8 version, u32 count, then per parameter: u16 name length, name bytes,
/// u8 rank, u32 dims[rank], f32 values. Little-endian throughout.
template <class S>
std::string encode_checkpoint(const ParameterList<S>& params) {
  ByteWriter w;
  w.bytes("CKPT");
  w.u8(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    require(p->name.size() <= 0xffff, ErrorCode::format_error, "parameter name too long");
    w.u16(static_cast<std::uint16_t>(p->name.size()));
    w.bytes(p->name);
    w.u8(static_cast<std::uint8_t>(p->value.rank()));
    for (int d : p->value.shape) w.u32(static_cast<std::uint32_t>(d));
    for (S v : p->value.data) w.f32(static_cast<float>(v));
  }
  return w.take();
}

struct CheckpointEntry {
  std::vector<int> shape;
  std::vector<float> values;
};

inline std::map<std::string, CheckpointEntry> decode_checkpoint(std::string_view data) {
  ByteReader r(data);
  if (r.bytes(4) != "CKPT") fail(ErrorCode::format_error, "bad checkpoint magic");
  const auto version = r.u8();
  if (version != kCheckpointVersion)
    fail(ErrorCode::format_error, "unsupported checkpoint version " + std::to_string(version));
  const auto count = r.u32();
  std::map<std::string, CheckpointEntry> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.u16();
    std::string name(r.bytes(len));
    CheckpointEntry e;
    const auto rank = r.u8();
    std::size_t n = 1;
    for (int k = 0; k < rank; ++k) {
      const auto d = r.u32();
      if (d == 0 || d > (1u << 24)) fail(ErrorCode::format_error, "bad checkpoint dimension");
      e.shape.push_back(static_cast<int>(d));
      n *= d;
      if (n > (std::size_t{1} << 28)) fail(ErrorCode::format_error, "checkpoint tensor too large");
    }
    e.values.resize(n);
    for (auto& v : e.values) v = r.f32();
    if (!out.emplace(std::move(name), std::move(e)).second) fail(ErrorCode::format_error, "duplicate parameter name");
  }
  if (!r.at_end()) fail(ErrorCode::format_error, "trailing bytes after checkpoint");
  return out;
}

/// Loads every parameter by name; missing names or shape mismatches are errors.
template <class S>
void load_checkpoint(const ParameterList<S>& params, std::string_view data) {
  const auto entries = decode_checkpoint(data);
  require(entries.size() == params.size(), ErrorCode::format_error, "checkpoint parameter count mismatch");
  for (auto* p : params) {
    const auto it = entries.find(p->name);
    if (it == entries.end()) fail(ErrorCode::format_error, "checkpoint lacks parameter " + p->name);
    if (it->second.shape != p->value.shape) fail(ErrorCode::format_error, "shape mismatch for parameter " + p->name);
    std::copy(it->second.values.begin(), it->second.values.end(), p->value.data.begin());
  }
}

template <class S>
void save_checkpoint_file(const ParameterList<S>& params, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(params));
}

template <class S>
void load_checkpoint_file(const ParameterList<S>& params, const std::filesystem::path& path) {
  load_checkpoint(params, read_file(path));
}

}  // namespace udfsketch::nn
