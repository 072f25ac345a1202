// Copyright 2026 The kws Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// SCFT: the toolkit's binary container for feature maps and parameter tensors.
//
//   "SCFT" | version u8 (=1) | kind u8 | rank u8 | rank x u32 dims | f32 data
//
// All integers and floats are little-endian; data is row-major.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kws/error.hpp"
#include "kws/io.hpp"

namespace kws {

enum class FeatureKind : std::uint8_t {
  tensor = 0,  // untyped tensor (model parameters)
  power = 1,
  log_power = 2,
  decibel = 3,
  mel = 4,
  log_mel = 5,
  mfcc = 6,
  wave = 7,
};

inline std::string_view kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::tensor: return "tensor";
    case FeatureKind::power: return "power";
    case FeatureKind::log_power: return "log_power";
    case FeatureKind::decibel: return "decibel";
    case FeatureKind::mel: return "mel";
    case FeatureKind::log_mel: return "log_mel";
    case FeatureKind::mfcc: return "mfcc";
    case FeatureKind::wave: return "wave";
  }
  return "?";
}

struct ScftTensor {
  FeatureKind kind = FeatureKind::tensor;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

constexpr std::uint8_t kScftVersion = 1;

inline void append_scft(io::Bytes& out, FeatureKind kind, std::span<const std::uint32_t> dims,
                        std::span<const float> data) {
  const std::size_t expected =
      std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  if (dims.size() > 255 || expected != data.size()) {
    throw Error(ErrorCode::ShapeMismatch, "SCFT dims do not match data length");
  }
  io::put_tag(out, "SCFT");
  out.push_back(kScftVersion);
  out.push_back(static_cast<std::uint8_t>(kind));
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) io::put_u32(out, d);
  for (float v : data) io::put_f32(out, v);
}

inline io::Bytes encode_scft(const ScftTensor& t) {
  io::Bytes out;
  append_scft(out, t.kind, t.dims, t.data);
  return out;
}

/// Decodes one SCFT record starting at `offset`; advances `offset` past it.
inline ScftTensor decode_scft(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (!io::tag_equals(bytes, offset, "SCFT") || bytes.size() < offset + 7) {
    throw Error(ErrorCode::ParseError, "missing SCFT magic");
  }
  if (bytes[offset + 4] != kScftVersion) {
    throw Error(ErrorCode::ParseError, "unsupported SCFT version " + std::to_string(bytes[offset + 4]));
  }
  ScftTensor t;
  const std::uint8_t kind = bytes[offset + 5];
  if (kind > static_cast<std::uint8_t>(FeatureKind::wave)) {
    throw Error(ErrorCode::ParseError, "unknown SCFT kind " + std::to_string(kind));
  }
  t.kind = static_cast<FeatureKind>(kind);
  const std::size_t rank = bytes[offset + 6];
  std::size_t pos = offset + 7;
  if (bytes.size() < pos + 4 * rank) throw Error(ErrorCode::ParseError, "truncated SCFT dims");
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    t.dims.push_back(io::get_u32(bytes, pos));
    count *= t.dims.back();
    pos += 4;
  }
  if ((bytes.size() - pos) / 4 < count) throw Error(ErrorCode::ParseError, "truncated SCFT data");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) t.data[i] = io::get_f32(bytes, pos + 4 * i);
  offset = pos + 4 * count;
  return t;
}

inline ScftTensor decode_scft(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  ScftTensor t = decode_scft(bytes, offset);
  if (offset != bytes.size()) throw Error(ErrorCode::ParseError, "trailing bytes after SCFT record");
  return t;
}

inline void save_scft(const std::filesystem::path& path, const ScftTensor& t) {
  io::write_file(path, encode_scft(t));
}

inline ScftTensor load_scft(const std::filesystem::path& path) {
  return decode_scft(io::read_file(path));
}

}  // namespace kws
