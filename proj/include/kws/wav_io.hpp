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

// 16-bit PCM mono WAVE reading and writing, plus the volume statistics used
// when cleaning a corpus.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kws/error.hpp"
#include "kws/io.hpp"

namespace kws {

constexpr std::uint32_t kDefaultSampleRate = 16000;
constexpr float kDefaultSilenceThreshold = 0.01f;

struct AudioClip {
  std::vector<float> samples;  // normalized to [-1, 1)
  std::uint32_t sample_rate = kDefaultSampleRate;
  std::optional<std::string> source_path;
  std::optional<std::string> label;

  std::size_t size() const { return samples.size(); }
};

namespace wav_detail {

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

inline std::int16_t quantize(float s) {
  if (!std::isfinite(s)) return 0;
  const double q = std::round(static_cast<double>(s) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
}

}  // namespace wav_detail

/// Parses a RIFF/WAVE container holding 16-bit little-endian mono PCM.
/// Chunks other than `fmt ` and `data` are skipped.
inline AudioClip parse_wav(std::span<const std::uint8_t> bytes) {
  using namespace io;
  if (bytes.size() < 12 || !tag_equals(bytes, 0, "RIFF") || !tag_equals(bytes, 8, "WAVE")) {
    throw Error(ErrorCode::MalformedHeader, "missing RIFF/WAVE magic");
  }

  std::optional<wav_detail::FormatChunk> fmt;
  std::optional<std::span<const std::uint8_t>> data;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = get_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;

    if (tag_equals(bytes, pos, "fmt ")) {
      if (chunk_size < 16 || available < 16) {
        throw Error(ErrorCode::MalformedHeader, "fmt chunk too short");
      }
      wav_detail::FormatChunk f;
      f.format = get_u16(bytes, body);
      f.channels = get_u16(bytes, body + 2);
      f.sample_rate = get_u32(bytes, body + 4);
      f.bits = get_u16(bytes, body + 14);
      fmt = f;
    } else if (tag_equals(bytes, pos, "data")) {
      if (chunk_size > available) {
        throw Error(ErrorCode::TruncatedData, "data chunk declares " + std::to_string(chunk_size) +
                                                  " bytes, " + std::to_string(available) + " present");
      }
      data = bytes.subspan(body, chunk_size);
    }

    if (data && fmt) break;
    // RIFF chunks are word aligned.
    const std::size_t advance = 8 + static_cast<std::size_t>(chunk_size) + (chunk_size & 1u);
    if (advance > bytes.size() - pos) break;
    pos += advance;
  }

  if (!fmt) throw Error(ErrorCode::MalformedHeader, "no fmt chunk");
  if (fmt->format != 1) {
    throw Error(ErrorCode::UnsupportedFormat, "audio format " + std::to_string(fmt->format) + " is not PCM");
  }
  if (fmt->bits != 16) {
    throw Error(ErrorCode::UnsupportedFormat, std::to_string(fmt->bits) + " bits per sample");
  }
  if (fmt->channels != 1) {
    throw Error(ErrorCode::UnsupportedFormat, std::to_string(fmt->channels) + " channels");
  }
  if (fmt->sample_rate == 0) throw Error(ErrorCode::UnsupportedFormat, "zero sample rate");
  if (!data) throw Error(ErrorCode::MalformedHeader, "no data chunk");

  AudioClip clip;
  clip.sample_rate = fmt->sample_rate;
  const std::size_t n = data->size() / 2;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::int16_t>(get_u16(*data, 2 * i));
    clip.samples[i] = static_cast<float>(v) / 32768.0f;
  }
  return clip;
}

/// Canonical 44-byte-header PCM16 mono encoding. Samples are quantized with
/// round(s * 32768) and clamped to the int16 range.
inline io::Bytes write_wav(const AudioClip& clip) {
  using namespace io;
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  Bytes out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, clip.sample_rate);
  put_u32(out, clip.sample_rate * 2);  // byte rate
  put_u16(out, 2);                     // block align
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : clip.samples) {
    put_u16(out, static_cast<std::uint16_t>(wav_detail::quantize(s)));
  }
  return out;
}

inline AudioClip load_wav(const std::filesystem::path& path) {
  const io::Bytes bytes = io::read_file(path);
  try {
    AudioClip clip = parse_wav(bytes);
    clip.source_path = path.string();
    return clip;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

inline void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
  io::write_file(path, write_wav(clip));
}

inline float peak_volume(std::span<const float> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptyClip, "peak of empty clip");
  float peak = 0.0f;
  for (float s : samples) peak = std::max(peak, std::fabs(s));
  return peak;
}

inline float peak_volume(const AudioClip& clip) { return peak_volume(clip.samples); }

inline bool is_silence_candidate(const AudioClip& clip, float threshold = kDefaultSilenceThreshold) {
  return peak_volume(clip) < threshold;
}

/// Non-overlapping windows of exactly `fragment_samples`; the remainder is dropped.
inline std::vector<AudioClip> split_into_fragments(const AudioClip& clip, std::size_t fragment_samples) {
  if (fragment_samples == 0) throw Error(ErrorCode::InvalidConfig, "fragment length must be positive");
  std::vector<AudioClip> out;
  const std::size_t count = clip.samples.size() / fragment_samples;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    AudioClip frag;
    frag.sample_rate = clip.sample_rate;
    frag.source_path = clip.source_path;
    frag.label = clip.label;
    const auto first = clip.samples.begin() + static_cast<std::ptrdiff_t>(i * fragment_samples);
    frag.samples.assign(first, first + static_cast<std::ptrdiff_t>(fragment_samples));
    out.push_back(std::move(frag));
  }
  return out;
}

}  // namespace kws
