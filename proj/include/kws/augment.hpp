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

// Waveform augmentation: playback-speed change, time shift, background noise
// mixing and fixed-length crop/pad.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kws/error.hpp"
#include "kws/rng.hpp"
#include "kws/wav_io.hpp"

namespace kws::augment {

constexpr std::size_t kNetworkInputLength = 4 * 4096;

struct AugmentConfig {
  double speed_min = 0.7;
  double speed_max = 1.4;
  double shift_max_s = 0.1;
  double noise_max = 0.05;  // fraction of the clip's peak volume
  std::size_t target_length = kNetworkInputLength;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(speed_min > 0.0) || speed_max < speed_min) {
      throw Error(ErrorCode::InvalidConfig, "speed range must satisfy 0 < speed_min <= speed_max");
    }
    if (shift_max_s < 0.0) throw Error(ErrorCode::InvalidConfig, "shift_max_s must be >= 0");
    if (noise_max < 0.0 || noise_max > 1.0) throw Error(ErrorCode::InvalidConfig, "noise_max must be in [0, 1]");
    if (target_length == 0) throw Error(ErrorCode::InvalidConfig, "target_length must be positive");
  }
};

/// Linear-interpolation resampling read at position i*rate; length round(N/rate).
inline AudioClip change_speed(const AudioClip& clip, double rate) {
  if (!(rate > 0.0)) throw Error(ErrorCode::NonPositiveRate, "rate " + std::to_string(rate));
  AudioClip out = clip;
  const std::size_t n = clip.samples.size();
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(n) / rate));
  out.samples.assign(out_len, 0.0f);
  if (n == 0) return out;
  const double last = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = std::min(static_cast<double>(i) * rate, last);
    const auto i0 = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i0);
    const double x0 = clip.samples[i0];
    const double x1 = i0 + 1 < n ? clip.samples[i0 + 1] : x0;
    out.samples[i] = static_cast<float>(x0 + frac * (x1 - x0));
  }
  return out;
}

/// Positive shift delays the content (zeros enter at the start).
inline AudioClip time_shift(const AudioClip& clip, std::int64_t shift) {
  const auto n = static_cast<std::int64_t>(clip.samples.size());
  if (shift > n || -shift > n) {
    throw Error(ErrorCode::ShiftTooLarge, "shift " + std::to_string(shift) + " exceeds length " + std::to_string(n));
  }
  AudioClip out = clip;
  std::fill(out.samples.begin(), out.samples.end(), 0.0f);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t src = i - shift;
    if (src >= 0 && src < n) out.samples[static_cast<std::size_t>(i)] = clip.samples[static_cast<std::size_t>(src)];
  }
  return out;
}

/// Mixes a random segment of `noise` scaled so its peak is level * peak(clip).
/// Consumes exactly one draw (the segment offset).
inline AudioClip add_background_noise(const AudioClip& clip, const AudioClip& noise, double level, Rng& rng) {
  if (level < 0.0 || level > 1.0) throw Error(ErrorCode::InvalidConfig, "noise level must be in [0, 1]");
  if (noise.samples.size() < clip.samples.size()) {
    throw Error(ErrorCode::NoiseTooShort, std::to_string(noise.samples.size()) + " noise samples for a " +
                                              std::to_string(clip.samples.size()) + "-sample clip");
  }
  const std::size_t offset = rng.uniform_index(noise.samples.size() - clip.samples.size() + 1);
  if (clip.samples.empty() || level == 0.0) return clip;
  const double clip_peak = peak_volume(clip);
  if (clip_peak == 0.0) return clip;

  const std::span<const float> segment(noise.samples.data() + offset, clip.samples.size());
  const double noise_peak = peak_volume(segment);
  if (noise_peak == 0.0) return clip;
  const double gain = level * clip_peak / noise_peak;

  AudioClip out = clip;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const double v = static_cast<double>(clip.samples[i]) + gain * static_cast<double>(segment[i]);
    out.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

/// Random contiguous crop when too long, leading zero padding when too short.
/// Consumes one draw only when cropping.
inline std::vector<float> fix_length(std::span<const float> samples, std::size_t target, Rng& rng) {
  if (target == 0) throw Error(ErrorCode::InvalidConfig, "target length must be positive");
  if (samples.size() > target) {
    const std::size_t start = rng.uniform_index(samples.size() - target + 1);
    return {samples.begin() + static_cast<std::ptrdiff_t>(start),
            samples.begin() + static_cast<std::ptrdiff_t>(start + target)};
  }
  std::vector<float> out(target - samples.size(), 0.0f);
  out.insert(out.end(), samples.begin(), samples.end());
  return out;
}

/// speed -> shift -> noise -> fix_length.
///
/// Draw order: rate, shift (seconds), noise level, then when noise_max > 0 the
/// pool index and segment offset, then the crop offset if cropping.
inline std::vector<float> augment_pipeline(const AudioClip& clip, std::span<const AudioClip> noise_pool,
                                           const AugmentConfig& config, Rng& rng) {
  config.validate();
  const double rate = rng.uniform(config.speed_min, config.speed_max);
  const double shift_s = rng.uniform(-config.shift_max_s, config.shift_max_s);
  const double level = rng.uniform(0.0, config.noise_max);

  AudioClip work = rate == 1.0 ? clip : change_speed(clip, rate);

  const auto n = static_cast<std::int64_t>(work.samples.size());
  const std::int64_t shift = std::clamp<std::int64_t>(std::llround(shift_s * work.sample_rate), -n, n);
  if (shift != 0) work = time_shift(work, shift);

  if (config.noise_max > 0.0) {
    if (noise_pool.empty()) throw Error(ErrorCode::InvalidConfig, "noise_max > 0 requires a noise pool");
    const AudioClip& noise = noise_pool[rng.uniform_index(noise_pool.size())];
    work = add_background_noise(work, noise, level, rng);
  }
  return fix_length(work.samples, config.target_length, rng);
}

}  // namespace kws::augment
