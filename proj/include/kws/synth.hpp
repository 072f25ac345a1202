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

// Synthetic speech-command corpus: each keyword is a dual tone, "unknown"
// words are tone pairs above the keyword band, and background recordings are
// white noise. Layout and file names follow the real corpus.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "kws/dataset.hpp"
#include "kws/rng.hpp"
#include "kws/wav_io.hpp"

namespace kws::synth {

struct SynthConfig {
  std::size_t n_per_class = 40;
  std::size_t n_speakers = 10;
  std::size_t noise_files = 4;
  std::uint64_t seed = 0;
  std::uint32_t sample_rate = kDefaultSampleRate;
};

inline const std::vector<std::string>& unknown_words() {
  static const std::vector<std::string> words = {"bed", "bird", "cat", "dog", "happy", "house"};
  return words;
}

/// Base frequencies of keyword class i (0..9).
inline std::pair<double, double> keyword_tones(std::size_t i) {
  return {300.0 + 150.0 * static_cast<double>(i), 800.0 + 100.0 * static_cast<double>(i)};
}

struct SynthSummary {
  std::size_t keyword_files = 0;
  std::size_t unknown_files = 0;
  std::size_t noise_files = 0;
};

namespace detail {

inline std::vector<std::string> speaker_ids(std::size_t n, Rng& rng) {
  std::vector<std::string> ids;
  while (ids.size() < n) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rng.next_u64() & 0xffffffffu));
    if (std::find(ids.begin(), ids.end(), buf) == ids.end()) ids.emplace_back(buf);
  }
  return ids;
}

/// One second holding a windowed tone pair at a random onset.
inline AudioClip tone_clip(double f1, double f2, std::uint32_t sr, Rng& rng) {
  AudioClip clip;
  clip.sample_rate = sr;
  clip.samples.assign(sr, 0.0f);
  const double a1 = rng.uniform(0.25, 0.45);
  const double a2 = rng.uniform(0.15, 0.35);
  const double ph1 = rng.uniform(0.0, 6.283185307179586);
  const double ph2 = rng.uniform(0.0, 6.283185307179586);
  const auto onset = static_cast<std::size_t>(rng.uniform(0.05, 0.3) * sr);
  const auto length = static_cast<std::size_t>(rng.uniform(0.4, 0.6) * sr);
  const auto ramp = static_cast<std::size_t>(0.03 * sr);
  const double floor_noise = 0.005;
  for (std::size_t n = 0; n < clip.samples.size(); ++n) {
    double v = floor_noise * (2.0 * rng.uniform() - 1.0);
    if (n >= onset && n < onset + length) {
      const std::size_t k = n - onset;
      double env = 1.0;
      if (k < ramp) env = 0.5 - 0.5 * std::cos(3.141592653589793 * static_cast<double>(k) / ramp);
      if (length - k <= ramp) env = 0.5 - 0.5 * std::cos(3.141592653589793 * static_cast<double>(length - k) / ramp);
      const double t = static_cast<double>(n) / sr;
      v += env * (a1 * std::sin(6.283185307179586 * f1 * t + ph1) + a2 * std::sin(6.283185307179586 * f2 * t + ph2));
    }
    clip.samples[n] = static_cast<float>(std::clamp(v, -1.0, 32767.0 / 32768.0));
  }
  return clip;
}

}  // namespace detail

/// Writes the corpus under `out_dir`. Identical configs give byte-identical files.
inline SynthSummary generate_corpus(const std::filesystem::path& out_dir, const SynthConfig& cfg) {
  if (cfg.n_per_class == 0 || cfg.n_speakers == 0) {
    throw Error(ErrorCode::InvalidConfig, "synth needs at least one clip per class and one speaker");
  }
  Rng rng(cfg.seed);
  const std::vector<std::string> speakers = detail::speaker_ids(cfg.n_speakers, rng);
  std::vector<double> voice(cfg.n_speakers);
  for (auto& v : voice) v = 1.0 + rng.uniform(-0.03, 0.03);

  SynthSummary summary;
  const auto file_name = [&](std::size_t j) {
    return speakers[j % cfg.n_speakers] + "_nohash_" + std::to_string(j / cfg.n_speakers) + ".wav";
  };

  for (std::size_t c = 0; c < 10; ++c) {
    const auto [f1, f2] = keyword_tones(c);
    for (std::size_t j = 0; j < cfg.n_per_class; ++j) {
      Rng clip_rng = Rng::stream(cfg.seed, c * 1000003 + j);
      const double scale = voice[j % cfg.n_speakers] * (1.0 + clip_rng.uniform(-0.015, 0.015));
      const AudioClip clip = detail::tone_clip(f1 * scale, f2 * scale, cfg.sample_rate, clip_rng);
      save_wav(out_dir / std::string(kClassNames[c]) / file_name(j), clip);
      ++summary.keyword_files;
    }
  }

  const auto& words = unknown_words();
  for (std::size_t j = 0; j < cfg.n_per_class; ++j) {
    Rng clip_rng = Rng::stream(cfg.seed, 11 * 1000003 + j);
    const double f1 = clip_rng.uniform(2000.0, 3800.0);
    const double f2 = clip_rng.uniform(2000.0, 3800.0);
    const AudioClip clip = detail::tone_clip(f1, f2, cfg.sample_rate, clip_rng);
    save_wav(out_dir / words[j % words.size()] / file_name(j), clip);
    ++summary.unknown_files;
  }

  // Enough one-second fragments for a silence class as large as the others.
  const std::size_t seconds = (cfg.n_per_class + cfg.noise_files - 1) / std::max<std::size_t>(cfg.noise_files, 1) + 1;
  for (std::size_t k = 0; k < cfg.noise_files; ++k) {
    Rng noise_rng = Rng::stream(cfg.seed, 12 * 1000003 + k);
    AudioClip noise;
    noise.sample_rate = cfg.sample_rate;
    noise.samples.resize(seconds * cfg.sample_rate);
    const double sigma = noise_rng.uniform(0.01, 0.1);
    for (auto& s : noise.samples) {
      s = static_cast<float>(std::clamp(sigma * noise_rng.normal(), -1.0, 32767.0 / 32768.0));
    }
    save_wav(out_dir / std::string(kBackgroundNoiseDir) / ("white_noise_" + std::to_string(k) + ".wav"), noise);
    ++summary.noise_files;
  }
  return summary;
}

}  // namespace kws::synth
