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

// Maps a waveform to the network input for a named representation.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kws/augment.hpp"
#include "kws/dsp.hpp"
#include "kws/error.hpp"
#include "kws/nn/tensor.hpp"
#include "kws/rng.hpp"
#include "kws/wav_io.hpp"

namespace kws {

enum class Representation { wave, logspec, db, mel, logmel, mfcc };

inline Representation parse_representation(const std::string& s) {
  if (s == "wave") return Representation::wave;
  if (s == "logspec") return Representation::logspec;
  if (s == "db") return Representation::db;
  if (s == "mel") return Representation::mel;
  if (s == "logmel") return Representation::logmel;
  if (s == "mfcc") return Representation::mfcc;
  throw Error(ErrorCode::InvalidConfig, "unknown representation '" + s + "'");
}

inline std::string representation_name(Representation r) {
  switch (r) {
    case Representation::wave: return "wave";
    case Representation::logspec: return "logspec";
    case Representation::db: return "db";
    case Representation::mel: return "mel";
    case Representation::logmel: return "logmel";
    case Representation::mfcc: return "mfcc";
  }
  return "?";
}

struct FeatureConfig {
  Representation representation = Representation::wave;
  dsp::StftConfig stft;
  std::size_t n_mels = 40;
  std::size_t n_coeffs = 13;
  double fmin = 0.0;
  std::optional<double> fmax;
  double db_ref = 1.0;
  std::size_t wave_length = augment::kNetworkInputLength;  // network input for `wave`
  std::size_t clip_length = 16000;                         // waveform length fed to spectral features

  /// Waveform length every clip is brought to before the transform.
  std::size_t waveform_length() const {
    return representation == Representation::wave ? wave_length : clip_length;
  }
};

struct Features {
  FeatureKind kind = FeatureKind::wave;
  nn::Shape shape;  // one network sample, e.g. [1, 16384] or [1, bins, frames]
  std::vector<float> values;
};

/// Transforms an already length-fixed waveform.
inline Features transform(std::span<const float> waveform, const FeatureConfig& cfg) {
  Features f;
  dsp::FeatureMap map;
  switch (cfg.representation) {
    case Representation::wave:
      f.kind = FeatureKind::wave;
      f.shape = {1, waveform.size()};
      f.values.assign(waveform.begin(), waveform.end());
      return f;
    case Representation::logspec: map = dsp::log_spectrogram(waveform, cfg.stft); break;
    case Representation::db: map = dsp::power_to_db(dsp::stft(waveform, cfg.stft), cfg.db_ref); break;
    case Representation::mel: map = dsp::mel_spectrogram(waveform, cfg.stft, cfg.n_mels, cfg.fmin, cfg.fmax); break;
    case Representation::logmel:
      map = dsp::log_mel_spectrogram(waveform, cfg.stft, cfg.n_mels, cfg.fmin, cfg.fmax);
      break;
    case Representation::mfcc: map = dsp::mfcc(waveform, cfg.stft, cfg.n_mels, cfg.n_coeffs, cfg.fmin, cfg.fmax); break;
  }
  f.kind = map.kind;
  f.shape = {1, map.rows, map.cols};
  f.values = std::move(map.values);
  return f;
}

/// Sample shape the configuration produces, without computing features.
inline nn::Shape feature_shape(const FeatureConfig& cfg) {
  if (cfg.representation == Representation::wave) return {1, cfg.wave_length};
  const std::size_t frames = cfg.stft.frames(cfg.clip_length);
  switch (cfg.representation) {
    case Representation::mel:
    case Representation::logmel: return {1, cfg.n_mels, frames};
    case Representation::mfcc: return {1, cfg.n_coeffs, frames};
    default: return {1, cfg.stft.bins(), frames};
  }
}

/// Evaluation path: fix_length then transform.
inline Features extract(const AudioClip& clip, const FeatureConfig& cfg, Rng& rng) {
  const std::vector<float> w = augment::fix_length(clip.samples, cfg.waveform_length(), rng);
  return transform(w, cfg);
}

/// Training path: full augmentation pipeline targeting the waveform length.
inline Features extract_augmented(const AudioClip& clip, std::span<const AudioClip> noise_pool,
                                  augment::AugmentConfig aug, const FeatureConfig& cfg, Rng& rng) {
  aug.target_length = cfg.waveform_length();
  const std::vector<float> w = augment::augment_pipeline(clip, noise_pool, aug, rng);
  return transform(w, cfg);
}

}  // namespace kws
