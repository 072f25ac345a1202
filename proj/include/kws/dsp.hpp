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

// Time-frequency analysis: Hamming window, FFT, STFT power spectrogram,
// log and decibel scaling, mel filterbank, DCT-II and MFCC.
//
// Transforms run in double precision; FeatureMap stores float.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kws/error.hpp"
#include "kws/scft.hpp"

namespace kws::dsp {

using Complex = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kHammingA0 = 0.53836;
constexpr double kLogFloor = 1e-10;
constexpr double kDbAmin = 1e-10;
constexpr double kDbTopDb = 80.0;

struct StftConfig {
  std::size_t win_length = 400;  // 25 ms at 16 kHz
  std::size_t hop_length = 160;  // 10 ms
  std::size_t fft_size = 512;
  std::uint32_t sample_rate = 16000;

  std::size_t bins() const { return fft_size / 2 + 1; }

  /// Throws InvalidConfig unless 0 < hop <= win <= fft_size. A non-power-of-two
  /// fft_size is accepted and served by the direct DFT.
  void validate() const {
    if (hop_length == 0 || hop_length > win_length || win_length > fft_size || sample_rate == 0) {
      throw Error(ErrorCode::InvalidConfig,
                  "stft requires 0 < hop (" + std::to_string(hop_length) + ") <= win (" +
                      std::to_string(win_length) + ") <= fft_size (" + std::to_string(fft_size) + ")");
    }
    if (win_length < 2) throw Error(ErrorCode::InvalidConfig, "win_length must be >= 2");
  }

  std::size_t frames(std::size_t n_samples) const {
    return n_samples < win_length ? 0 : 1 + (n_samples - win_length) / hop_length;
  }

  bool operator==(const StftConfig&) const = default;
};

/// Grid of bins x frames, row-major.
struct FeatureMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
  FeatureKind kind = FeatureKind::power;
  StftConfig config;

  float& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  ScftTensor to_scft() const {
    return ScftTensor{kind, {static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols)}, values};
  }
};

struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<float> weights;  // n_mels x n_bins
  double fmin = 0.0;
  double fmax = 0.0;

  float at(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};

inline std::vector<float> hamming_window(std::size_t length) {
  if (length < 2) throw Error(ErrorCode::LengthTooSmall, "hamming window needs length >= 2");
  std::vector<float> w(length);
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = static_cast<float>(kHammingA0 - (1.0 - kHammingA0) * std::cos(2.0 * kPi * static_cast<double>(n) / denom));
  }
  return w;
}

/// Unnormalized forward DFT by iterative radix-2 decimation in time.
inline std::vector<Complex> fft(std::vector<Complex> x) {
  const std::size_t n = x.size();
  if (n == 0 || !std::has_single_bit(n)) {
    throw Error(ErrorCode::NonPowerOfTwoLength, "fft length " + std::to_string(n));
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  // Twiddles evaluated directly rather than by recurrence to keep error at ulp level.
  std::vector<Complex> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = Complex(std::cos(a), std::sin(a));
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const Complex t = twiddle[j * step] * x[start + j + half];
        x[start + j + half] = x[start + j] - t;
        x[start + j] += t;
      }
    }
  }
  return x;
}

/// Direct O(N^2) DFT for lengths the radix-2 path cannot take.
inline std::vector<Complex> dft(std::span<const Complex> x) {
  const std::size_t n = x.size();
  // Twiddles indexed by k*t mod n keep every angle in [0, 2pi).
  std::vector<Complex> twiddle(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = -2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
    twiddle[j] = Complex(std::cos(a), std::sin(a));
  }
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    std::size_t j = 0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += x[t] * twiddle[j];
      j += k;
      if (j >= n) j -= n;
    }
    out[k] = acc;
  }
  return out;
}

/// Forward DFT of any length: FFT when the length is a power of two.
inline std::vector<Complex> spectrum(std::vector<Complex> x) {
  if (!x.empty() && std::has_single_bit(x.size())) return fft(std::move(x));
  return dft(x);
}

/// Power spectrogram |X[k]|^2, k in [0, fft_size/2], frames without padding.
inline FeatureMap stft(std::span<const float> samples, const StftConfig& config) {
  config.validate();
  if (samples.size() < config.win_length) {
    throw Error(ErrorCode::SignalTooShort, std::to_string(samples.size()) + " samples < window " +
                                               std::to_string(config.win_length));
  }
  const std::vector<float> window = hamming_window(config.win_length);
  FeatureMap map;
  map.kind = FeatureKind::power;
  map.config = config;
  map.rows = config.bins();
  map.cols = config.frames(samples.size());
  map.values.assign(map.rows * map.cols, 0.0f);

  std::vector<Complex> frame(config.fft_size);
  for (std::size_t t = 0; t < map.cols; ++t) {
    std::fill(frame.begin(), frame.end(), Complex(0.0));
    const std::size_t start = t * config.hop_length;
    for (std::size_t i = 0; i < config.win_length; ++i) {
      frame[i] = static_cast<double>(samples[start + i]) * static_cast<double>(window[i]);
    }
    const std::vector<Complex> spec = spectrum(frame);
    for (std::size_t k = 0; k < map.rows; ++k) {
      map.at(k, t) = static_cast<float>(std::norm(spec[k]));
    }
  }
  return map;
}

/// 10*log10(max(S, amin)/ref), floored at max - top_db when top_db is set.
inline FeatureMap power_to_db(const FeatureMap& power, double ref = 1.0, double amin = kDbAmin,
                              std::optional<double> top_db = kDbTopDb) {
  if (!(ref > 0.0)) throw Error(ErrorCode::NonPositiveRef, "ref must be positive");
  FeatureMap out = power;
  out.kind = FeatureKind::decibel;
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> db(power.values.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    // Ratio first: the difference of two logs can pick up an FMA rounding at x == ref.
    db[i] = 10.0 * std::log10(std::max(static_cast<double>(power.values[i]), amin) / ref);
    peak = std::max(peak, db[i]);
  }
  for (std::size_t i = 0; i < db.size(); ++i) {
    double v = db[i];
    if (top_db) v = std::max(v, peak - *top_db);
    out.values[i] = static_cast<float>(v);
  }
  return out;
}

inline FeatureMap log_spectrogram(std::span<const float> samples, const StftConfig& config) {
  FeatureMap map = stft(samples, config);
  map.kind = FeatureKind::log_power;
  for (float& v : map.values) v = static_cast<float>(std::log(static_cast<double>(v) + kLogFloor));
  return map;
}

inline double hz_to_mel(double hz) {
  if (hz < 0.0) throw Error(ErrorCode::NegativeFrequency, std::to_string(hz) + " Hz");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double mel_to_hz(double mel) {
  if (mel < 0.0) throw Error(ErrorCode::NegativeMel, std::to_string(mel) + " mel");
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

/// Triangular filters evenly spaced in mel between fmin and fmax, sampled at
/// integer FFT bins and scaled so each row peaks at exactly 1.
inline MelFilterbank mel_filterbank(std::size_t n_mels, const StftConfig& config, double fmin,
                                    std::optional<double> fmax = std::nullopt) {
  const double nyquist = config.sample_rate / 2.0;
  const double hi = fmax.value_or(nyquist);
  if (n_mels < 2 || fmin < 0.0 || !(fmin < hi) || hi > nyquist) {
    throw Error(ErrorCode::InvalidRange, "mel filterbank needs n_mels >= 2 and 0 <= fmin < fmax <= sr/2");
  }
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = config.bins();
  fb.fmin = fmin;
  fb.fmax = hi;
  fb.weights.assign(n_mels * fb.n_bins, 0.0f);

  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(hi);
  std::vector<double> edge(n_mels + 2);  // fractional FFT bin positions
  for (std::size_t i = 0; i < edge.size(); ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1);
    edge[i] = mel_to_hz(mel) * static_cast<double>(config.fft_size) / config.sample_rate;
  }

  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edge[m], center = edge[m + 1], right = edge[m + 2];
    std::vector<double> row(fb.n_bins, 0.0);
    double peak = 0.0;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double x = static_cast<double>(k);
      double v = 0.0;
      if (x > left && x <= center) {
        v = (x - left) / (center - left);
      } else if (x > center && x < right) {
        v = (right - x) / (right - center);
      }
      row[k] = v;
      peak = std::max(peak, v);
    }
    if (peak <= 0.0) {
      throw Error(ErrorCode::InvalidRange, "mel filter " + std::to_string(m) +
                                               " covers no FFT bin; reduce n_mels or raise fft_size");
    }
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      fb.weights[m * fb.n_bins + k] = static_cast<float>(row[k] / peak);
    }
  }
  return fb;
}

/// weights x power, with double accumulation.
inline FeatureMap apply_filterbank(const MelFilterbank& fb, const FeatureMap& power) {
  if (power.rows != fb.n_bins) {
    throw Error(ErrorCode::InvalidConfig, "filterbank expects " + std::to_string(fb.n_bins) + " bins, map has " +
                                              std::to_string(power.rows));
  }
  FeatureMap mel;
  mel.kind = FeatureKind::mel;
  mel.config = power.config;
  mel.rows = fb.n_mels;
  mel.cols = power.cols;
  mel.values.assign(mel.rows * mel.cols, 0.0f);
  std::vector<double> acc(mel.cols);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double w = fb.at(m, k);
      if (w == 0.0) continue;
      const float* src = &power.values[k * power.cols];
      for (std::size_t t = 0; t < mel.cols; ++t) acc[t] += w * static_cast<double>(src[t]);
    }
    for (std::size_t t = 0; t < mel.cols; ++t) mel.at(m, t) = static_cast<float>(acc[t]);
  }
  return mel;
}

inline FeatureMap mel_spectrogram(std::span<const float> samples, const StftConfig& config, std::size_t n_mels,
                                  double fmin = 0.0, std::optional<double> fmax = std::nullopt) {
  const MelFilterbank fb = mel_filterbank(n_mels, config, fmin, fmax);
  return apply_filterbank(fb, stft(samples, config));
}

/// Elementwise ln(x + 1e-10) of a mel map.
inline FeatureMap log_of(const FeatureMap& map, FeatureKind kind) {
  FeatureMap out = map;
  out.kind = kind;
  for (float& v : out.values) v = static_cast<float>(std::log(static_cast<double>(v) + kLogFloor));
  return out;
}

inline FeatureMap log_mel_spectrogram(std::span<const float> samples, const StftConfig& config,
                                      std::size_t n_mels, double fmin = 0.0,
                                      std::optional<double> fmax = std::nullopt) {
  return log_of(mel_spectrogram(samples, config, n_mels, fmin, fmax), FeatureKind::log_mel);
}

/// Orthonormal DCT-II, first n_out coefficients.
///
/// Evaluated through a 2N-point DFT of the even mirror [x, reverse(x)]:
/// y[k] = s(k)/2 * Re(exp(-i*pi*k/(2N)) * V[k]).
inline std::vector<double> dct_ii(std::span<const double> x, std::size_t n_out) {
  const std::size_t n = x.size();
  if (n == 0 || n_out > n) {
    throw Error(ErrorCode::InvalidOutputCount, std::to_string(n_out) + " coefficients from " +
                                                   std::to_string(n) + " inputs");
  }
  std::vector<Complex> mirror(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    mirror[i] = x[i];
    mirror[2 * n - 1 - i] = x[i];
  }
  const std::vector<Complex> v = spectrum(std::move(mirror));
  std::vector<double> y(n_out);
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n_out; ++k) {
    const double a = -kPi * static_cast<double>(k) / (2.0 * static_cast<double>(n));
    const double re = (Complex(std::cos(a), std::sin(a)) * v[k]).real();
    y[k] = (k == 0 ? s0 : sk) * 0.5 * re;
  }
  return y;
}

/// Per frame: DCT-II of the log mel energies, keeping n_coeffs.
inline FeatureMap mfcc(std::span<const float> samples, const StftConfig& config, std::size_t n_mels,
                       std::size_t n_coeffs, double fmin = 0.0, std::optional<double> fmax = std::nullopt) {
  if (n_coeffs > n_mels) {
    throw Error(ErrorCode::InvalidOutputCount, "n_coeffs exceeds n_mels");
  }
  const FeatureMap log_mel = log_mel_spectrogram(samples, config, n_mels, fmin, fmax);
  FeatureMap out;
  out.kind = FeatureKind::mfcc;
  out.config = config;
  out.rows = n_coeffs;
  out.cols = log_mel.cols;
  out.values.assign(out.rows * out.cols, 0.0f);
  std::vector<double> column(n_mels);
  for (std::size_t t = 0; t < out.cols; ++t) {
    for (std::size_t m = 0; m < n_mels; ++m) column[m] = log_mel.at(m, t);
    const std::vector<double> c = dct_ii(column, n_coeffs);
    for (std::size_t k = 0; k < n_coeffs; ++k) out.at(k, t) = static_cast<float>(c[k]);
  }
  return out;
}

}  // namespace kws::dsp
