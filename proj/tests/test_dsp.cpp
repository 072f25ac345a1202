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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numeric>

#include "expect_error.hpp"
#include "kws/dsp.hpp"
#include "kws/rng.hpp"
#include "oracles.hpp"

namespace kws::dsp {
namespace {

using testing::naive_dft;
using testing::naive_dct_ii;

std::vector<Complex> random_complex(std::size_t n, Rng& rng) {
  std::vector<Complex> x(n);
  for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return x;
}

double norm(const std::vector<Complex>& x) {
  double s = 0;
  for (const auto& v : x) s += std::norm(v);
  return std::sqrt(s);
}

std::vector<float> sine(std::size_t n, double hz, double sr, double amp = 0.5) {
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(amp * std::sin(2 * kPi * hz * i / sr));
  return x;
}

TEST(Hamming, EndpointCenterSymmetry) {
  const auto w = hamming_window(401);
  EXPECT_NEAR(w[0], 2 * 0.53836 - 1, 1e-6);
  EXPECT_NEAR(w[200], 1.0, 1e-6);
  for (std::size_t n = 0; n < w.size(); ++n) EXPECT_EQ(w[n], w[w.size() - 1 - n]);
  const auto even = hamming_window(400);
  for (std::size_t n = 0; n < even.size(); ++n) EXPECT_NEAR(even[n], even[even.size() - 1 - n], 1e-7);
  EXPECT_KWS_ERROR(hamming_window(1), LengthTooSmall);
}

TEST(Fft, ImpulseAndConstant) {
  const auto a = fft({1, 0, 0, 0});
  for (const auto& v : a) EXPECT_EQ(v, Complex(1, 0));
  const auto b = fft({1, 1, 1, 1});
  EXPECT_EQ(b[0], Complex(4, 0));
  for (std::size_t k = 1; k < 4; ++k) EXPECT_LT(std::abs(b[k]), 1e-15);
  EXPECT_KWS_ERROR(fft(std::vector<Complex>(6)), NonPowerOfTwoLength);
  EXPECT_KWS_ERROR(fft({}), NonPowerOfTwoLength);
}

TEST(Fft, MatchesNaiveDft) {
  Rng rng(64);
  for (std::size_t n : {1u, 2u, 4u, 8u, 64u, 256u, 1024u}) {
    const auto x = random_complex(n, rng);
    const auto got = fft(x);
    const auto want = naive_dft(x);
    double err = 0;
    for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(got[k] - want[k]));
    EXPECT_LT(err, 1e-9 * norm(x)) << "n=" << n;
  }
}

TEST(Fft, DirectDftPathForOtherLengths) {
  Rng rng(7);
  for (std::size_t n : {3u, 6u, 480u}) {
    const auto x = random_complex(n, rng);
    const auto got = spectrum(x);
    const auto want = naive_dft(x);
    double err = 0;
    for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(got[k] - want[k]));
    EXPECT_LT(err, 1e-9 * norm(x)) << "n=" << n;
  }
}

TEST(Fft, ParsevalAndLinearity) {
  Rng rng(2);
  for (std::size_t n : {16u, 512u, 4096u}) {
    const auto x = random_complex(n, rng);
    const auto y = random_complex(n, rng);
    const auto fx = fft(x), fy = fft(y);
    double time = 0, freq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      time += std::norm(x[i]);
      freq += std::norm(fx[i]);
    }
    EXPECT_LT(std::abs(time - freq / n) / time, 1e-9);

    const Complex a(0.3, -1.2), b(2.0, 0.5);
    std::vector<Complex> mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = a * x[i] + b * y[i];
    const auto fm = fft(mix);
    double err = 0, scale = 0;
    for (std::size_t k = 0; k < n; ++k) {
      err = std::max(err, std::abs(fm[k] - (a * fx[k] + b * fy[k])));
      scale = std::max(scale, std::abs(fm[k]));
    }
    EXPECT_LT(err / scale, 1e-9);
  }
}

TEST(Stft, TableShapes) {
  const std::vector<float> x(16000, 0.0f);
  const FeatureMap a = stft(x, StftConfig{480, 320, 480, 16000});
  EXPECT_EQ(a.rows, 241u);
  EXPECT_EQ(a.cols, 49u);
  const FeatureMap b = stft(x, StftConfig{256, 128, 256, 16000});
  EXPECT_EQ(b.rows, 129u);
  EXPECT_EQ(b.cols, 124u);
  const FeatureMap c = stft(x, StftConfig{});
  EXPECT_EQ(c.rows, 257u);
  EXPECT_EQ(c.cols, 98u);
}

TEST(Stft, ZeroSignalAndShortSignal) {
  const FeatureMap z = stft(std::vector<float>(2000, 0.0f), StftConfig{});
  for (float v : z.values) EXPECT_EQ(v, 0.0f);
  EXPECT_KWS_ERROR(stft(std::vector<float>(399, 0.0f), StftConfig{}), SignalTooShort);
}

TEST(Stft, FrameMatchesWindowedDft) {
  Rng rng(9);
  std::vector<float> x(1000);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  const StftConfig cfg{200, 100, 256, 16000};
  const FeatureMap m = stft(x, cfg);
  const auto w = hamming_window(200);
  for (std::size_t t : {0u, 3u, 8u}) {
    std::vector<Complex> frame(256);
    for (std::size_t i = 0; i < 200; ++i) frame[i] = static_cast<double>(x[t * 100 + i]) * w[i];
    const auto want = naive_dft(frame);
    for (std::size_t k = 0; k < m.rows; ++k) {
      const double p = std::norm(want[k]);
      EXPECT_NEAR(m.at(k, t), p, 1e-5 * std::max(1.0, p));
    }
  }
}

TEST(Stft, BinCenteredSineConcentratesEnergy) {
  const StftConfig cfg{512, 256, 512, 16000};
  for (std::size_t k : {10u, 50u, 200u}) {
    const auto x = sine(4096, k * 16000.0 / 512, 16000);
    const FeatureMap m = stft(x, cfg);
    for (std::size_t t = 0; t < m.cols; ++t) {
      double total = 0, near = 0;
      for (std::size_t r = 0; r < m.rows; ++r) {
        total += m.at(r, t);
        if (r + 1 >= k && r <= k + 1) near += m.at(r, t);
      }
      EXPECT_GE(near / total, 0.9);
    }
  }
}

TEST(PowerToDb, Examples) {
  FeatureMap m;
  m.rows = 2;
  m.cols = 2;
  m.values.assign(4, 2.5f);
  for (float v : power_to_db(m, 2.5).values) EXPECT_EQ(v, 0.0f);

  m.values = {25.0f, 2.5f, 2.5f, 2.5f};
  EXPECT_NEAR(power_to_db(m, 2.5).values[0], 10.0f, 1e-5);

  FeatureMap one;
  one.rows = one.cols = 1;
  one.values = {0.0f};
  EXPECT_NEAR(power_to_db(one, 1.0, kDbAmin, std::nullopt).values[0], -100.0f, 1e-4);
  EXPECT_NEAR(power_to_db(one, 1.0).values[0], -100.0f, 1e-4);

  FeatureMap wide;
  wide.rows = 1;
  wide.cols = 2;
  wide.values = {1.0f, 0.0f};
  const FeatureMap clamped = power_to_db(wide, 1.0);
  EXPECT_EQ(clamped.values[0], 0.0f);
  EXPECT_NEAR(clamped.values[1], -80.0f, 1e-4);
  EXPECT_KWS_ERROR(power_to_db(wide, 0.0), NonPositiveRef);
  EXPECT_KWS_ERROR(power_to_db(wide, -1.0), NonPositiveRef);
}

TEST(LogSpectrogram, ZeroSignalFloorAndShape) {
  const FeatureMap z = log_spectrogram(std::vector<float>(800, 0.0f), StftConfig{});
  EXPECT_EQ(z.kind, FeatureKind::log_power);
  for (float v : z.values) EXPECT_NEAR(v, std::log(1e-10), 1e-4);
  const auto x = sine(4000, 440, 16000);
  const FeatureMap p = stft(x, StftConfig{});
  const FeatureMap l = log_spectrogram(x, StftConfig{});
  ASSERT_EQ(l.values.size(), p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    for (std::size_t j = i + 1; j < std::min(p.values.size(), i + 20); ++j) {
      if (p.values[i] < p.values[j]) EXPECT_LE(l.values[i], l.values[j]);
    }
  }
}

TEST(Mel, SpotValuesAndInverse) {
  EXPECT_EQ(hz_to_mel(0), 0.0);
  EXPECT_NEAR(hz_to_mel(700), 2595 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(hz_to_mel(700), 781.17, 0.01);
  EXPECT_NEAR(hz_to_mel(1000), 1000.0, 0.1);
  EXPECT_EQ(mel_to_hz(0), 0.0);
  EXPECT_NEAR(mel_to_hz(781.17), 700.0, 0.01);
  for (double f : {50.0, 700.0, 4000.0, 8000.0}) {
    EXPECT_NEAR(mel_to_hz(hz_to_mel(f)) / f, 1.0, 1e-6);
    EXPECT_NEAR(hz_to_mel(f) / testing::mel_ln(f), 1.0, 1e-5);
  }
  double prev = -1;
  for (double f = 0; f < 20000; f += 37.5) {
    const double m = hz_to_mel(f);
    EXPECT_GT(m, prev);
    prev = m;
  }
  EXPECT_KWS_ERROR(hz_to_mel(-1), NegativeFrequency);
  EXPECT_KWS_ERROR(mel_to_hz(-1), NegativeMel);
}

// Triangle weights evaluated from the construction rule, then peak-normalized.
std::vector<double> triangle_oracle(std::size_t n_mels, const StftConfig& cfg, double fmin, double fmax) {
  const double lo = 2595 * std::log10(1 + fmin / 700), hi = 2595 * std::log10(1 + fmax / 700);
  std::vector<double> pos(n_mels + 2);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double mel = lo + (hi - lo) * i / (n_mels + 1);
    pos[i] = 700 * (std::pow(10, mel / 2595) - 1) * cfg.fft_size / cfg.sample_rate;
  }
  const std::size_t bins = cfg.fft_size / 2 + 1;
  std::vector<double> w(n_mels * bins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    double peak = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double b = static_cast<double>(k);
      double v = 0;
      if (b > pos[m] && b <= pos[m + 1]) v = (b - pos[m]) / (pos[m + 1] - pos[m]);
      else if (b > pos[m + 1] && b < pos[m + 2]) v = (pos[m + 2] - b) / (pos[m + 2] - pos[m + 1]);
      w[m * bins + k] = v;
      peak = std::max(peak, v);
    }
    for (std::size_t k = 0; k < bins; ++k) w[m * bins + k] /= peak;
  }
  return w;
}

TEST(MelFilterbank, MatchesTriangleOracle) {
  const StftConfig cfg{};
  for (auto [n, fmin, fmax] : {std::tuple{40u, 0.0, 8000.0}, std::tuple{20u, 300.0, 4000.0}}) {
    const MelFilterbank fb = mel_filterbank(n, cfg, fmin, fmax);
    const auto want = triangle_oracle(n, cfg, fmin, fmax);
    ASSERT_EQ(fb.weights.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(fb.weights[i], want[i], 1e-6) << i;
  }
}

TEST(MelFilterbank, RowPeaksCoverageAndSupport) {
  const StftConfig cfg{};
  const MelFilterbank fb = mel_filterbank(40, cfg, 100.0, 6000.0);
  const double bin_hz = 16000.0 / 512;
  double prev_center = -1;
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    float peak = 0;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      EXPECT_GE(fb.at(m, k), 0.0f);
      if (fb.at(m, k) > peak) {
        peak = fb.at(m, k);
        arg = k;
      }
    }
    EXPECT_EQ(peak, 1.0f);
    EXPECT_GT(static_cast<double>(arg), prev_center);
    prev_center = static_cast<double>(arg);
  }
  for (std::size_t k = 0; k < fb.n_bins; ++k) {
    const double hz = k * bin_hz;
    float col = 0;
    for (std::size_t m = 0; m < fb.n_mels; ++m) col = std::max(col, fb.at(m, k));
    if (hz > 100.0 && hz < 6000.0) EXPECT_GT(col, 0.0f) << "bin " << k;
    if (hz <= 100.0 || hz >= 6000.0) EXPECT_EQ(col, 0.0f) << "bin " << k;
  }
  EXPECT_KWS_ERROR(mel_filterbank(1, cfg, 0, 8000.0), InvalidRange);
  EXPECT_KWS_ERROR(mel_filterbank(40, cfg, 5000, 4000.0), InvalidRange);
  EXPECT_KWS_ERROR(mel_filterbank(40, cfg, 0, 9000.0), InvalidRange);
}

TEST(MelSpectrogram, EqualsRowDotProducts) {
  Rng rng(4);
  std::vector<float> x(6000);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  const StftConfig cfg{};
  const FeatureMap p = stft(x, cfg);
  const MelFilterbank fb = mel_filterbank(40, cfg, 0.0);
  const FeatureMap m = mel_spectrogram(x, cfg, 40);
  ASSERT_EQ(m.rows, 40u);
  ASSERT_EQ(m.cols, p.cols);
  EXPECT_EQ(m.kind, FeatureKind::mel);
  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t t = 0; t < p.cols; ++t) {
      double dot = 0;
      for (std::size_t k = 0; k < p.rows; ++k) dot += static_cast<double>(fb.at(r, k)) * p.at(k, t);
      EXPECT_NEAR(m.at(r, t), dot, 1e-6 * std::max(dot, 1e-12));
    }
  }
  for (float v : mel_spectrogram(std::vector<float>(1000, 0.0f), cfg, 40).values) EXPECT_EQ(v, 0.0f);
}

TEST(Dct, ConstantOrthonormalityAndOracle) {
  const std::vector<double> c(10, 3.0);
  const auto y = dct_ii(c, 10);
  EXPECT_NEAR(y[0], 3.0 * std::sqrt(10.0), 1e-12);
  for (std::size_t k = 1; k < 10; ++k) EXPECT_NEAR(y[k], 0.0, 1e-12);

  Rng rng(8);
  for (std::size_t n : {8u, 13u, 40u, 64u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-2, 2);
    const auto full = dct_ii(x, n);
    const auto want = naive_dct_ii(x, n);
    double nx = 0, ny = 0;
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(full[k], want[k], 1e-9);
      nx += x[k] * x[k];
      ny += full[k] * full[k];
    }
    EXPECT_NEAR(std::sqrt(ny) / std::sqrt(nx), 1.0, 1e-6);
    const auto head = dct_ii(x, 3);
    ASSERT_EQ(head.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(head[k], full[k]);
  }
  EXPECT_KWS_ERROR(dct_ii(c, 11), InvalidOutputCount);
}

TEST(Mfcc, ZeroSignalAndComposition) {
  const StftConfig cfg{};
  const FeatureMap z = mfcc(std::vector<float>(3000, 0.0f), cfg, 40, 13);
  ASSERT_EQ(z.rows, 13u);
  const float floor = static_cast<float>(std::log(1e-10));
  for (std::size_t t = 0; t < z.cols; ++t) {
    EXPECT_NEAR(z.at(0, t), floor * std::sqrt(40.0), 1e-3);
    for (std::size_t k = 1; k < 13; ++k) EXPECT_NEAR(z.at(k, t), 0.0, 1e-3);
  }

  const auto x = sine(8000, 1234.0, 16000);
  const FeatureMap got = mfcc(x, cfg, 40, 13);
  const FeatureMap logmel = log_of(mel_spectrogram(x, cfg, 40), FeatureKind::log_mel);
  for (std::size_t t = 0; t < got.cols; ++t) {
    std::vector<double> col(40);
    for (std::size_t m = 0; m < 40; ++m) col[m] = logmel.at(m, t);
    const auto want = dct_ii(col, 13);
    for (std::size_t k = 0; k < 13; ++k) EXPECT_EQ(got.at(k, t), static_cast<float>(want[k]));
  }
  EXPECT_KWS_ERROR(mfcc(x, cfg, 10, 13), InvalidOutputCount);
}

TEST(FeatureMaps, FiniteForFiniteInput) {
  Rng rng(10);
  std::vector<float> x(5000);
  for (auto& v : x) v = rng.bernoulli(0.5) ? 0.0f : static_cast<float>(rng.uniform(-1, 1));
  const StftConfig cfg{};
  for (const FeatureMap& m : {stft(x, cfg), log_spectrogram(x, cfg), power_to_db(stft(x, cfg)),
                              mel_spectrogram(x, cfg, 40), log_mel_spectrogram(x, cfg, 40), mfcc(x, cfg, 40, 13)}) {
    for (float v : m.values) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Scft, RoundTripAndErrors) {
  const FeatureMap m = mel_spectrogram(sine(2000, 500, 16000), StftConfig{}, 20);
  const io::Bytes b = encode_scft(m.to_scft());
  EXPECT_EQ(b[0], 'S');
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], static_cast<std::uint8_t>(FeatureKind::mel));
  EXPECT_EQ(b[6], 2);
  EXPECT_EQ(io::get_u32(b, 7), 20u);
  EXPECT_EQ(b.size(), 7 + 8 + 4 * m.values.size());
  const ScftTensor back = decode_scft(b);
  EXPECT_EQ(back.kind, FeatureKind::mel);
  EXPECT_EQ(back.data, m.values);
  io::Bytes bad = b;
  bad[4] = 9;
  EXPECT_KWS_ERROR(decode_scft(bad), ParseError);
  io::Bytes cut = b;
  cut.pop_back();
  EXPECT_KWS_ERROR(decode_scft(cut), ParseError);
}

}  // namespace
}  // namespace kws::dsp
