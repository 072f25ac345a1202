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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "kws/cli.hpp"
#include "kws/train.hpp"
#include "layer_cases.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace kws {
namespace {

using Clock = std::chrono::steady_clock;
using testing::TempDir;
using namespace dsp;

// Pinned tolerances and budgets.
constexpr double kFftTolerance = 1e-9;
constexpr double kDctTolerance = 1e-9;
constexpr double kParsevalTolerance = 1e-9;
constexpr double kMelRoundTripTolerance = 1e-6;
constexpr double kGradTolerance = 1e-3;
constexpr std::uint64_t kGradSeeds = 5;
constexpr std::size_t kOverfitEpochs = 200;
constexpr double kMemberAccuracy = 0.90;
constexpr double kEnsembleSlack = 0.02;
constexpr double kAgreement = 0.80;
constexpr std::size_t kInvariantBatches = 100;
constexpr std::size_t kWavClips = 1000;
constexpr double kMel1000Tolerance = 0.1;
constexpr double kHammingTolerance = 1e-6;
constexpr double kLossTolerance = 1e-6;

constexpr double kDspBudget = 10;
constexpr double kShapeBudget = 5;
constexpr double kGradBudget = 60;
constexpr double kOverfitBudget = 300;
constexpr double kEndToEndBudget = 1200;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  std::string name;
  double budget_s;  // 0: no runtime bound
  std::function<void(Outcome&)> body;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

std::vector<double> random_signal(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

void dsp_oracles(Outcome& o) {
  Rng rng(2024);
  double fft_err = 0, parseval_err = 0;
  for (std::size_t n = 1; n <= 4096; n *= 2) {
    std::vector<Complex> x(n);
    for (auto& v : x) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const auto got = fft(x);
    const auto want = testing::naive_dft(x);
    double diff = 0;
    for (std::size_t k = 0; k < n; ++k) diff = std::max(diff, std::abs(got[k] - want[k]));
    fft_err = std::max(fft_err, diff / testing::max_abs(want));

    long double time_energy = 0, freq_energy = 0;
    for (const auto& v : x) time_energy += std::norm(v);
    for (const auto& v : got) freq_energy += std::norm(v);
    freq_energy /= static_cast<long double>(n);
    parseval_err = std::max(parseval_err, static_cast<double>(std::abs(time_energy - freq_energy) / time_energy));
  }
  o.require(fft_err < kFftTolerance, "fft vs naive DFT");
  o.require(parseval_err < kParsevalTolerance, "Parseval");

  double dct_err = 0;
  for (const auto& [n, n_out] : {std::pair<std::size_t, std::size_t>{40, 13}, {40, 40}, {128, 20}, {7, 7}}) {
    const auto x = random_signal(n, rng);
    const auto got = dct_ii(x, n_out);
    const auto want = testing::naive_dct_ii(x, n_out);
    double diff = 0, scale = 0;
    for (std::size_t k = 0; k < n_out; ++k) {
      diff = std::max(diff, std::abs(got[k] - want[k]));
      scale = std::max(scale, std::abs(want[k]));
    }
    dct_err = std::max(dct_err, diff / scale);
  }
  o.require(dct_err < kDctTolerance, "dct_ii vs naive sum");

  double mel_err = 0;
  for (double hz = 1.0; hz <= 8000.0; hz += 7.0) {
    mel_err = std::max(mel_err, std::abs(mel_to_hz(hz_to_mel(hz)) - hz) / hz);
  }
  o.require(mel_err < kMelRoundTripTolerance, "mel round trip");

  FeatureMap at_ref;
  at_ref.rows = at_ref.cols = 3;
  at_ref.values.assign(9, 0.37f);
  bool exact_zero = true;
  for (float v : power_to_db(at_ref, static_cast<double>(0.37f)).values) exact_zero = exact_zero && v == 0.0f;
  o.require(exact_zero, "power_to_db(ref) == 0");

  o.detail << "fft " << fmt(fft_err) << " parseval " << fmt(parseval_err) << " dct " << fmt(dct_err) << " mel "
           << fmt(mel_err);
}

void shapes(Outcome& o) {
  const std::vector<float> second(16000, 0.1f);
  const FeatureMap a = log_spectrogram(second, StftConfig{480, 320, 480, 16000});
  const FeatureMap b = log_spectrogram(second, StftConfig{256, 128, 256, 16000});
  o.require(a.rows == 241 && a.cols == 49, "241x49");
  o.require(b.rows == 129 && b.cols == 124, "129x124");

  nn::Model<float> vgg(nn::build_vgg1d(1));
  o.require(vgg.input_shape() == nn::Shape{1, 16384}, "VGG1D input 16384");
  std::optional<std::size_t> pre_flatten;
  for (std::size_t i = 0; i + 1 < vgg.size(); ++i) {
    if (vgg.layer(i + 1).name() == "flatten") pre_flatten = vgg.layer(i).output_shape().back();
  }
  o.require(pre_flatten == 16u, "pre-flatten length 16");
  o.detail << a.rows << "x" << a.cols << ", " << b.rows << "x" << b.cols << ", vgg1d " << vgg.input_shape()[1]
           << " -> " << pre_flatten.value_or(0);
}

void gradient_checks(Outcome& o) {
  double worst = 0;
  std::string worst_case;
  std::size_t checked = 0;
  for (const auto& c : testing::layer_cases()) {
    for (std::uint64_t seed = 1; seed <= kGradSeeds; ++seed) {
      Rng rng(seed * 7919);
      auto layer = c.make(rng);
      if (c.prepare) c.prepare(*layer, rng);
      const auto report = testing::check_layer(*layer, c.make_input(rng), seed, c.mode, c.step);
      ++checked;
      if (report.worst >= kGradTolerance) o.require(false, c.name + " seed " + std::to_string(seed));
      if (report.worst > worst) {
        worst = report.worst;
        worst_case = c.name;
      }
    }
  }
  o.detail << checked << " instances, worst " << fmt(worst) << " (" << worst_case << ")";
}

/// Synthetic corpus split into folds, via the command line front end.
Manifest make_corpus(const TempDir& dir, std::size_t per_class, std::uint64_t seed) {
  std::ostringstream out, err;
  const std::string corpus = (dir / "corpus").string(), manifest = (dir / "manifest.csv").string();
  const std::string s = std::to_string(seed);
  if (cli::run({"synth", "--out", corpus, "--n-per-class", std::to_string(per_class), "--seed", s}, out, err) != 0 ||
      cli::run({"split", "--corpus", corpus, "--out", manifest, "--seed", s}, out, err) != 0) {
    throw std::runtime_error(err.str());
  }
  return load_manifest(manifest);
}

void overfit(Outcome& o) {
  TempDir dir("acc_overfit");
  const Manifest m = make_corpus(dir, 4, 11);
  o.require(m.entries.size() == 48, "48 clips");
  FeatureConfig features;
  features.representation = Representation::wave;

  auto run = [&] {
    SampleSource source(m, features);
    nn::Model<float> model(nn::build_vgg1d(1), 5);
    TrainConfig cfg;
    cfg.epochs = kOverfitEpochs;
    cfg.seed = 5;
    cfg.augment = false;
    cfg.stop_at_train_accuracy = 1.0;
    const TrainResult r = train(model, source, -1, cfg);
    return std::pair{r, model.snapshot()};
  };
  const auto [first, weights] = run();
  const auto [second, weights_again] = run();
  const double acc = first.history.back().train_accuracy.value_or(0);
  o.require(acc == 1.0, "train accuracy 1.0");
  o.require(first.history.size() <= kOverfitEpochs, "epoch limit");
  bool same = first.history.size() == second.history.size() && weights == weights_again;
  for (std::size_t i = 0; same && i < first.history.size(); ++i) {
    same = first.history[i].train_loss == second.history[i].train_loss;
  }
  o.require(same, "deterministic per seed");
  o.detail << "train accuracy " << acc << " after " << first.history.size() << " epochs, repeat identical "
           << (same ? "yes" : "no");
}

struct EndToEnd {
  Manifest manifest;
  double vgg = 0, cnn = 0, ensemble = 0, agreement_vgg = 0, agreement_cnn = 0;
};

EndToEnd* g_end_to_end = nullptr;

void end_to_end(Outcome& o) {
  static TempDir dir("acc_e2e");
  static EndToEnd result;
  g_end_to_end = &result;
  result.manifest = make_corpus(dir, 40, 1);
  const std::string manifest = (dir / "manifest.csv").string();

  auto cli = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(std::move(args), out, err);
    if (code != 0) throw std::runtime_error(err.str());
    return out.str();
  };
  const std::vector<std::string> same_speed{"--set", "augment.speed_min=1", "--set", "augment.speed_max=1"};
  auto train_member = [&](const std::string& name, std::vector<std::string> extra) {
    std::vector<std::string> args{"train", "--manifest", manifest, "--out", (dir / name).string(), "--fold", "0"};
    args.insert(args.end(), same_speed.begin(), same_speed.end());
    args.insert(args.end(), extra.begin(), extra.end());
    cli(args);
    cli({"predict", "--model", (dir / name / "model.scnn").string(), "--manifest", manifest, "--out",
         (dir / (name + ".csv")).string(), "--fold", "0"});
  };
  train_member("vgg1d", {"--set", "model.arch=vgg1d", "--set", "features.representation=wave"});
  train_member("cnn2d", {"--set", "model.arch=cnn2d", "--set", "features.representation=logmel"});
  cli({"ensemble", "--inputs", (dir / "vgg1d.csv").string(), (dir / "cnn2d.csv").string(), "--out",
       (dir / "ensemble.csv").string()});
  const std::string report = cli({"eval", "--predictions", (dir / "ensemble.csv").string(), "--manifest", manifest,
                                  "--out", (dir / "report").string()});

  std::map<std::string, std::string> truth;
  for (const auto& e : result.manifest.entries) {
    if (e.fold == 0) truth[e.path] = std::string(class_name(e.label));
  }
  auto load = [&](const std::string& name) {
    std::map<std::string, std::string> labels;
    for (const auto& r : eval::predictions_from_csv(io::read_text(dir / (name + ".csv")))) labels[r.fname] = r.label;
    return labels;
  };
  const auto vgg = load("vgg1d"), cnn = load("cnn2d"), ens = load("ensemble");
  o.require(vgg.size() == truth.size() && cnn.size() == truth.size() && ens.size() == truth.size(),
            "held-out fold fully predicted");
  std::size_t hit_v = 0, hit_c = 0, hit_e = 0, agree_v = 0, agree_c = 0;
  for (const auto& [fname, label] : truth) {
    hit_v += vgg.at(fname) == label;
    hit_c += cnn.at(fname) == label;
    hit_e += ens.at(fname) == label;
    agree_v += ens.at(fname) == vgg.at(fname);
    agree_c += ens.at(fname) == cnn.at(fname);
  }
  const double n = static_cast<double>(truth.size());
  result.vgg = hit_v / n;
  result.cnn = hit_c / n;
  result.ensemble = hit_e / n;
  result.agreement_vgg = agree_v / n;
  result.agreement_cnn = agree_c / n;

  o.require(result.vgg >= kMemberAccuracy, "vgg1d accuracy");
  o.require(result.cnn >= kMemberAccuracy, "cnn2d accuracy");
  o.require(result.ensemble >= std::max(result.vgg, result.cnn) - kEnsembleSlack, "ensemble accuracy");
  o.require(result.agreement_vgg >= kAgreement && result.agreement_cnn >= kAgreement, "argmax agreement");
  std::ostringstream acc;
  acc << std::fixed << std::setprecision(6) << result.ensemble;
  o.require(report.find("accuracy " + acc.str()) != std::string::npos, "eval report matches");
  o.detail << "held-out " << truth.size() << ": vgg1d " << fmt(result.vgg) << " cnn2d " << fmt(result.cnn)
           << " ensemble " << fmt(result.ensemble) << ", agreement " << fmt(result.agreement_vgg) << "/"
           << fmt(result.agreement_cnn);
}

void protocol_invariants(Outcome& o) {
  Manifest m;
  if (g_end_to_end) {
    m = g_end_to_end->manifest;
  } else {
    TempDir dir("acc_protocol");
    m = make_corpus(dir, 40, 1);
  }

  std::map<std::string, std::set<int>> folds_of;
  for (const auto& e : m.entries) {
    if (e.label != ClassLabel::silence) folds_of[e.speaker_id].insert(e.fold);
  }
  bool disjoint = true;
  for (const auto& [speaker, folds] : folds_of) disjoint = disjoint && folds.size() == 1;
  o.require(disjoint, "speaker in two folds");

  bool balanced = true;
  BalancedBatches batches(m, 0, 24, Rng(9));
  for (std::size_t b = 0; b < kInvariantBatches; ++b) {
    std::array<std::size_t, kNumClasses> counts{};
    for (std::size_t i : batches.next()) {
      ++counts[index_of(m.entries[i].label)];
      balanced = balanced && m.entries[i].fold != 0;
    }
    for (std::size_t c : counts) balanced = balanced && c == 2;
  }
  o.require(balanced, "batch composition");

  std::vector<AudioClip> pool;
  for (const auto& src : m.noise_sources) pool.push_back(load_wav(src));
  bool reproducible = true;
  augment::AugmentConfig aug;
  for (std::size_t i = 0; i < 50; ++i) {
    const AudioClip clip = load_entry_audio(m.entries[i * 7 % m.entries.size()]);
    Rng a = Rng::stream(31, i), b = Rng::stream(31, i);
    const auto x = augment::augment_pipeline(clip, pool, aug, a);
    const auto y = augment::augment_pipeline(clip, pool, aug, b);
    reproducible = reproducible && x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * 4) == 0;
  }
  o.require(reproducible, "augmentation reproducibility");

  Rng rng(77);
  bool exact = true;
  for (std::size_t k = 0; k < kWavClips; ++k) {
    AudioClip c;
    c.sample_rate = 8000 + static_cast<std::uint32_t>(rng.uniform_index(40001));
    c.samples.resize(1 + rng.uniform_index(4000));
    for (auto& s : c.samples) {
      s = static_cast<float>(static_cast<std::int32_t>(rng.uniform_index(65536)) - 32768) / 32768.0f;
    }
    const io::Bytes bytes = write_wav(c);
    const AudioClip back = parse_wav(bytes);
    exact = exact && back.sample_rate == c.sample_rate && back.samples.size() == c.samples.size() &&
            std::memcmp(back.samples.data(), c.samples.data(), c.samples.size() * 4) == 0 && write_wav(back) == bytes;
  }
  o.require(exact, "WAV round trip");
  o.detail << folds_of.size() << " speakers, " << kInvariantBatches << " batches, 50 augmentations, " << kWavClips
           << " WAV clips";
}

void spot_values(Outcome& o) {
  const double mel0 = hz_to_mel(0.0), mel1000 = hz_to_mel(1000.0);
  const double endpoint = hamming_window(400)[0];
  const nn::Tensor<double> logits({4, 12}, std::vector<double>(48, -0.3));
  const double loss = nn::softmax_cross_entropy(logits, std::vector<std::size_t>{0, 3, 10, 11}).loss;
  o.require(mel0 == 0.0, "hz_to_mel(0)");
  o.require(std::abs(mel1000 - 1000.0) <= kMel1000Tolerance, "hz_to_mel(1000)");
  o.require(std::abs(endpoint - (2 * 0.53836 - 1)) <= kHammingTolerance, "Hamming endpoint");
  o.require(std::abs(loss - std::log(12.0)) <= kLossTolerance, "uniform loss");
  o.detail << "mel(1000) " << fmt(mel1000, 8) << " hamming[0] " << fmt(endpoint, 8) << " loss " << fmt(loss, 10);
}

}  // namespace
}  // namespace kws

int main() {
  using namespace kws;
  const std::vector<Criterion> criteria{
      {"dsp_oracles", kDspBudget, dsp_oracles},
      {"shape_conformance", kShapeBudget, shapes},
      {"gradient_checks", kGradBudget, gradient_checks},
      {"overfitting_oracle", kOverfitBudget, overfit},
      {"end_to_end", kEndToEndBudget, end_to_end},
      {"protocol_invariants", 0, protocol_invariants},
      {"spot_values", 0, spot_values},
  };
  std::size_t failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = Clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget_s > 0 && seconds >= c.budget_s) o.require(false, "runtime over " + fmt(c.budget_s) + " s");
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail.str() << " (" << std::fixed
              << std::setprecision(2) << seconds << " s)" << std::defaultfloat << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
