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

// Toolkit configuration: flat `key = value` text with `[section]` headers.
// Keys are addressed as `section.key`; later assignments win, which gives the
// defaults < file < flags precedence when applied in that order.

#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kws/augment.hpp"
#include "kws/dsp.hpp"
#include "kws/error.hpp"
#include "kws/features.hpp"
#include "kws/io.hpp"
#include "kws/nn/model.hpp"
#include "kws/nn/optim.hpp"
#include "kws/train.hpp"

namespace kws {

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidConfig, key + ": cannot parse '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::InvalidConfig, key + ": expected a boolean, got '" + v + "'");
}

template <class N>
std::string format_number(N v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace config_detail

struct ToolkitConfig {
  // general
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  // stft + features
  FeatureConfig features;
  // augment
  augment::AugmentConfig augment;
  bool augment_silence = false;
  // model
  std::string arch = "vgg1d";  // vgg1d | resnet1d | cnn2d
  std::size_t width = 1;
  std::string depth = "desk";  // resnet1d preset: desk | full
  // train
  std::size_t epochs = 30;
  std::size_t batch_size = 24;
  std::size_t steps_per_epoch = 0;
  nn::AdamConfig adam;
  bool train_augment = true;
  bool keep_best = true;
  double stop_at_train_accuracy = 0.0;
  // dataset
  std::size_t folds = 4;
  float silence_threshold = 0.01F;
  std::size_t silence_cap = 0;  // 0: median class count
  // eval
  double unknown_tau = 0.0;
  std::size_t eval_batch = 32;

  /// Sets one `section.key`. Unknown keys and unparseable values throw InvalidConfig.
  void apply(const std::string& key, const std::string& raw) {
    using namespace config_detail;
    const std::string v = trim(raw);
    auto size = [&] { return parse_number<std::size_t>(key, v); };
    auto real = [&] { return parse_number<double>(key, v); };
    if (key == "general.seed") seed = parse_number<std::uint64_t>(key, v);
    else if (key == "general.jobs") jobs = size();
    else if (key == "stft.win_length") features.stft.win_length = size();
    else if (key == "stft.hop_length") features.stft.hop_length = size();
    else if (key == "stft.fft_size") features.stft.fft_size = size();
    else if (key == "stft.sample_rate") features.stft.sample_rate = parse_number<std::uint32_t>(key, v);
    else if (key == "features.representation") features.representation = parse_representation(v);
    else if (key == "features.n_mels") features.n_mels = size();
    else if (key == "features.n_coeffs") features.n_coeffs = size();
    else if (key == "features.fmin") features.fmin = real();
    else if (key == "features.fmax") features.fmax = (v == "none" || v.empty()) ? std::nullopt : std::optional(real());
    else if (key == "features.db_ref") features.db_ref = real();
    else if (key == "features.wave_length") features.wave_length = size();
    else if (key == "features.clip_length") features.clip_length = size();
    else if (key == "augment.speed_min") augment.speed_min = real();
    else if (key == "augment.speed_max") augment.speed_max = real();
    else if (key == "augment.shift_max_s") augment.shift_max_s = real();
    else if (key == "augment.noise_max") augment.noise_max = real();
    else if (key == "augment.target_length") augment.target_length = size();
    else if (key == "augment.seed") augment.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "augment.silence") augment_silence = parse_bool(key, v);
    else if (key == "model.arch") arch = v;
    else if (key == "model.width") width = size();
    else if (key == "model.depth") depth = v;
    else if (key == "train.epochs") epochs = size();
    else if (key == "train.batch_size") batch_size = size();
    else if (key == "train.steps_per_epoch") steps_per_epoch = size();
    else if (key == "train.lr") adam.lr = real();
    else if (key == "train.beta1") adam.beta1 = real();
    else if (key == "train.beta2") adam.beta2 = real();
    else if (key == "train.eps") adam.eps = real();
    else if (key == "train.augment") train_augment = parse_bool(key, v);
    else if (key == "train.keep_best") keep_best = parse_bool(key, v);
    else if (key == "train.stop_at_train_accuracy") stop_at_train_accuracy = real();
    else if (key == "dataset.folds") folds = size();
    else if (key == "dataset.silence_threshold") silence_threshold = parse_number<float>(key, v);
    else if (key == "dataset.silence_cap") silence_cap = size();
    else if (key == "eval.unknown_tau") unknown_tau = real();
    else if (key == "eval.batch_size") eval_batch = size();
    else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  }

  /// Applies `section.key=value`.
  void apply_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "expected key=value, got '" + assignment + "'");
    apply(config_detail::trim(std::string_view(assignment).substr(0, eq)), assignment.substr(eq + 1));
  }

  void apply_text(std::string_view text) {
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      const std::string t = config_detail::trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') {
          throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": unterminated section header");
        }
        section = config_detail::trim(std::string_view(t).substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos || section.empty()) {
        throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value in a section");
      }
      apply(section + "." + config_detail::trim(std::string_view(t).substr(0, eq)), t.substr(eq + 1));
    }
  }

  void validate() const {
    features.stft.validate();
    augment.validate();
    if (jobs == 0) throw Error(ErrorCode::InvalidConfig, "general.jobs must be >= 1");
    if (features.n_mels == 0 || features.n_coeffs == 0 || features.n_coeffs > features.n_mels) {
      throw Error(ErrorCode::InvalidConfig, "features need 0 < n_coeffs <= n_mels");
    }
    if (arch != "vgg1d" && arch != "resnet1d" && arch != "cnn2d") {
      throw Error(ErrorCode::InvalidConfig, "model.arch must be vgg1d, resnet1d or cnn2d");
    }
    if (depth != "desk" && depth != "full") throw Error(ErrorCode::InvalidConfig, "model.depth must be desk or full");
    if (width == 0) throw Error(ErrorCode::InvalidConfig, "model.width must be >= 1");
    if (batch_size == 0 || batch_size % kNumClasses != 0) {
      throw Error(ErrorCode::InvalidConfig, "train.batch_size must be a positive multiple of 12");
    }
    if (folds < 2) throw Error(ErrorCode::InvalidConfig, "dataset.folds must be >= 2");
    if (!(silence_threshold >= 0.0F)) throw Error(ErrorCode::InvalidConfig, "dataset.silence_threshold must be >= 0");
    if (unknown_tau < 0.0 || unknown_tau > 1.0) throw Error(ErrorCode::InvalidConfig, "eval.unknown_tau must be in [0, 1]");
    if (eval_batch == 0) throw Error(ErrorCode::InvalidConfig, "eval.batch_size must be >= 1");
  }

  std::string to_text() const {
    using config_detail::format_number;
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    std::ostringstream o;
    o << "[general]\nseed = " << seed << "\njobs = " << jobs << "\n\n";
    o << "[stft]\nwin_length = " << features.stft.win_length << "\nhop_length = " << features.stft.hop_length
      << "\nfft_size = " << features.stft.fft_size << "\nsample_rate = " << features.stft.sample_rate << "\n\n";
    o << "[features]\nrepresentation = " << representation_name(features.representation)
      << "\nn_mels = " << features.n_mels << "\nn_coeffs = " << features.n_coeffs
      << "\nfmin = " << format_number(features.fmin)
      << "\nfmax = " << (features.fmax ? format_number(*features.fmax) : std::string("none"))
      << "\ndb_ref = " << format_number(features.db_ref) << "\nwave_length = " << features.wave_length
      << "\nclip_length = " << features.clip_length << "\n\n";
    o << "[augment]\nspeed_min = " << format_number(augment.speed_min)
      << "\nspeed_max = " << format_number(augment.speed_max)
      << "\nshift_max_s = " << format_number(augment.shift_max_s)
      << "\nnoise_max = " << format_number(augment.noise_max) << "\ntarget_length = " << augment.target_length
      << "\nseed = " << augment.seed << "\nsilence = " << b(augment_silence) << "\n\n";
    o << "[model]\narch = " << arch << "\nwidth = " << width << "\ndepth = " << depth << "\n\n";
    o << "[train]\nepochs = " << epochs << "\nbatch_size = " << batch_size << "\nsteps_per_epoch = " << steps_per_epoch
      << "\nlr = " << format_number(adam.lr) << "\nbeta1 = " << format_number(adam.beta1)
      << "\nbeta2 = " << format_number(adam.beta2) << "\neps = " << format_number(adam.eps)
      << "\naugment = " << b(train_augment) << "\nkeep_best = " << b(keep_best)
      << "\nstop_at_train_accuracy = " << format_number(stop_at_train_accuracy) << "\n\n";
    o << "[dataset]\nfolds = " << folds << "\nsilence_threshold = " << format_number(silence_threshold)
      << "\nsilence_cap = " << silence_cap << "\n\n";
    o << "[eval]\nunknown_tau = " << format_number(unknown_tau) << "\nbatch_size = " << eval_batch << "\n";
    return o.str();
  }

  /// Network architecture for the configured representation.
  nn::ModelSpec model_spec() const {
    const nn::Shape in = feature_shape(features);
    if (arch == "cnn2d") {
      if (in.size() != 3) throw Error(ErrorCode::InvalidConfig, "cnn2d needs a spectral representation");
      nn::ModelSpec s = nn::build_cnn2d(in[1], in[2], representation_name(features.representation));
      return s;
    }
    if (features.representation != Representation::wave) {
      throw Error(ErrorCode::InvalidConfig, arch + " needs features.representation = wave");
    }
    if (arch == "vgg1d") return nn::build_vgg1d(width, features.wave_length);
    if (arch == "resnet1d") {
      return nn::build_resnet1d(depth == "desk" ? nn::ResnetDepth::desk() : nn::ResnetDepth{}, features.wave_length);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown model.arch '" + arch + "'");
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.steps_per_epoch = steps_per_epoch;
    t.adam = adam;
    t.seed = seed;
    t.augment = train_augment;
    t.augment_config = augment;
    t.augment_silence = augment_silence;
    t.keep_best = keep_best;
    t.stop_at_train_accuracy = stop_at_train_accuracy;
    return t;
  }
};

inline ToolkitConfig load_config(const std::filesystem::path& path) {
  ToolkitConfig c;
  c.apply_text(io::read_text(path));
  return c;
}

}  // namespace kws
