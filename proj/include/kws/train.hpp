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

// Mini-batch training over class-balanced batches with Adam, held-out fold
// evaluation and best-epoch selection.

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kws/augment.hpp"
#include "kws/dataset.hpp"
#include "kws/error.hpp"
#include "kws/eval.hpp"
#include "kws/features.hpp"
#include "kws/nn/loss.hpp"
#include "kws/nn/model.hpp"
#include "kws/nn/optim.hpp"
#include "kws/rng.hpp"

namespace kws {

/// Loads manifest audio once and serves network samples for entries.
class SampleSource {
 public:
  SampleSource(const Manifest& manifest, FeatureConfig features, ClipLoader loader = load_entry_audio,
               std::uint64_t seed = 0)
      : manifest_(manifest), features_(std::move(features)), loader_(std::move(loader)), seed_(seed),
        clips_(manifest.entries.size()), cached_(manifest.entries.size()) {
    for (const auto& src : manifest.noise_sources) noise_pool_.push_back(load_wav(src));
  }

  const Manifest& manifest() const { return manifest_; }
  const FeatureConfig& features() const { return features_; }
  std::span<const AudioClip> noise_pool() const { return noise_pool_; }

  const AudioClip& clip(std::size_t i) {
    if (!clips_[i]) clips_[i] = loader_(manifest_.entries.at(i));
    return *clips_[i];
  }

  /// Deterministic sample (fix_length with a per-entry stream), cached.
  const Features& eval_sample(std::size_t i) {
    if (!cached_[i]) {
      Rng rng = Rng::stream(seed_, i);
      cached_[i] = extract(clip(i), features_, rng);
    }
    return *cached_[i];
  }

  Features train_sample(std::size_t i, const augment::AugmentConfig& aug, bool augment_silence, Rng& rng) {
    const bool silence = manifest_.entries[i].label == ClassLabel::silence;
    if (silence && !augment_silence) return eval_sample(i);
    return extract_augmented(clip(i), noise_pool_, aug, features_, rng);
  }

 private:
  const Manifest& manifest_;
  FeatureConfig features_;
  ClipLoader loader_;
  std::uint64_t seed_;
  std::vector<AudioClip> noise_pool_;
  std::vector<std::optional<AudioClip>> clips_;
  std::vector<std::optional<Features>> cached_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> train_accuracy;
  std::optional<double> heldout_accuracy;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 24;
  std::size_t steps_per_epoch = 0;  // 0: ceil(training entries / batch_size)
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
  bool augment = true;
  augment::AugmentConfig augment_config;
  bool augment_silence = false;
  bool track_train_accuracy = false;
  double stop_at_train_accuracy = 0.0;  // > 0 ends training once reached
  bool keep_best = true;                // restore the best held-out epoch
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  std::optional<double> best_heldout_accuracy;
};

/// Accuracy of eval-mode predictions over the given entries.
inline double evaluate_accuracy(nn::Model<float>& model, SampleSource& source, std::span<const std::size_t> entries,
                                std::size_t chunk = 32) {
  if (entries.empty()) return 0.0;
  std::vector<eval::LabelPair> pairs;
  for (std::size_t start = 0; start < entries.size(); start += chunk) {
    std::vector<Features> batch;
    const std::size_t end = std::min(entries.size(), start + chunk);
    for (std::size_t j = start; j < end; ++j) batch.push_back(source.eval_sample(entries[j]));
    const auto preds = eval::predict_batch(model, batch);
    for (std::size_t j = start; j < end; ++j) {
      pairs.emplace_back(index_of(source.manifest().entries[entries[j]].label), preds[j - start].argmax);
    }
  }
  return eval::accuracy(pairs);
}

inline TrainResult train(nn::Model<float>& model, SampleSource& source, int fold_out, const TrainConfig& cfg) {
  const Manifest& m = source.manifest();
  std::vector<std::size_t> train_idx, heldout_idx;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    (fold_out >= 0 && m.entries[i].fold == fold_out ? heldout_idx : train_idx).push_back(i);
  }
  BalancedBatches batches(m, fold_out, cfg.batch_size, Rng::stream(cfg.seed, 1));
  const std::size_t steps =
      cfg.steps_per_epoch ? cfg.steps_per_epoch : (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;

  Rng dropout_rng = Rng::stream(cfg.seed, 2);
  nn::Adam<float> adam(model.parameters(), cfg.adam);
  const nn::Context ctx{nn::Mode::train, &dropout_rng};
  const std::size_t per_sample = nn::shape_size(model.input_shape());
  nn::Shape batch_shape{cfg.batch_size};
  batch_shape.insert(batch_shape.end(), model.input_shape().begin(), model.input_shape().end());

  TrainResult result;
  std::optional<std::vector<std::vector<float>>> best_state;
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s, ++global_step) {
      const BalancedBatches::Batch batch = batches.next();
      nn::Tensor<float> x(batch_shape);
      std::vector<std::size_t> targets;
      for (std::size_t j = 0; j < batch.size(); ++j) {
        const std::size_t entry = batch[j];
        Rng item_rng = Rng::stream(cfg.seed ^ 0x5eedULL, global_step * cfg.batch_size + j);
        const Features f = cfg.augment ? source.train_sample(entry, cfg.augment_config, cfg.augment_silence, item_rng)
                                       : source.eval_sample(entry);
        if (f.values.size() != per_sample) {
          throw Error(ErrorCode::ShapeMismatch, "features " + nn::shape_str(f.shape) + " for model input " +
                                                    nn::shape_str(model.input_shape()));
        }
        std::copy(f.values.begin(), f.values.end(), x.data.begin() + static_cast<std::ptrdiff_t>(j * per_sample));
        targets.push_back(index_of(m.entries[entry].label));
      }
      adam.zero_grad();
      const nn::Tensor<float> logits = model.forward(x, ctx);
      const nn::LossResult<float> loss = nn::softmax_cross_entropy(logits, targets);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorCode::DivergedLoss, "non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                                 std::to_string(s));
      }
      model.backward(loss.grad);
      adam.step();
      loss_sum += loss.loss;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(steps);
    if (cfg.track_train_accuracy || cfg.stop_at_train_accuracy > 0.0) {
      em.train_accuracy = evaluate_accuracy(model, source, train_idx);
    }
    if (!heldout_idx.empty()) em.heldout_accuracy = evaluate_accuracy(model, source, heldout_idx);
    result.history.push_back(em);
    if (cfg.on_epoch) cfg.on_epoch(em);

    if (em.heldout_accuracy && (!result.best_heldout_accuracy || *em.heldout_accuracy > *result.best_heldout_accuracy)) {
      result.best_heldout_accuracy = em.heldout_accuracy;
      result.best_epoch = epoch;
      if (cfg.keep_best) best_state = model.snapshot();
    }
    if (cfg.stop_at_train_accuracy > 0.0 && em.train_accuracy && *em.train_accuracy >= cfg.stop_at_train_accuracy) {
      break;
    }
  }
  if (!result.best_heldout_accuracy) result.best_epoch = result.history.empty() ? 0 : result.history.back().epoch;
  if (best_state) model.restore(*best_state);
  return result;
}

}  // namespace kws
