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

// Command-line front end. `run` parses arguments, executes one subcommand and
// returns the process exit code; failures print a single `error: Code: message`
// line to the error stream.

#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "kws/config.hpp"
#include "kws/csv.hpp"
#include "kws/dataset.hpp"
#include "kws/eval.hpp"
#include "kws/features.hpp"
#include "kws/io.hpp"
#include "kws/nn/checkpoint.hpp"
#include "kws/parallel.hpp"
#include "kws/scft.hpp"
#include "kws/synth.hpp"
#include "kws/train.hpp"
#include "kws/wav_io.hpp"

namespace kws::cli {

namespace fs = std::filesystem;

inline constexpr std::string_view kEffectiveConfig = "effective_config";

// ---------------------------------------------------------------------------
// Plot export

/// 256-entry ramp interpolated between five anchors of the viridis map.
inline const std::array<std::array<std::uint8_t, 3>, 256>& color_ramp() {
  static const auto ramp = [] {
    constexpr std::array<std::array<double, 3>, 5> anchors = {{
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    std::array<std::array<std::uint8_t, 3>, 256> r{};
    for (std::size_t i = 0; i < 256; ++i) {
      const double pos = static_cast<double>(i) / 255.0 * 4.0;
      const std::size_t lo = std::min<std::size_t>(3, static_cast<std::size_t>(pos));
      const double f = pos - static_cast<double>(lo);
      for (std::size_t c = 0; c < 3; ++c) {
        r[i][c] = static_cast<std::uint8_t>(std::lround(anchors[lo][c] + f * (anchors[lo + 1][c] - anchors[lo][c])));
      }
    }
    return r;
  }();
  return ramp;
}

/// Binary P6 image of a rows x cols grid, min-max scaled, row 0 at the bottom.
inline io::Bytes render_ppm(std::size_t rows, std::size_t cols, std::span<const float> values) {
  if (rows * cols != values.size() || values.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "plot needs rows*cols values");
  }
  float lo = values[0], hi = values[0];
  for (float v : values) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const std::string header = "P6\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  io::Bytes out(header.begin(), header.end());
  const auto& ramp = color_ramp();
  for (std::size_t y = 0; y < rows; ++y) {
    const std::size_t r = rows - 1 - y;
    for (std::size_t x = 0; x < cols; ++x) {
      const float v = values[r * cols + x];
      const double t = hi > lo && std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      const auto& c = ramp[static_cast<std::size_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0))];
      out.insert(out.end(), c.begin(), c.end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Helpers

/// `<parent folder>/<stem>[_frag<n>].scft` for an entry; unique per corpus.
inline fs::path feature_file_name(const ManifestEntry& e) {
  const auto [file, fragment] = split_fragment_ref(e.path);
  const fs::path p(file);
  std::string stem = p.stem().string();
  if (fragment) stem += "_frag" + std::to_string(*fragment);
  return p.parent_path().filename() / (stem + ".scft");
}

inline void write_effective_config(const fs::path& dir, const ToolkitConfig& cfg) {
  io::write_text(dir / kEffectiveConfig, cfg.to_text());
}

inline fs::path parent_or_cwd(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

inline std::vector<std::size_t> select_entries(const Manifest& m, int fold) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    if (fold < 0 || m.entries[i].fold == fold) idx.push_back(i);
  }
  return idx;
}

inline std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

inline std::map<std::string, eval::PredictionRow> index_predictions(const std::vector<eval::PredictionRow>& rows,
                                                                    const std::string& source) {
  std::map<std::string, eval::PredictionRow> out;
  for (const auto& r : rows) {
    if (!out.emplace(r.fname, r).second) {
      throw Error(ErrorCode::ParseError, source + ": duplicate fname '" + r.fname + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_inspect(const fs::path& target, const ToolkitConfig& cfg, std::ostream& out) {
  std::error_code ec;
  if (fs::is_directory(target, ec)) {
    const ScanResult scan = scan_corpus(target, cfg.features.stft.sample_rate);
    std::array<std::size_t, kNumClasses> counts{};
    std::set<std::string> speakers;
    for (const auto& e : scan.manifest.entries) {
      ++counts[index_of(e.label)];
      if (!e.speaker_id.empty()) speakers.insert(e.speaker_id);
    }
    out << "entries " << scan.manifest.entries.size() << "\nnoise_sources " << scan.manifest.noise_sources.size()
        << "\nspeakers " << speakers.size() << "\nissues " << scan.issues.size() << '\n';
    for (std::size_t c = 0; c < kNumClasses; ++c) out << "class " << kClassNames[c] << ' ' << counts[c] << '\n';
    for (const auto& i : scan.issues) out << "issue " << i.path << ": " << i.message << '\n';
    return;
  }
  const std::string ext = target.extension().string();
  if (ext == ".wav") {
    const AudioClip clip = load_wav(target);
    out << "sample_rate " << clip.sample_rate << "\nsamples " << clip.samples.size() << "\nduration_s "
        << fmt(static_cast<double>(clip.samples.size()) / clip.sample_rate, 3) << "\npeak "
        << (clip.samples.empty() ? 0.0F : peak_volume(clip)) << '\n';
  } else if (ext == ".scft") {
    const ScftTensor t = load_scft(target);
    out << "kind " << kind_name(t.kind) << "\ndims ";
    for (std::size_t i = 0; i < t.dims.size(); ++i) out << (i ? "x" : "") << t.dims[i];
    out << '\n';
  } else if (ext == ".scnn") {
    nn::Model<float> model = nn::load_checkpoint(target);
    out << model.spec().to_text() << "parameters " << model.parameter_count() << '\n';
  } else if (ext == ".csv") {
    const Manifest m = load_manifest(target);
    std::map<int, std::array<std::size_t, kNumClasses>> by_fold;
    for (const auto& e : m.entries) ++by_fold[e.fold][index_of(e.label)];
    out << "entries " << m.entries.size() << "\nfolds " << m.n_folds << '\n';
    for (const auto& [fold, counts] : by_fold) {
      out << "fold " << fold;
      for (std::size_t c : counts) out << ' ' << c;
      out << '\n';
    }
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "cannot inspect " + target.string());
  }
}

inline Manifest manifest_from(const std::string& corpus, const std::string& manifest, const ToolkitConfig& cfg,
                              std::ostream& err) {
  if (corpus.empty() == manifest.empty()) {
    throw Error(ErrorCode::InvalidConfig, "give exactly one of --corpus or --manifest");
  }
  if (!manifest.empty()) return load_manifest(manifest);
  ScanResult scan = scan_corpus(corpus, cfg.features.stft.sample_rate);
  for (const auto& i : scan.issues) err << "warning: skipped " << i.path << ": " << i.message << '\n';
  return std::move(scan.manifest);
}

inline void cmd_clean(Manifest m, const fs::path& out_path, const std::string& report, const ToolkitConfig& cfg,
                      std::ostream& out) {
  const CleanResult r = clean_low_volume(m, cfg.silence_threshold);
  apply_relabel(m, r.relabel);
  save_manifest(out_path, m);
  if (!report.empty()) {
    std::string text = csv::format_row({"path", "peak", "relabel"});
    for (const auto& row : r.report) {
      text += csv::format_row({row.path, eval::format_prob(row.peak), row.proposed ? "1" : "0"});
    }
    io::write_text(report, text);
  }
  write_effective_config(parent_or_cwd(out_path), cfg);
  out << "relabeled " << r.relabel.size() << " of " << m.entries.size() << " entries as silence\n";
}

inline void cmd_split(Manifest m, const fs::path& out_path, const ToolkitConfig& cfg, std::ostream& out) {
  const bool has_silence = std::any_of(m.entries.begin(), m.entries.end(),
                                       [](const auto& e) { return e.label == ClassLabel::silence; });
  if (!has_silence && !m.noise_sources.empty()) {
    const std::size_t cap = cfg.silence_cap ? cfg.silence_cap : median_class_count(m);
    const std::size_t added = add_silence_fragments(m, cap, cfg.features.stft.sample_rate);
    out << "silence_fragments " << added << '\n';
  }
  m = assign_folds(std::move(m), cfg.folds, cfg.seed);
  save_manifest(out_path, m);
  write_effective_config(parent_or_cwd(out_path), cfg);
  std::vector<std::size_t> per_fold(cfg.folds);
  for (const auto& e : m.entries) ++per_fold[static_cast<std::size_t>(e.fold)];
  for (std::size_t f = 0; f < cfg.folds; ++f) out << "fold " << f << ' ' << per_fold[f] << '\n';
}

inline void cmd_featurize(const Manifest& m, const fs::path& out_dir, bool plot, int fold, const ToolkitConfig& cfg,
                          std::ostream& out) {
  const std::vector<std::size_t> idx = select_entries(m, fold);
  std::set<fs::path> names;
  for (std::size_t i : idx) {
    if (!names.insert(feature_file_name(m.entries[i])).second) {
      throw Error(ErrorCode::InvalidConfig, "two entries map to " + feature_file_name(m.entries[i]).string());
    }
  }
  parallel_for(idx.size(), cfg.jobs, [&](std::size_t j) {
    const std::size_t i = idx[j];
    Rng rng = Rng::stream(cfg.seed, i);
    const Features f = extract(load_entry_audio(m.entries[i]), cfg.features, rng);
    ScftTensor t;
    t.kind = f.kind;
    for (std::size_t d = 1; d < f.shape.size(); ++d) t.dims.push_back(static_cast<std::uint32_t>(f.shape[d]));
    t.data = f.values;
    const fs::path dst = out_dir / feature_file_name(m.entries[i]);
    save_scft(dst, t);
    if (plot && t.dims.size() == 2) {
      fs::path img = dst;
      img.replace_extension(".ppm");
      io::write_file(img, render_ppm(t.dims[0], t.dims[1], t.data));
    }
  });
  write_effective_config(out_dir, cfg);
  out << "featurized " << idx.size() << " entries as " << representation_name(cfg.features.representation) << '\n';
}

inline void cmd_augment_preview(const fs::path& input, const std::vector<std::string>& noise, const fs::path& out_dir,
                                std::size_t count, const ToolkitConfig& cfg, std::ostream& out) {
  const AudioClip clip = load_wav(input);
  std::vector<AudioClip> pool;
  for (const auto& n : noise) pool.push_back(load_wav(n));
  augment::AugmentConfig aug = cfg.augment;
  if (pool.empty()) aug.noise_max = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng = Rng::stream(aug.seed, k);
    AudioClip preview;
    preview.sample_rate = clip.sample_rate;
    preview.samples = augment::augment_pipeline(clip, pool, aug, rng);
    save_wav(out_dir / ("preview_" + std::to_string(k) + ".wav"), preview);
  }
  write_effective_config(out_dir, cfg);
  out << "wrote " << count << " previews\n";
}

/// Trains one model; returns the best held-out accuracy when a fold is held out.
inline std::optional<double> cmd_train(const Manifest& m, const fs::path& out_dir, int fold, const ToolkitConfig& cfg,
                                       std::ostream& out) {
  if (fold >= 0 && static_cast<std::size_t>(fold) >= std::max<std::size_t>(m.n_folds, 1)) {
    throw Error(ErrorCode::InvalidConfig, "fold " + std::to_string(fold) + " not in manifest");
  }
  nn::Model<float> model(cfg.model_spec(), cfg.seed);
  SampleSource source(m, cfg.features, load_entry_audio, cfg.seed);
  TrainConfig tc = cfg.train_config();
  std::string history = "epoch,train_loss,train_accuracy,heldout_accuracy\n";
  tc.on_epoch = [&](const EpochMetrics& e) {
    history += std::to_string(e.epoch) + "," + fmt(e.train_loss, 6) + "," +
               (e.train_accuracy ? fmt(*e.train_accuracy) : "") + "," +
               (e.heldout_accuracy ? fmt(*e.heldout_accuracy) : "") + "\n";
    out << "epoch " << e.epoch << " loss " << fmt(e.train_loss);
    if (e.train_accuracy) out << " train_acc " << fmt(*e.train_accuracy);
    if (e.heldout_accuracy) out << " heldout_acc " << fmt(*e.heldout_accuracy);
    out << std::endl;
  };
  const TrainResult r = train(model, source, fold, tc);
  nn::save_checkpoint(out_dir / "model.scnn", model);
  io::write_text(out_dir / "history.csv", history);
  write_effective_config(out_dir, cfg);
  out << "best_epoch " << r.best_epoch;
  if (r.best_heldout_accuracy) out << " heldout_accuracy " << fmt(*r.best_heldout_accuracy);
  out << '\n';
  return r.best_heldout_accuracy;
}

inline void cmd_predict(const fs::path& model_path, const Manifest& m, const fs::path& out_path, int fold,
                        bool with_probs, const ToolkitConfig& cfg, std::ostream& out) {
  nn::Model<float> model = nn::load_checkpoint(model_path);
  // Features follow the training run's configuration when it sits next to the checkpoint.
  FeatureConfig features = cfg.features;
  const fs::path trained = parent_or_cwd(model_path) / kEffectiveConfig;
  if (fs::exists(trained)) features = load_config(trained).features;
  if (representation_name(features.representation) != model.spec().representation) {
    throw Error(ErrorCode::ShapeMismatch, "model expects " + model.spec().representation + " features, config gives " +
                                              representation_name(features.representation));
  }
  const std::vector<std::size_t> idx = select_entries(m, fold);
  std::vector<Features> feats(idx.size());
  parallel_for(idx.size(), cfg.jobs, [&](std::size_t j) {
    Rng rng = Rng::stream(cfg.seed, idx[j]);
    feats[j] = extract(load_entry_audio(m.entries[idx[j]]), features, rng);
  });

  const std::size_t chunks = (idx.size() + cfg.eval_batch - 1) / cfg.eval_batch;
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.jobs, chunks));
  std::vector<nn::Model<float>> models;
  for (std::size_t w = 0; w < workers; ++w) models.push_back(model.clone());
  std::vector<eval::Prediction> preds(idx.size());
  const std::string source = model_path.generic_string();
  parallel_for(workers, workers, [&](std::size_t w) {
    for (std::size_t c = w; c < chunks; c += workers) {
      const std::size_t lo = c * cfg.eval_batch, hi = std::min(idx.size(), lo + cfg.eval_batch);
      const auto batch = eval::predict_batch(models[w], std::span(feats).subspan(lo, hi - lo), source);
      std::copy(batch.begin(), batch.end(), preds.begin() + static_cast<std::ptrdiff_t>(lo));
    }
  });

  std::vector<eval::PredictionRow> rows;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const std::size_t label = eval::apply_unknown_threshold(preds[j], cfg.unknown_tau);
    rows.push_back({m.entries[idx[j]].path, std::string(kClassNames[label]),
                    with_probs ? std::optional(preds[j].probs) : std::nullopt});
  }
  io::write_text(out_path, eval::predictions_to_csv(rows));
  write_effective_config(parent_or_cwd(out_path), cfg);
  out << "predicted " << rows.size() << " entries\n";
}

inline void cmd_ensemble(const std::vector<std::string>& inputs, const fs::path& out_path, bool vote,
                         const ToolkitConfig& cfg, std::ostream& out) {
  if (inputs.empty()) throw Error(ErrorCode::EmptyEnsemble, "no prediction files given");
  std::vector<std::vector<eval::PredictionRow>> files;
  std::vector<std::map<std::string, eval::PredictionRow>> indexed;
  for (const auto& in : inputs) {
    files.push_back(eval::predictions_from_csv(io::read_text(in)));
    indexed.push_back(index_predictions(files.back(), in));
    for (const auto& r : files.back()) {
      if (!r.probs) throw Error(ErrorCode::ParseError, in + ": ensemble needs probability columns");
    }
  }
  for (std::size_t k = 1; k < indexed.size(); ++k) {
    const bool same = indexed[k].size() == indexed[0].size() &&
                      std::equal(indexed[k].begin(), indexed[k].end(), indexed[0].begin(),
                                 [](const auto& a, const auto& b) { return a.first == b.first; });
    if (!same) {
      throw Error(ErrorCode::MismatchedPredictionFiles, inputs[k] + " and " + inputs[0] + " cover different files");
    }
  }
  std::vector<eval::PredictionRow> rows;
  for (const auto& r : files[0]) {
    std::vector<eval::Prediction> members;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      members.push_back(eval::Prediction::from_probs(*indexed[k].at(r.fname).probs, inputs[k]));
    }
    const eval::Prediction mean = eval::ensemble_mean(members);
    const std::size_t label = vote ? eval::majority_vote(members) : eval::apply_unknown_threshold(mean, cfg.unknown_tau);
    rows.push_back({r.fname, std::string(kClassNames[label]), mean.probs});
  }
  io::write_text(out_path, eval::predictions_to_csv(rows));
  write_effective_config(parent_or_cwd(out_path), cfg);
  out << "ensembled " << inputs.size() << " files over " << rows.size() << " entries\n";
}

/// Scores a predictions file against manifest labels; returns the accuracy.
inline double cmd_eval(const fs::path& predictions, const Manifest& m, const std::string& out_dir,
                       const ToolkitConfig& cfg, std::ostream& out) {
  std::map<std::string, ClassLabel> truth;
  for (const auto& e : m.entries) truth[e.path] = e.label;
  std::vector<eval::LabelPair> pairs;
  for (const auto& r : eval::predictions_from_csv(io::read_text(predictions))) {
    const auto t = truth.find(r.fname);
    if (t == truth.end()) throw Error(ErrorCode::ParseError, "no manifest entry for '" + r.fname + "'");
    const auto p = parse_class_name(r.label);
    if (!p) throw Error(ErrorCode::ParseError, "unknown label '" + r.label + "' for " + r.fname);
    pairs.emplace_back(index_of(t->second), index_of(*p));
  }
  const eval::Confusion cm = eval::confusion_matrix(pairs);
  const std::string report = eval::format_report(cm);
  out << report;
  if (!out_dir.empty()) {
    io::write_text(fs::path(out_dir) / "report.txt", report);
    io::write_text(fs::path(out_dir) / "confusion.csv", eval::confusion_to_csv(cm));
    write_effective_config(out_dir, cfg);
  }
  return eval::accuracy(pairs);
}

// ---------------------------------------------------------------------------
// Entry point

/// `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keyword spotting toolkit: corpus preparation, features, training and evaluation"};
  app.name("kws");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::vector<std::string> sets;
  auto* seed_opt = app.add_option("--seed", seed, "Global seed (general.seed)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads for featurize and predict");
  app.add_option("--config", config_path, "Config file (`[section]` + `key = value`)");
  app.add_option("--set", sets, "Override one key, e.g. --set train.epochs=5")->expected(1)->take_all();

  std::string path_a, path_b, path_c, report;
  std::vector<std::string> inputs;
  int fold = -1;
  bool flag = false;
  std::size_t count = 4;
  std::string representation;
  std::optional<float> threshold;
  std::size_t n_per_class = 40, speakers = 10, noise_files = 4;
  std::size_t folds = 0;

  auto* inspect = app.add_subcommand("inspect", "Summarize a corpus directory, wav, scft, scnn or manifest");
  inspect->add_option("path", path_a)->required();

  auto* clean = app.add_subcommand("clean", "Relabel near-silent clips as silence");
  clean->add_option("--corpus", path_a);
  clean->add_option("--manifest", path_b);
  clean->add_option("--out", path_c, "Output manifest")->required();
  clean->add_option("--report", report, "Per-clip peak volume CSV");
  clean->add_option("--threshold", threshold, "Peak volume threshold (dataset.silence_threshold)");

  auto* split = app.add_subcommand("split", "Add silence fragments and assign speaker-disjoint folds");
  split->add_option("--corpus", path_a);
  split->add_option("--manifest", path_b);
  split->add_option("--out", path_c, "Output manifest")->required();
  split->add_option("--folds", folds, "Number of folds (dataset.folds)");

  auto* featurize = app.add_subcommand("featurize", "Write one SCFT tensor per manifest entry");
  featurize->add_option("--manifest", path_a)->required();
  featurize->add_option("--out", path_b, "Output directory")->required();
  featurize->add_option("--representation", representation, "wave|logspec|db|mel|logmel|mfcc");
  featurize->add_option("--fold", fold, "Only this fold");
  featurize->add_flag("--plot", flag, "Also write a PPM image per 2D feature map");

  auto* preview = app.add_subcommand("augment-preview", "Write augmented variants of one clip");
  preview->add_option("--input", path_a)->required();
  preview->add_option("--out", path_b, "Output directory")->required();
  preview->add_option("--noise", inputs, "Background noise wavs");
  preview->add_option("--count", count, "Number of variants");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic tone corpus");
  synth->add_option("--out", path_a, "Corpus directory")->required();
  synth->add_option("--n-per-class", n_per_class);
  synth->add_option("--speakers", speakers);
  synth->add_option("--noise-files", noise_files);

  auto* train_cmd = app.add_subcommand("train", "Train one model, holding out a fold");
  train_cmd->add_option("--manifest", path_a)->required();
  train_cmd->add_option("--out", path_b, "Output directory")->required();
  train_cmd->add_option("--fold", fold, "Held-out fold (-1: none)");

  auto* predict_cmd = app.add_subcommand("predict", "Write a predictions CSV");
  predict_cmd->add_option("--model", path_a)->required();
  predict_cmd->add_option("--manifest", path_b)->required();
  predict_cmd->add_option("--out", path_c, "Predictions CSV")->required();
  predict_cmd->add_option("--fold", fold, "Only this fold (-1: all)");
  predict_cmd->add_flag("--no-probs", flag, "Omit probability columns");

  auto* ensemble = app.add_subcommand("ensemble", "Average probability columns of prediction files");
  ensemble->add_option("--inputs", inputs)->required();
  ensemble->add_option("--out", path_a, "Predictions CSV")->required();
  ensemble->add_flag("--vote", flag, "Label by majority vote instead of the mean");

  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and confusion matrix of a predictions file");
  eval_cmd->add_option("--predictions", path_a)->required();
  eval_cmd->add_option("--manifest", path_b)->required();
  eval_cmd->add_option("--out", path_c, "Directory for report.txt and confusion.csv");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << code_name(ErrorCode::InvalidConfig) << ": " << e.what() << '\n';
    return 2;
  }

  try {
    ToolkitConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& s : sets) cfg.apply_assignment(s);
    if (*seed_opt) cfg.seed = seed;
    if (*jobs_opt) cfg.jobs = jobs;
    if (threshold) cfg.silence_threshold = *threshold;
    if (folds) cfg.folds = folds;
    if (!representation.empty()) cfg.features.representation = parse_representation(representation);
    cfg.validate();

    if (*inspect) {
      cmd_inspect(path_a, cfg, out);
    } else if (*clean) {
      cmd_clean(manifest_from(path_a, path_b, cfg, err), path_c, report, cfg, out);
    } else if (*split) {
      cmd_split(manifest_from(path_a, path_b, cfg, err), path_c, cfg, out);
    } else if (*featurize) {
      cmd_featurize(load_manifest(path_a), path_b, flag, fold, cfg, out);
    } else if (*preview) {
      cmd_augment_preview(path_a, inputs, path_b, count, cfg, out);
    } else if (*synth) {
      synth::SynthConfig sc;
      sc.n_per_class = n_per_class;
      sc.n_speakers = speakers;
      sc.noise_files = noise_files;
      sc.seed = cfg.seed;
      sc.sample_rate = cfg.features.stft.sample_rate;
      const synth::SynthSummary s = synth::generate_corpus(path_a, sc);
      out << "keyword_files " << s.keyword_files << "\nunknown_files " << s.unknown_files << "\nnoise_files "
          << s.noise_files << '\n';
    } else if (*train_cmd) {
      cmd_train(load_manifest(path_a), path_b, fold, cfg, out);
    } else if (*predict_cmd) {
      cmd_predict(path_a, load_manifest(path_b), path_c, fold, !flag, cfg, out);
    } else if (*ensemble) {
      cmd_ensemble(inputs, path_a, flag, cfg, out);
    } else if (*eval_cmd) {
      cmd_eval(path_a, load_manifest(path_b), path_c, cfg, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << code_name(ErrorCode::IoError) << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace kws::cli
