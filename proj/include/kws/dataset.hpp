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

// Corpus layout, 12-class label mapping, speaker-disjoint folds, low-volume
// cleaning and class-balanced batch sampling.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kws/csv.hpp"
#include "kws/error.hpp"
#include "kws/io.hpp"
#include "kws/rng.hpp"
#include "kws/wav_io.hpp"

namespace kws {

constexpr std::size_t kNumClasses = 12;

enum class ClassLabel : std::uint8_t { yes, no, up, down, left, right, on, off, stop, go, silence, unknown };

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go", "silence", "unknown"};

inline constexpr std::string_view kBackgroundNoiseDir = "_background_noise_";
inline constexpr std::string_view kBackgroundSpeaker = "_background_";

constexpr std::size_t index_of(ClassLabel c) { return static_cast<std::size_t>(c); }

inline std::string_view class_name(ClassLabel c) { return kClassNames[index_of(c)]; }

inline ClassLabel class_from_index(std::size_t i) {
  if (i >= kNumClasses) throw Error(ErrorCode::IndexOutOfRange, "class index " + std::to_string(i));
  return static_cast<ClassLabel>(i);
}

/// Folder name to class. Total: keywords map to themselves, the background
/// noise folder to silence, anything else to unknown.
inline ClassLabel map_raw_label(std::string_view folder) {
  for (std::size_t i = 0; i < 10; ++i) {
    if (kClassNames[i] == folder) return static_cast<ClassLabel>(i);
  }
  if (folder == kBackgroundNoiseDir) return ClassLabel::silence;
  return ClassLabel::unknown;
}

/// Exact class name (as written in prediction files) to class.
inline std::optional<ClassLabel> parse_class_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<ClassLabel>(i);
  }
  return std::nullopt;
}

struct ManifestEntry {
  std::string path;
  std::string raw_label;
  ClassLabel label = ClassLabel::unknown;
  std::string speaker_id;
  int fold = -1;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::size_t n_folds = 0;
  std::vector<std::string> noise_sources;  // long background recordings
};

struct ScanIssue {
  std::string path;
  std::string message;
};

struct ScanResult {
  Manifest manifest;
  std::vector<ScanIssue> issues;
};

/// Speaker id from `<id>_nohash_<n>.wav`.
inline std::string speaker_id(std::string_view filename) {
  const auto slash = filename.find_last_of("/\\");
  if (slash != std::string_view::npos) filename.remove_prefix(slash + 1);
  const auto marker = filename.find("_nohash_");
  const auto underscore = filename.find('_');
  if (marker == std::string_view::npos || underscore == 0 || underscore != marker) {
    throw Error(ErrorCode::UnparseableFilename, std::string(filename));
  }
  return std::string(filename.substr(0, underscore));
}

/// Walks `<root>/<label>/*.wav`. Files that fail to parse are reported and skipped.
inline ScanResult scan_corpus(const std::filesystem::path& root,
                              std::uint32_t expected_rate = kDefaultSampleRate) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::EmptyCorpus, root.string() + " is not a directory");

  std::vector<fs::path> dirs;
  for (const auto& d : fs::directory_iterator(root)) {
    if (d.is_directory()) dirs.push_back(d.path());
  }
  std::sort(dirs.begin(), dirs.end());

  ScanResult result;
  for (const auto& dir : dirs) {
    const std::string folder = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir)) {
      if (f.is_regular_file() && f.path().extension() == ".wav") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      try {
        const AudioClip clip = load_wav(file);
        if (clip.sample_rate != expected_rate) {
          throw Error(ErrorCode::UnsupportedFormat, "sample rate " + std::to_string(clip.sample_rate));
        }
      } catch (const Error& e) {
        result.issues.push_back({file.generic_string(), e.what()});
        continue;
      }
      if (folder == kBackgroundNoiseDir) {
        result.manifest.noise_sources.push_back(file.generic_string());
        continue;
      }
      ManifestEntry entry;
      entry.path = file.generic_string();
      entry.raw_label = folder;
      entry.label = map_raw_label(folder);
      try {
        entry.speaker_id = speaker_id(file.filename().string());
      } catch (const Error&) {
        // Test-style names carry no speaker; assign_folds rejects them.
      }
      result.manifest.entries.push_back(std::move(entry));
    }
  }
  if (result.manifest.entries.empty() && result.manifest.noise_sources.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "no readable .wav files under " + root.string());
  }
  return result;
}

/// Splits a `<path>#<n>` fragment reference; n is nullopt for whole files.
inline std::pair<std::string, std::optional<std::size_t>> split_fragment_ref(const std::string& path) {
  const auto hash = path.rfind('#');
  if (hash == std::string::npos) return {path, std::nullopt};
  std::size_t index = 0;
  const auto tail = std::string_view(path).substr(hash + 1);
  const auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), index);
  if (ec != std::errc() || p != tail.data() + tail.size()) return {path, std::nullopt};
  return {path.substr(0, hash), index};
}

/// Loads an entry's audio, cutting one-second fragments out of background
/// recordings for `file.wav#n` references.
inline AudioClip load_entry_audio(const ManifestEntry& entry) {
  const auto [file, fragment] = split_fragment_ref(entry.path);
  AudioClip clip = load_wav(file);
  if (fragment) {
    const std::size_t len = clip.sample_rate;
    const std::size_t start = *fragment * len;
    if (start + len > clip.samples.size()) {
      throw Error(ErrorCode::UnreadableFile, entry.path + ": fragment out of range");
    }
    clip.samples = std::vector<float>(clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                      clip.samples.begin() + static_cast<std::ptrdiff_t>(start + len));
    clip.source_path = entry.path;
  }
  clip.label = entry.raw_label;
  return clip;
}

/// Median per-class entry count over classes other than silence that have entries.
inline std::size_t median_class_count(const Manifest& m) {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& e : m.entries) ++counts[index_of(e.label)];
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (c != index_of(ClassLabel::silence) && counts[c] > 0) present.push_back(counts[c]);
  }
  if (present.empty()) return 0;
  std::sort(present.begin(), present.end());
  return present[present.size() / 2];
}

/// Registers one-second fragments of the noise recordings as silence entries,
/// interleaving sources, at most `cap` of them (0 = no cap).
inline std::size_t add_silence_fragments(Manifest& m, std::size_t cap,
                                         std::uint32_t sample_rate = kDefaultSampleRate) {
  std::vector<std::size_t> counts;
  for (const auto& src : m.noise_sources) {
    counts.push_back(load_wav(src).samples.size() / sample_rate);
  }
  std::size_t added = 0;
  for (std::size_t frag = 0;; ++frag) {
    bool any = false;
    for (std::size_t s = 0; s < m.noise_sources.size(); ++s) {
      if (frag >= counts[s]) continue;
      if (cap && added >= cap) return added;
      any = true;
      ManifestEntry e;
      e.path = m.noise_sources[s] + "#" + std::to_string(frag);
      e.raw_label = std::string(kBackgroundNoiseDir);
      e.label = ClassLabel::silence;
      e.speaker_id = std::string(kBackgroundSpeaker);
      m.entries.push_back(std::move(e));
      ++added;
    }
    if (!any) return added;
  }
}

/// Speaker-disjoint k-fold assignment: sorted speakers are shuffled with the
/// seed and dealt round-robin. Background fragments are dealt per entry.
inline Manifest assign_folds(Manifest m, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 folds");
  std::set<std::string> speaker_set;
  for (const auto& e : m.entries) {
    if (e.speaker_id.empty()) throw Error(ErrorCode::MissingSpeakerId, e.path);
    if (e.speaker_id != kBackgroundSpeaker) speaker_set.insert(e.speaker_id);
  }
  std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());
  Rng rng(seed);
  rng.shuffle(speakers);
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < speakers.size(); ++i) fold_of[speakers[i]] = static_cast<int>(i % k);

  std::size_t background = 0;
  for (auto& e : m.entries) {
    if (e.speaker_id == kBackgroundSpeaker) {
      e.fold = static_cast<int>(background++ % k);
    } else {
      e.fold = fold_of.at(e.speaker_id);
    }
  }
  m.n_folds = k;
  return m;
}

struct VolumeReportRow {
  std::string path;
  float peak = 0.0f;
  bool proposed = false;
};

struct CleanResult {
  std::vector<std::size_t> relabel;     // entry indices proposed for silence
  std::vector<VolumeReportRow> report;  // every entry, ascending by peak
};

using ClipLoader = std::function<AudioClip(const ManifestEntry&)>;

/// Proposes entries quieter than `threshold` for relabeling as silence.
/// Nothing is modified; see apply_relabel.
inline CleanResult clean_low_volume(const Manifest& m, float threshold, const ClipLoader& loader = load_entry_audio) {
  if (threshold < 0.0f) throw Error(ErrorCode::InvalidConfig, "threshold must be >= 0");
  CleanResult r;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const float peak = peak_volume(loader(e));
    const bool proposed = peak < threshold && e.label != ClassLabel::silence;
    if (proposed) r.relabel.push_back(i);
    r.report.push_back({e.path, peak, proposed});
  }
  std::stable_sort(r.report.begin(), r.report.end(),
                   [](const VolumeReportRow& a, const VolumeReportRow& b) { return a.peak < b.peak; });
  return r;
}

inline void apply_relabel(Manifest& m, const std::vector<std::size_t>& relabel) {
  for (std::size_t i : relabel) {
    auto& e = m.entries.at(i);
    e.raw_label = std::string(kBackgroundNoiseDir);
    e.label = ClassLabel::silence;
  }
}

/// Infinite stream of batches holding batch_size/12 entries of every class,
/// excluding `fold_out`. Each class cycles through a reshuffled order.
class BalancedBatches {
 public:
  using Batch = std::vector<std::size_t>;  // indices into Manifest::entries

  BalancedBatches(const Manifest& m, int fold_out, std::size_t batch_size, Rng rng)
      : per_class_(batch_size / kNumClasses), rng_(std::move(rng)) {
    if (batch_size == 0 || batch_size % kNumClasses != 0) {
      throw Error(ErrorCode::BatchNotMultipleOf12, "batch size " + std::to_string(batch_size));
    }
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      if (fold_out >= 0 && m.entries[i].fold == fold_out) continue;
      pools_[index_of(m.entries[i].label)].push_back(i);
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (pools_[c].empty()) {
        throw Error(ErrorCode::ClassEmpty, "no training entries for class " + std::string(kClassNames[c]));
      }
      rng_.shuffle(pools_[c]);
    }
  }

  Batch next() {
    Batch b;
    b.reserve(per_class_ * kNumClasses);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (std::size_t j = 0; j < per_class_; ++j) {
        if (cursor_[c] == pools_[c].size()) {
          rng_.shuffle(pools_[c]);
          cursor_[c] = 0;
        }
        b.push_back(pools_[c][cursor_[c]++]);
      }
    }
    return b;
  }

  std::size_t training_size() const {
    std::size_t n = 0;
    for (const auto& p : pools_) n += p.size();
    return n;
  }

 private:
  std::size_t per_class_;
  Rng rng_;
  std::array<std::vector<std::size_t>, kNumClasses> pools_{};
  std::array<std::size_t, kNumClasses> cursor_{};
};

// Manifest CSV: path,raw_label,class_index,speaker_id,fold

inline std::string manifest_to_csv(const Manifest& m) {
  std::string out = "path,raw_label,class_index,speaker_id,fold\n";
  for (const auto& e : m.entries) {
    out += csv::format_row({e.path, e.raw_label, std::to_string(index_of(e.label)), e.speaker_id,
                            std::to_string(e.fold)});
  }
  return out;
}

inline Manifest manifest_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  const csv::Row header = {"path", "raw_label", "class_index", "speaker_id", "fold"};
  if (rows.empty() || rows[0] != header) throw Error(ErrorCode::ParseError, "manifest header mismatch");
  Manifest m;
  std::set<std::string> noise;
  int max_fold = -1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 5) throw Error(ErrorCode::ParseError, "manifest row " + std::to_string(r) + " has " +
                                                               std::to_string(row.size()) + " fields");
    ManifestEntry e;
    e.path = row[0];
    e.raw_label = row[1];
    try {
      e.label = class_from_index(static_cast<std::size_t>(std::stoul(row[2])));
      e.fold = std::stoi(row[4]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "manifest row " + std::to_string(r) + ": bad number");
    }
    e.speaker_id = row[3];
    max_fold = std::max(max_fold, e.fold);
    if (e.label == ClassLabel::silence) {
      const auto [file, frag] = split_fragment_ref(e.path);
      if (frag) noise.insert(file);
    }
    m.entries.push_back(std::move(e));
  }
  m.n_folds = static_cast<std::size_t>(max_fold + 1);
  m.noise_sources.assign(noise.begin(), noise.end());
  return m;
}

inline void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  io::write_text(path, manifest_to_csv(m));
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_csv(io::read_text(path));
}

}  // namespace kws
