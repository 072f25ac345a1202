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

// Inference, softmax-mean ensembling, majority vote, unknown-class
// thresholding and accuracy bookkeeping.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kws/csv.hpp"
#include "kws/dataset.hpp"
#include "kws/error.hpp"
#include "kws/features.hpp"
#include "kws/nn/loss.hpp"
#include "kws/nn/model.hpp"

namespace kws::eval {

using Probs = std::array<float, kNumClasses>;

/// Lowest index wins ties.
inline std::size_t argmax(const Probs& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

struct Prediction {
  Probs probs{};
  std::size_t argmax = 0;
  std::string source_model;

  static Prediction from_probs(const Probs& p, std::string source = {}) {
    return Prediction{p, eval::argmax(p), std::move(source)};
  }
};

/// Eval-mode forward + softmax for a batch of equally shaped samples.
inline std::vector<Prediction> predict_batch(nn::Model<float>& model, std::span<const Features> batch,
                                             const std::string& source = {}) {
  if (batch.empty()) return {};
  for (const auto& f : batch) {
    if (f.shape != model.input_shape()) {
      throw Error(ErrorCode::ShapeMismatch, "features " + nn::shape_str(f.shape) + " for model input " +
                                                nn::shape_str(model.input_shape()));
    }
  }
  const std::size_t per = nn::shape_size(model.input_shape());
  nn::Shape shape{batch.size()};
  shape.insert(shape.end(), model.input_shape().begin(), model.input_shape().end());
  nn::Tensor<float> x(shape);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::copy(batch[i].values.begin(), batch[i].values.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  const nn::Tensor<float> probs = nn::softmax(model.forward(x, nn::Context{nn::Mode::eval, nullptr}));
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Probs p;
    std::copy_n(probs.data.begin() + static_cast<std::ptrdiff_t>(i * kNumClasses), kNumClasses, p.begin());
    out.push_back(Prediction::from_probs(p, source));
  }
  return out;
}

inline Prediction predict(nn::Model<float>& model, const Features& features, const std::string& source = {}) {
  return predict_batch(model, std::span(&features, 1), source).front();
}

/// Elementwise mean of member distributions. Members are ordered by
/// source_model and summed pairwise so the result does not depend on the
/// order they were passed in.
inline Prediction ensemble_mean(std::span<const Prediction> members) {
  if (members.empty()) throw Error(ErrorCode::EmptyEnsemble, "ensemble of zero predictions");
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return members[a].source_model < members[b].source_model;
  });
  Probs mean{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<double> v(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) v[i] = members[order[i]].probs[c];
    // Pairwise reduction in place.
    for (std::size_t width = 1; width < v.size(); width *= 2) {
      for (std::size_t i = 0; i + width < v.size(); i += 2 * width) v[i] += v[i + width];
    }
    mean[c] = static_cast<float>(v[0] / static_cast<double>(members.size()));
  }
  return Prediction::from_probs(mean, "ensemble");
}

/// Most frequent argmax; ties go to the larger summed probability, then the lower index.
inline std::size_t majority_vote(std::span<const Prediction> members) {
  if (members.empty()) throw Error(ErrorCode::EmptyEnsemble, "vote over zero predictions");
  std::array<std::size_t, kNumClasses> votes{};
  std::array<double, kNumClasses> mass{};
  for (const auto& m : members) {
    ++votes[m.argmax];
    for (std::size_t c = 0; c < kNumClasses; ++c) mass[c] += m.probs[c];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best])) best = c;
  }
  return best;
}

/// Redirects a low-confidence `unknown` argmax to the runner-up class.
inline std::size_t apply_unknown_threshold(const Prediction& p, double tau) {
  const std::size_t unknown = index_of(ClassLabel::unknown);
  if (p.argmax != unknown || !(static_cast<double>(p.probs[unknown]) < tau)) return p.argmax;
  std::size_t best = unknown == 0 ? 1 : 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (c != unknown && p.probs[c] > p.probs[best]) best = c;
  }
  return best;
}

using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;
using LabelPair = std::pair<std::size_t, std::size_t>;  // (true, predicted)

inline Confusion confusion_matrix(std::span<const LabelPair> pairs) {
  Confusion m{};
  for (const auto& [t, p] : pairs) {
    if (t >= kNumClasses || p >= kNumClasses) {
      throw Error(ErrorCode::IndexOutOfRange, "class pair (" + std::to_string(t) + "," + std::to_string(p) + ")");
    }
    ++m[t][p];
  }
  return m;
}

inline double accuracy(std::span<const LabelPair> pairs) {
  if (pairs.empty()) return 0.0;
  const Confusion m = confusion_matrix(pairs);
  std::size_t hits = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) hits += m[c][c];
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

// Predictions CSV: fname,label[,p0..p11]

struct PredictionRow {
  std::string fname;
  std::string label;
  std::optional<Probs> probs;
};

inline std::string format_prob(float v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string predictions_to_csv(std::span<const PredictionRow> rows) {
  bool with_probs = !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.probs.has_value(); });
  std::string out = "fname,label";
  if (with_probs) {
    for (std::size_t c = 0; c < kNumClasses; ++c) out += ",p" + std::to_string(c);
  }
  out += '\n';
  for (const auto& r : rows) {
    csv::Row row{r.fname, r.label};
    if (with_probs) {
      for (float v : *r.probs) row.push_back(format_prob(v));
    }
    out += csv::format_row(row);
  }
  return out;
}

inline std::vector<PredictionRow> predictions_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "fname" || rows[0][1] != "label") {
    throw Error(ErrorCode::ParseError, "predictions header must start with fname,label");
  }
  const bool with_probs = rows[0].size() == 2 + kNumClasses;
  if (!with_probs && rows[0].size() != 2) throw Error(ErrorCode::ParseError, "predictions header has wrong width");
  std::vector<PredictionRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw Error(ErrorCode::ParseError, "predictions row " + std::to_string(r) + " has wrong width");
    }
    PredictionRow row{rows[r][0], rows[r][1], std::nullopt};
    if (with_probs) {
      Probs p{};
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const std::string& s = rows[r][2 + c];
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), p[c]);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
          throw Error(ErrorCode::ParseError, "bad probability '" + s + "' in row " + std::to_string(r));
        }
      }
      row.probs = p;
    }
    out.push_back(std::move(row));
  }
  return out;
}

/// Plain-text table: overall accuracy, per-class recall and the confusion matrix.
inline std::string format_report(const Confusion& m) {
  std::size_t total = 0, hits = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) total += m[t][p];
    hits += m[t][t];
  }
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "accuracy %.6f (%zu/%zu)\n\n", total ? double(hits) / double(total) : 0.0, hits,
                total);
  os << line;
  os << "class      count  recall\n";
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    std::size_t n = 0;
    for (std::size_t p = 0; p < kNumClasses; ++p) n += m[t][p];
    std::snprintf(line, sizeof line, "%-9s %6zu  %s\n", std::string(kClassNames[t]).c_str(), n,
                  n ? std::to_string(double(m[t][t]) / double(n)).c_str() : "-");
    os << line;
  }
  os << "\nconfusion (rows = true, columns = predicted)\n         ";
  for (std::size_t p = 0; p < kNumClasses; ++p) {
    std::snprintf(line, sizeof line, " %5.5s", std::string(kClassNames[p]).c_str());
    os << line;
  }
  os << '\n';
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    std::snprintf(line, sizeof line, "%-9s", std::string(kClassNames[t]).c_str());
    os << line;
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      std::snprintf(line, sizeof line, " %5zu", m[t][p]);
      os << line;
    }
    os << '\n';
  }
  return os.str();
}

inline std::string confusion_to_csv(const Confusion& m) {
  csv::Row header{"true"};
  for (auto n : kClassNames) header.emplace_back(n);
  std::string out = csv::format_row(header);
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    csv::Row row{std::string(kClassNames[t])};
    for (std::size_t p = 0; p < kNumClasses; ++p) row.push_back(std::to_string(m[t][p]));
    out += csv::format_row(row);
  }
  return out;
}

}  // namespace kws::eval
