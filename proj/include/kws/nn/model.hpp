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

// Model descriptions (ModelSpec), the sequential Model built from them, and
// builders for the VGG-like and ResNet-like 1D networks and the mini 2D CNN.

#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "kws/error.hpp"
#include "kws/nn/layers.hpp"
#include "kws/nn/tensor.hpp"
#include "kws/rng.hpp"

namespace kws::nn {

constexpr std::size_t kLogits = 12;

struct LayerSpec {
  std::string kind;
  std::vector<double> args;

  std::size_t arg(std::size_t i) const {
    if (i >= args.size() || args[i] < 0) {
      throw Error(ErrorCode::ParseError, kind + " is missing argument " + std::to_string(i));
    }
    return static_cast<std::size_t>(args[i]);
  }
  bool operator==(const LayerSpec&) const = default;
};

/// Text form, one item per line:
///
///   input 1 16384
///   representation wave
///   conv1d <out> <kernel> <stride> | conv2d <out> <kernel> | batchnorm | relu
///   maxpool <factor> | gap | flatten | dense <units> | dropout <rate>
///   residual <channels> <repeats> [kernel] | softmax
struct ModelSpec {
  Shape input;                  // one sample, batch excluded
  std::string representation;  // feature pipeline the model consumes
  std::vector<LayerSpec> layers;

  ModelSpec& add(std::string kind, std::vector<double> args = {}) {
    layers.push_back({std::move(kind), std::move(args)});
    return *this;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "input";
    for (auto d : input) os << ' ' << d;
    os << "\nrepresentation " << representation << '\n';
    for (const auto& l : layers) {
      os << l.kind;
      for (double a : l.args) os << ' ' << a;
      os << '\n';
    }
    return os.str();
  }

  static ModelSpec from_text(const std::string& text) {
    ModelSpec spec;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string kind;
      if (!(ls >> kind) || kind[0] == '#') continue;
      if (kind == "input") {
        std::size_t d;
        while (ls >> d) spec.input.push_back(d);
      } else if (kind == "representation") {
        ls >> spec.representation;
      } else {
        LayerSpec l{kind, {}};
        double a;
        while (ls >> a) l.args.push_back(a);
        spec.layers.push_back(std::move(l));
      }
    }
    if (spec.input.empty()) throw Error(ErrorCode::ParseError, "model spec has no input line");
    return spec;
  }

  bool operator==(const ModelSpec&) const = default;
};

template <class T>
class Model {
 public:
  explicit Model(ModelSpec spec, std::uint64_t seed = 0) : spec_(std::move(spec)) {
    Rng init(seed);
    Shape cur = spec_.input;
    for (const auto& l : spec_.layers) {
      layers_.push_back(make_layer(l, cur, init));
      cur = layers_.back()->output_shape();
    }
    if (cur != Shape{kLogits}) {
      throw Error(ErrorCode::ShapeMismatch, "model must end in " + std::to_string(kLogits) + " logits, got " +
                                                shape_str(cur));
    }
  }

  const ModelSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return spec_.input; }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

  Tensor<T> forward(const Tensor<T>& x, const Context& ctx) {
    Tensor<T> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, ctx);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& grad) {
    Tensor<T> g = grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& l : layers_) {
      for (auto* p : l->parameters()) out.push_back(p);
    }
    return out;
  }

  std::vector<Tensor<T>*> buffers() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers_) {
      for (auto* b : l->buffers()) out.push_back(b);
    }
    return out;
  }

  /// Parameters then buffers, in layer order: the checkpoint tensor order.
  std::vector<Tensor<T>*> state() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers_) {
      for (auto* p : l->parameters()) out.push_back(&p->value);
      for (auto* b : l->buffers()) out.push_back(b);
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  std::vector<std::vector<T>> snapshot() {
    std::vector<std::vector<T>> out;
    for (auto* t : state()) out.push_back(t->data);
    return out;
  }

  void restore(const std::vector<std::vector<T>>& snap) {
    auto st = state();
    if (snap.size() != st.size()) throw Error(ErrorCode::ShapeMismatch, "snapshot does not match model");
    for (std::size_t i = 0; i < st.size(); ++i) {
      if (snap[i].size() != st[i]->size()) throw Error(ErrorCode::ShapeMismatch, "snapshot tensor size mismatch");
      st[i]->data = snap[i];
    }
  }

  Model clone() {
    Model copy(spec_);
    copy.restore(snapshot());
    return copy;
  }

 private:
  static std::unique_ptr<Layer<T>> make_layer(const LayerSpec& l, const Shape& in, Rng& init) {
    const auto need_rank = [&](std::size_t r) {
      if (in.size() != r) {
        throw Error(ErrorCode::ShapeMismatch, l.kind + " cannot follow output " + shape_str(in));
      }
    };
    if (l.kind == "conv1d") {
      need_rank(2);
      return std::make_unique<Conv1d<T>>(in[0], in[1], l.arg(0), l.arg(1), l.args.size() > 2 ? l.arg(2) : 1, init);
    }
    if (l.kind == "conv2d") {
      need_rank(3);
      return std::make_unique<Conv2d<T>>(in[0], in[1], in[2], l.arg(0), l.arg(1), init);
    }
    if (l.kind == "batchnorm") return std::make_unique<BatchNorm<T>>(in);
    if (l.kind == "relu") return std::make_unique<ReLU<T>>(in);
    if (l.kind == "maxpool") return std::make_unique<MaxPool<T>>(in, l.arg(0));
    if (l.kind == "gap") return std::make_unique<GlobalAvgPool<T>>(in);
    if (l.kind == "flatten") return std::make_unique<Flatten<T>>(in);
    if (l.kind == "dense") {
      need_rank(1);
      return std::make_unique<Dense<T>>(in[0], l.arg(0), init);
    }
    if (l.kind == "dropout") {
      if (l.args.empty()) throw Error(ErrorCode::ParseError, "dropout needs a rate");
      return std::make_unique<Dropout<T>>(in, l.args[0]);
    }
    if (l.kind == "residual") {
      need_rank(2);
      if (in[0] != l.arg(0)) {
        throw Error(ErrorCode::ShapeMismatch, "residual stage of " + std::to_string(l.arg(0)) +
                                                  " channels after " + shape_str(in));
      }
      return std::make_unique<ResidualStage<T>>(in, l.arg(1), l.args.size() > 2 ? l.arg(2) : 9, init);
    }
    if (l.kind == "softmax") return std::make_unique<Softmax<T>>(in);
    throw Error(ErrorCode::ParseError, "unknown layer kind '" + l.kind + "'");
  }

  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

constexpr std::size_t kVggKernel = 9;
constexpr std::size_t kPoolFactor = 4;
constexpr double kDenseDropout = 0.5;

/// Five conv stages each closed by maxpool(4): one conv in stages 1-2, two in
/// stages 3-5, channels multiplier x (8, 16, 32, 64, 128). A 16384-sample input
/// reaches length 16 before flatten. Two dense+BN+ReLU+dropout blocks follow.
inline ModelSpec build_vgg1d(std::size_t width_multiplier = 1, std::size_t input_length = 16384) {
  if (width_multiplier < 1) throw Error(ErrorCode::InvalidConfig, "width multiplier must be >= 1");
  ModelSpec s;
  s.input = {1, input_length};
  s.representation = "wave";
  const std::size_t widths[] = {8, 16, 32, 64, 128};
  for (std::size_t stage = 0; stage < 5; ++stage) {
    const double ch = static_cast<double>(widths[stage] * width_multiplier);
    const int convs = stage < 2 ? 1 : 2;
    for (int c = 0; c < convs; ++c) {
      s.add("conv1d", {ch, double(kVggKernel), 1}).add("batchnorm").add("relu");
    }
    s.add("maxpool", {double(kPoolFactor)});
  }
  s.add("flatten");
  for (const std::size_t units : {256, 128}) {
    s.add("dense", {double(units * width_multiplier)}).add("batchnorm").add("relu").add("dropout", {kDenseDropout});
  }
  s.add("dense", {double(kLogits)});
  return s;
}

struct ResnetDepth {
  std::vector<std::size_t> repeats{3, 4, 6, 3};
  std::vector<std::size_t> channels{16, 32, 64, 128};

  /// Same stage layout with one block per stage and narrow channels.
  static ResnetDepth desk() { return {{1, 1, 1, 1}, {8, 16, 32, 64}}; }
};

constexpr std::size_t kResnetStemKernel = 80;
constexpr std::size_t kResnetStemStride = 4;

/// Stem conv(80, stride 4)+BN+ReLU+maxpool(4), then residual stages separated
/// by maxpool(4). A stage whose width differs from its input opens with a
/// conv(9)+BN+ReLU projection. Global average pool, dense to 12 logits.
inline ModelSpec build_resnet1d(const ResnetDepth& depth = {}, std::size_t input_length = 16384) {
  if (depth.repeats.empty() || depth.repeats.size() != depth.channels.size()) {
    throw Error(ErrorCode::InvalidConfig, "resnet depth config needs one channel width per stage");
  }
  ModelSpec s;
  s.input = {1, input_length};
  s.representation = "wave";
  std::size_t ch = depth.channels[0];
  s.add("conv1d", {double(ch), double(kResnetStemKernel), double(kResnetStemStride)})
      .add("batchnorm")
      .add("relu")
      .add("maxpool", {double(kPoolFactor)});
  for (std::size_t i = 0; i < depth.repeats.size(); ++i) {
    if (depth.channels[i] != ch) {
      ch = depth.channels[i];
      s.add("conv1d", {double(ch), double(kVggKernel), 1}).add("batchnorm").add("relu");
    }
    s.add("residual", {double(ch), double(depth.repeats[i]), double(kVggKernel)});
    if (i + 1 < depth.repeats.size()) s.add("maxpool", {double(kPoolFactor)});
  }
  s.add("gap").add("dense", {double(kLogits)});
  return s;
}

/// Three [conv3x3+BN+ReLU+maxpool2] stages (16, 32, 64 channels), then
/// dense(128)+ReLU+dropout(0.5) and dense(12). Odd extents are floored by pooling.
inline ModelSpec build_cnn2d(std::size_t bins, std::size_t frames, std::string representation = "logmel") {
  ModelSpec s;
  s.input = {1, bins, frames};
  s.representation = std::move(representation);
  for (const double ch : {16.0, 32.0, 64.0}) {
    s.add("conv2d", {ch, 3}).add("batchnorm").add("relu").add("maxpool", {2});
  }
  s.add("flatten").add("dense", {128}).add("relu").add("dropout", {kDenseDropout}).add("dense", {double(kLogits)});
  return s;
}

}  // namespace kws::nn
