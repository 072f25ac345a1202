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

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "kws/error.hpp"
#include "kws/nn/tensor.hpp"

namespace kws::nn {

template <class T>
struct LossResult {
  T loss = 0;
  Tensor<T> grad;  // d loss / d logits
};

/// Row-wise max-subtracted softmax of [batch, classes].
template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "softmax expects [batch, classes]");
  const std::size_t n = logits.dim(1);
  Tensor<T> p(logits.shape);
  for (std::size_t b = 0; b < logits.dim(0); ++b) {
    const T* in = logits.ptr() + b * n;
    T* out = p.ptr() + b * n;
    const T peak = *std::max_element(in, in + n);
    T sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += (out[i] = std::exp(in[i] - peak));
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
  }
  return p;
}

/// Mean negative log-likelihood; grad = (softmax - onehot) / batch.
template <class T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, "logits " + shape_str(logits.shape) + " vs " +
                                              std::to_string(targets.size()) + " targets");
  }
  const std::size_t batch = logits.dim(0), n = logits.dim(1);
  LossResult<T> r;
  r.grad = softmax(logits);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (targets[b] >= n) throw Error(ErrorCode::IndexOutOfRange, "target " + std::to_string(targets[b]));
    const T* in = logits.ptr() + b * n;
    const double peak = static_cast<double>(*std::max_element(in, in + n));
    double lse = 0.0;
    for (std::size_t i = 0; i < n; ++i) lse += std::exp(static_cast<double>(in[i]) - peak);
    total += std::log(lse) + peak - static_cast<double>(in[targets[b]]);
    r.grad[b * n + targets[b]] -= T(1);
  }
  const T inv = T(1) / static_cast<T>(batch);
  for (auto& g : r.grad.data) g *= inv;
  r.loss = static_cast<T>(total / static_cast<double>(batch));
  return r;
}

}  // namespace kws::nn
