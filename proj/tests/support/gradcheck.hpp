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

// Central finite-difference gradient checks for layers in 64-bit mode.
// The scalar probed is L = sum(w * forward(x)) with a fixed random w, so the
// upstream gradient handed to backward is w itself.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kws/nn/layers.hpp"
#include "kws/rng.hpp"

namespace kws::testing {

struct GradReport {
  double worst = 0.0;
  std::string where;
};

/// Worst elementwise |a - n| / (|a| + 1e-8).
inline double rel_error(const std::vector<double>& a, const std::vector<double>& n) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - n[i]) / (std::abs(a[i]) + 1e-8));
  }
  return worst;
}

/// Checks the input gradient and every parameter gradient of `layer`.
/// `ctx_seed` reseeds the context rng on every forward so stochastic layers
/// see the same mask each time.
inline GradReport check_layer(nn::Layer<double>& layer, nn::Tensor<double> x, std::uint64_t seed,
                              nn::Mode mode = nn::Mode::train, double h = 1e-5) {
  Rng rng(seed);
  const std::uint64_t ctx_seed = rng.next_u64();
  auto run = [&](const nn::Tensor<double>& in) {
    Rng ctx_rng(ctx_seed);
    return layer.forward(in, nn::Context{mode, &ctx_rng});
  };
  nn::Tensor<double> y = run(x);
  nn::Tensor<double> w(y.shape);
  for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);
  auto loss = [&](const nn::Tensor<double>& in) {
    const nn::Tensor<double> out = run(in);
    long double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return static_cast<double>(s);
  };

  for (auto* p : layer.parameters()) p->zero_grad();
  run(x);
  const nn::Tensor<double> dx = layer.backward(w);
  std::vector<std::vector<double>> analytic;
  for (auto* p : layer.parameters()) analytic.push_back(p->grad.data);

  GradReport report;
  auto record = [&](const std::vector<double>& a, const std::vector<double>& n, const std::string& what) {
    const double e = rel_error(a, n);
    if (e >= report.worst) {
      report.worst = e;
      report.where = what;
    }
  };

  std::vector<double> numeric(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss(x);
    x[i] = keep - h;
    const double down = loss(x);
    x[i] = keep;
    numeric[i] = (up - down) / (2 * h);
  }
  record(dx.data, numeric, "input");

  const auto params = layer.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k]->value;
    std::vector<double> num(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double keep = value[i];
      value[i] = keep + h;
      const double up = loss(x);
      value[i] = keep - h;
      const double down = loss(x);
      value[i] = keep;
      num[i] = (up - down) / (2 * h);
    }
    record(analytic[k], num, params[k]->name + "#" + std::to_string(k));
  }
  return report;
}

inline nn::Tensor<double> random_tensor(const nn::Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor<double> t(shape);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

/// Values at least 0.05 away from zero, so a step of h never crosses a ReLU kink.
inline nn::Tensor<double> away_from_zero(const nn::Shape& shape, Rng& rng) {
  nn::Tensor<double> t(shape);
  for (auto& v : t.data) v = (rng.bernoulli(0.5) ? -1.0 : 1.0) * rng.uniform(0.05, 1.0);
  return t;
}

/// A shuffled evenly spaced grid: no two entries closer than the grid step,
/// so a step of h never changes which element of a pool window is largest.
inline nn::Tensor<double> distinct_values(const nn::Shape& shape, Rng& rng) {
  nn::Tensor<double> t(shape);
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) t[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
  rng.shuffle(t.data);
  return t;
}

}  // namespace kws::testing
