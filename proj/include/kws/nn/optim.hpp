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

#include <cmath>
#include <vector>

#include "kws/nn/tensor.hpp"

namespace kws::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction.
template <class T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t j = 0; j < params_.size(); ++j) {
      auto& p = *params_[j];
      auto& m = m_[j];
      auto& v = v_[j];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double update = cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  std::size_t steps() const { return t_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace kws::nn
