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

// Layers with hand-written forward and backward passes. Every layer caches
// what its backward pass needs during forward; calling backward first throws
// MissingForwardCache.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "kws/error.hpp"
#include "kws/nn/gemm.hpp"
#include "kws/nn/tensor.hpp"
#include "kws/rng.hpp"

namespace kws::nn {

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;

  /// Shape of one output sample (batch dimension excluded).
  virtual Shape output_shape() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, const Context& ctx) = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  /// Non-trainable state saved with the model (batchnorm running statistics).
  virtual std::vector<Tensor<T>*> buffers() { return {}; }
  virtual std::string name() const = 0;
};

namespace detail {

inline void require_cache(bool ok, const std::string& layer) {
  if (!ok) throw Error(ErrorCode::MissingForwardCache, layer + " backward called before forward");
}

template <class T>
void check_input(const Tensor<T>& x, const Shape& sample, const std::string& layer) {
  if (x.rank() != sample.size() + 1 || x.dim(0) == 0 ||
      !std::equal(sample.begin(), sample.end(), x.shape.begin() + 1)) {
    throw Error(ErrorCode::ShapeMismatch, layer + " expects [batch]+" + shape_str(sample) + ", got " +
                                              shape_str(x.shape));
  }
}

inline Shape with_batch(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

/// He-uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <class T>
void he_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace detail

namespace detail {

// Moves [batch, ch, n] to [ch, batch * n] and back; the GEMM-friendly layout
// keeps the batch inside the long inner dimension.
template <class T>
void to_channel_major(const T* src, T* dst, std::size_t batch, std::size_t ch, std::size_t n) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) std::copy_n(src + (b * ch + c) * n, n, dst + (c * batch + b) * n);
}

template <class T>
void from_channel_major(const T* src, T* dst, std::size_t batch, std::size_t ch, std::size_t n) {
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t b = 0; b < batch; ++b) std::copy_n(src + (c * batch + b) * n, n, dst + (b * ch + c) * n);
}

// Bias add and bias gradient on a [ch, cols] matrix.
template <class T>
void add_rows(T* m, const Tensor<T>& bias, std::size_t cols) {
  for (std::size_t o = 0; o < bias.size(); ++o) {
    T* row = m + o * cols;
    const T v = bias[o];
#pragma omp simd
    for (std::size_t j = 0; j < cols; ++j) row[j] += v;
  }
}

template <class T>
void sum_rows(const T* m, Tensor<T>& out, std::size_t cols) {
  for (std::size_t o = 0; o < out.size(); ++o) {
    const T* row = m + o * cols;
    T acc = 0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t j = 0; j < cols; ++j) acc += row[j];
    out[o] += acc;
  }
}

}  // namespace detail

/// "Same"-padded 1D cross-correlation: pad (k-1)/2 on the left, output length ceil(L/stride).
template <class T>
class Conv1d final : public Layer<T> {
 public:
  Conv1d(std::size_t in_channels, std::size_t length, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, Rng& init)
      : cin_(in_channels), len_(length), cout_(out_channels), k_(kernel), stride_(stride),
        pad_((kernel - 1) / 2), out_len_((length + stride - 1) / stride),
        weight_("weight", {out_channels, in_channels, kernel}), bias_("bias", {out_channels}) {
    if (kernel == 0 || stride == 0 || in_channels == 0 || out_channels == 0) {
      throw Error(ErrorCode::ShapeMismatch, "conv1d needs positive kernel, stride and channels");
    }
    detail::he_uniform(weight_.value, in_channels * kernel, init);
  }

  Shape output_shape() const override { return {cout_, out_len_}; }
  std::string name() const override { return "conv1d"; }
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

  Tensor<T> forward(const Tensor<T>& x, const Context&) override {
    detail::check_input(x, {cin_, len_}, name());
    batch_ = x.dim(0);
    const std::size_t cols = batch_ * out_len_;
    // col[(c*K + k), b*out_len + t] = x[b, c, t*stride + k - pad]
    col_.assign(cin_ * k_ * cols, T(0));
    for (std::size_t c = 0; c < cin_; ++c) {
      for (std::size_t k = 0; k < k_; ++k) {
        const auto [lo, hi] = range(k);
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad_);
        for (std::size_t b = 0; b < batch_; ++b) {
          const T* in = x.ptr() + (b * cin_ + c) * len_;
          T* row = col_.data() + (c * k_ + k) * cols + b * out_len_;
          for (std::size_t t = lo; t < hi; ++t) row[t] = in[static_cast<std::ptrdiff_t>(t * stride_) + off];
        }
      }
    }
    std::vector<T> out(cout_ * cols, T(0));
    gemm::nn(cout_, cols, cin_ * k_, weight_.value.ptr(), col_.data(), out.data());
    detail::add_rows(out.data(), bias_.value, cols);
    Tensor<T> y({batch_, cout_, out_len_});
    detail::from_channel_major(out.data(), y.ptr(), batch_, cout_, out_len_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!col_.empty(), name());
    detail::check_input(g, {cout_, out_len_}, name() + " grad");
    if (g.dim(0) != batch_) throw Error(ErrorCode::ShapeMismatch, "conv1d grad batch differs from forward");
    const std::size_t cols = batch_ * out_len_;
    std::vector<T> gm(cout_ * cols);
    detail::to_channel_major(g.ptr(), gm.data(), batch_, cout_, out_len_);
    detail::sum_rows(gm.data(), bias_.grad, cols);
    gemm::nt(cout_, cin_ * k_, cols, gm.data(), col_.data(), weight_.grad.ptr());
    std::vector<T> dcol(cin_ * k_ * cols, T(0));
    gemm::tn(cout_, cols, cin_ * k_, weight_.value.ptr(), gm.data(), dcol.data());
    Tensor<T> dx({batch_, cin_, len_});
    for (std::size_t c = 0; c < cin_; ++c) {
      for (std::size_t k = 0; k < k_; ++k) {
        const auto [lo, hi] = range(k);
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad_);
        for (std::size_t b = 0; b < batch_; ++b) {
          T* din = dx.ptr() + (b * cin_ + c) * len_;
          const T* row = dcol.data() + (c * k_ + k) * cols + b * out_len_;
          for (std::size_t t = lo; t < hi; ++t) din[static_cast<std::ptrdiff_t>(t * stride_) + off] += row[t];
        }
      }
    }
    return dx;
  }

 private:
  // Output positions t whose tap k lands inside the input.
  std::pair<std::size_t, std::size_t> range(std::size_t k) const {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad_);
    const auto s = static_cast<std::ptrdiff_t>(stride_);
    const auto len = static_cast<std::ptrdiff_t>(len_);
    std::ptrdiff_t lo = off >= 0 ? 0 : (-off + s - 1) / s;
    std::ptrdiff_t hi = len - 1 - off < 0 ? 0 : (len - 1 - off) / s + 1;
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_len_));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }

  std::size_t cin_, len_, cout_, k_, stride_, pad_, out_len_;
  Parameter<T> weight_, bias_;
  std::vector<T> col_;
  std::size_t batch_ = 0;
};

/// Stride-1 "same"-padded 2D cross-correlation with a square kernel.
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_channels, std::size_t height, std::size_t width, std::size_t out_channels,
         std::size_t kernel, Rng& init)
      : cin_(in_channels), h_(height), w_(width), cout_(out_channels), k_(kernel), pad_((kernel - 1) / 2),
        weight_("weight", {out_channels, in_channels, kernel, kernel}), bias_("bias", {out_channels}) {
    if (kernel == 0 || in_channels == 0 || out_channels == 0) {
      throw Error(ErrorCode::ShapeMismatch, "conv2d needs positive kernel and channels");
    }
    detail::he_uniform(weight_.value, in_channels * kernel * kernel, init);
  }

  Shape output_shape() const override { return {cout_, h_, w_}; }
  std::string name() const override { return "conv2d"; }
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

  Tensor<T> forward(const Tensor<T>& x, const Context&) override {
    detail::check_input(x, {cin_, h_, w_}, name());
    batch_ = x.dim(0);
    const std::size_t plane = h_ * w_;
    const std::size_t cols = batch_ * plane;
    col_.assign(cin_ * k_ * k_ * cols, T(0));
    for_each_tap([&](std::size_t c, std::size_t tap, std::size_t b, std::size_t yy, std::size_t xlo,
                     std::size_t xhi, std::ptrdiff_t shift) {
      const T* in = x.ptr() + (b * cin_ + c) * plane + static_cast<std::ptrdiff_t>(yy * w_) + shift;
      T* row = col_.data() + (c * k_ * k_ + tap) * cols + b * plane + yy * w_;
      for (std::size_t xx = xlo; xx < xhi; ++xx) row[xx] = in[xx];
    });
    std::vector<T> out(cout_ * cols, T(0));
    gemm::nn(cout_, cols, cin_ * k_ * k_, weight_.value.ptr(), col_.data(), out.data());
    detail::add_rows(out.data(), bias_.value, cols);
    Tensor<T> y({batch_, cout_, h_, w_});
    detail::from_channel_major(out.data(), y.ptr(), batch_, cout_, plane);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!col_.empty(), name());
    detail::check_input(g, {cout_, h_, w_}, name() + " grad");
    if (g.dim(0) != batch_) throw Error(ErrorCode::ShapeMismatch, "conv2d grad batch differs from forward");
    const std::size_t plane = h_ * w_;
    const std::size_t cols = batch_ * plane;
    const std::size_t depth = cin_ * k_ * k_;
    std::vector<T> gm(cout_ * cols);
    detail::to_channel_major(g.ptr(), gm.data(), batch_, cout_, plane);
    detail::sum_rows(gm.data(), bias_.grad, cols);
    gemm::nt(cout_, depth, cols, gm.data(), col_.data(), weight_.grad.ptr());
    std::vector<T> dcol(depth * cols, T(0));
    gemm::tn(cout_, cols, depth, weight_.value.ptr(), gm.data(), dcol.data());
    Tensor<T> dx({batch_, cin_, h_, w_});
    for_each_tap([&](std::size_t c, std::size_t tap, std::size_t b, std::size_t yy, std::size_t xlo,
                     std::size_t xhi, std::ptrdiff_t shift) {
      T* din = dx.ptr() + (b * cin_ + c) * plane + static_cast<std::ptrdiff_t>(yy * w_) + shift;
      const T* row = dcol.data() + (c * k_ * k_ + tap) * cols + b * plane + yy * w_;
      for (std::size_t xx = xlo; xx < xhi; ++xx) din[xx] += row[xx];
    });
    return dx;
  }

 private:
  std::pair<std::size_t, std::size_t> range(std::size_t k, std::size_t extent) const {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad_);
    const auto n = static_cast<std::ptrdiff_t>(extent);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
    const std::ptrdiff_t hi = std::max(lo, std::min(n, n - off));
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }

  // Visits every in-bounds (channel, tap, sample, output row) with the valid
  // column range and the flat input offset of that tap.
  template <class F>
  void for_each_tap(F&& f) const {
    for (std::size_t c = 0; c < cin_; ++c) {
      for (std::size_t ky = 0; ky < k_; ++ky) {
        const auto [ylo, yhi] = range(ky, h_);
        for (std::size_t kx = 0; kx < k_; ++kx) {
          const auto [xlo, xhi] = range(kx, w_);
          const std::ptrdiff_t shift = (static_cast<std::ptrdiff_t>(ky) - static_cast<std::ptrdiff_t>(pad_)) *
                                           static_cast<std::ptrdiff_t>(w_) +
                                       static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(pad_);
          for (std::size_t b = 0; b < batch_; ++b)
            for (std::size_t yy = ylo; yy < yhi; ++yy) f(c, ky * k_ + kx, b, yy, xlo, xhi, shift);
        }
      }
    }
  }

  std::size_t cin_, h_, w_, cout_, k_, pad_;
  Parameter<T> weight_, bias_;
  std::vector<T> col_;
  std::size_t batch_ = 0;
};

/// Per-channel normalization over batch and spatial positions. Channel is
/// dimension 1; a rank-1 sample shape means one channel per feature.
template <class T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

  explicit BatchNorm(Shape sample)
      : sample_(std::move(sample)), channels_(sample_.at(0)), spatial_(shape_size(sample_) / channels_),
        gamma_("gamma", {channels_}), beta_("beta", {channels_}), running_mean_({channels_}),
        running_var_({channels_}, T(1)) {
    std::fill(gamma_.value.data.begin(), gamma_.value.data.end(), T(1));
  }

  Shape output_shape() const override { return sample_; }
  std::string name() const override { return "batchnorm"; }
  std::vector<Parameter<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Tensor<T>*> buffers() override { return {&running_mean_, &running_var_}; }
  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

  Tensor<T> forward(const Tensor<T>& x, const Context& ctx) override {
    detail::check_input(x, sample_, name());
    const std::size_t batch = x.dim(0);
    training_ = ctx.training();
    if (training_ && batch < 2) throw Error(ErrorCode::BatchTooSmall, "batchnorm training needs batch >= 2");
    const std::size_t n = batch * spatial_;
    xhat_ = Tensor<T>(x.shape);
    inv_std_.assign(channels_, T(0));
    Tensor<T> y(x.shape);
    for (std::size_t c = 0; c < channels_; ++c) {
      double mean, var;
      if (training_) {
        double sum = 0.0;
        for_each(batch, c, [&](std::size_t i) { sum += static_cast<double>(x[i]); });
        mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for_each(batch, c, [&](std::size_t i) {
          const double d = static_cast<double>(x[i]) - mean;
          sq += d * d;
        });
        var = sq / static_cast<double>(n);
        const double unbiased = n > 1 ? sq / static_cast<double>(n - 1) : var;
        running_mean_[c] = static_cast<T>(kMomentum * static_cast<double>(running_mean_[c]) + (1.0 - kMomentum) * mean);
        running_var_[c] = static_cast<T>(kMomentum * static_cast<double>(running_var_[c]) + (1.0 - kMomentum) * unbiased);
      } else {
        mean = static_cast<double>(running_mean_[c]);
        var = static_cast<double>(running_var_[c]);
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
      inv_std_[c] = inv;
      const T m = static_cast<T>(mean);
      const T g = gamma_.value[c], bt = beta_.value[c];
      for_each(batch, c, [&](std::size_t i) {
        const T h = (x[i] - m) * inv;
        xhat_[i] = h;
        y[i] = g * h + bt;
      });
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!xhat_.empty(), name());
    detail::check_input(g, sample_, name() + " grad");
    const std::size_t batch = g.dim(0);
    const double n = static_cast<double>(batch * spatial_);
    Tensor<T> dx(g.shape);
    for (std::size_t c = 0; c < channels_; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      for_each(batch, c, [&](std::size_t i) {
        sum_g += static_cast<double>(g[i]);
        sum_gx += static_cast<double>(g[i]) * static_cast<double>(xhat_[i]);
      });
      gamma_.grad[c] += static_cast<T>(sum_gx);
      beta_.grad[c] += static_cast<T>(sum_g);
      const double scale = static_cast<double>(gamma_.value[c]) * static_cast<double>(inv_std_[c]);
      if (training_) {
        const double mg = sum_g / n, mgx = sum_gx / n;
        for_each(batch, c, [&](std::size_t i) {
          dx[i] = static_cast<T>(scale * (static_cast<double>(g[i]) - mg - static_cast<double>(xhat_[i]) * mgx));
        });
      } else {
        for_each(batch, c, [&](std::size_t i) { dx[i] = static_cast<T>(scale * static_cast<double>(g[i])); });
      }
    }
    return dx;
  }

 private:
  template <class F>
  void for_each(std::size_t batch, std::size_t c, F&& f) const {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * channels_ + c) * spatial_;
      for (std::size_t s = 0; s < spatial_; ++s) f(base + s);
    }
  }

  Shape sample_;
  std::size_t channels_, spatial_;
  Parameter<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  bool training_ = false;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

template <class T>
class ReLU final : public Layer<T> {
 public:
  explicit ReLU(Shape sample) : sample_(std::move(sample)) {}
  Shape output_shape() const override { return sample_; }
  std::string name() const override { return "relu"; }

  Tensor<T> forward(const Tensor<T>& x, const Context&) override {
    detail::check_input(x, sample_, name());
    Tensor<T> y = x;
    // NaN passes through so a diverged network still shows up in the loss.
    for (auto& v : y.data) v = v < T(0) ? T(0) : v;
    output_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!output_.empty(), name());
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(output_[i] > T(0))) dx[i] = T(0);
    }
    return dx;
  }

 private:
  Shape sample_;
  Tensor<T> output_;
};

/// Non-overlapping max pooling. 1D inputs must divide evenly; 2D inputs floor
/// odd extents (trailing rows/columns are dropped).
template <class T>
class MaxPool final : public Layer<T> {
 public:
  MaxPool(Shape sample, std::size_t factor) : in_(std::move(sample)), factor_(factor) {
    if (factor == 0) throw Error(ErrorCode::ShapeMismatch, "pool factor must be positive");
    if (in_.size() == 2) {
      if (in_[1] % factor != 0) {
        throw Error(ErrorCode::IndivisibleLength, "length " + std::to_string(in_[1]) + " not divisible by " +
                                                      std::to_string(factor));
      }
      out_ = {in_[0], in_[1] / factor};
    } else if (in_.size() == 3) {
      out_ = {in_[0], in_[1] / factor, in_[2] / factor};
      if (out_[1] == 0 || out_[2] == 0) throw Error(ErrorCode::ShapeMismatch, "2D pool collapses input");
    } else {
      throw Error(ErrorCode::ShapeMismatch, "maxpool expects [C,L] or [C,H,W] samples");
    }
  }

  Shape output_shape() const override { return out_; }
  std::string name() const override { return "maxpool"; }

  Tensor<T> forward(const Tensor<T>& x, const Context&) override {
    detail::check_input(x, in_, name());
    const std::size_t batch = x.dim(0);
    Tensor<T> y(detail::with_batch(batch, out_));
    argmax_.assign(y.size(), 0);
    if (in_.size() == 2) {
      const std::size_t rows = batch * in_[0], len = in_[1], olen = out_[1];
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t t = 0; t < olen; ++t) {
          std::size_t best = r * len + t * factor_;
          for (std::size_t j = 1; j < factor_; ++j) {
            const std::size_t i = r * len + t * factor_ + j;
            if (x[i] > x[best]) best = i;
          }
          y[r * olen + t] = x[best];
          argmax_[r * olen + t] = best;
        }
      }
    } else {
      const std::size_t planes = batch * in_[0], h = in_[1], w = in_[2], oh = out_[1], ow = out_[2];
      for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            std::size_t best = p * h * w + (oy * factor_) * w + ox * factor_;
            for (std::size_t dy = 0; dy < factor_; ++dy) {
              for (std::size_t dx = 0; dx < factor_; ++dx) {
                const std::size_t i = p * h * w + (oy * factor_ + dy) * w + ox * factor_ + dx;
                if (x[i] > x[best]) best = i;
              }
            }
            const std::size_t o = (p * oh + oy) * ow + ox;
            y[o] = x[best];
            argmax_[o] = best;
          }
        }
      }
    }
    input_shape_ = x.shape;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!input_shape_.empty(), name());
    Tensor<T> dx(input_shape_);
    for (std::size_t o = 0; o < g.size(); ++o) dx[argmax_[o]] += g[o];
    return dx;
  }

 private:
  Shape in_, out_;
  std::size_t factor_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Mean over all positions of each channel: [C, ...] -> [C].
template <class T>
class GlobalAvgPool final : public Layer<T> {
 public:
  explicit GlobalAvgPool(Shape sample) : in_(std::move(sample)), spatial_(shape_size(in_) / in_.at(0)) {}
  Shape output_shape() const override { return {in_[0]}; }
  std::string name() const override { return "gap"; }

  Tensor<T> forward(const Tensor<T>& x, const Context&) override {
    detail::check_input(x, in_, name());
    batch_ = x.dim(0);
    Tensor<T> y({batch_, in_[0]});
    for (std::size_t r = 0; r < y.size(); ++r) {
      T acc = 0;
      for (std::size_t s = 0; s < spatial_; ++s) acc += x[r * spatial_ + s];
      y[r] = acc / static_cast<T>(spatial_);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(batch_ > 0, name());
    Tensor<T> dx(detail::with_batch(batch_, in_));
    for (std::size_t r = 0; r < g.size(); ++r) {
      const T v = g[r] / static_cast<T>(spatial_);
      for (std::size_t s = 0; s < spatial_; ++s) dx[r * spatial_ + s] = v;
    }
    return dx;
  }

 private:
  Shape in_;
  std::size_t spatial_;
  std::size_t batch_ = 0;
};

template <class T>
class Flatten final : public Layer<T> {
 public:
  explicit Flatten(Shape sample) : in_(std::move(sample)) {}
  Shape output_shape() const override { return {shape_size(in_)}; }
  std::string name() const override { return "flatten"; }

  Tensor<T> forward(const Tensor<T>& x, const Context&) override {
    detail::check_input(x, in_, name());
    batch_ = x.dim(0);
    return Tensor<T>({batch_, shape_size(in_)}, x.data);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(batch_ > 0, name());
    return Tensor<T>(detail::with_batch(batch_, in_), g.data);
  }

 private:
  Shape in_;
  std::size_t batch_ = 0;
};

/// Fully connected: [In] -> [Out].
template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out, Rng& init)
      : in_(in), out_(out), weight_("weight", {out, in}), bias_("bias", {out}) {
    detail::he_uniform(weight_.value, in, init);
  }

  Shape output_shape() const override { return {out_}; }
  std::string name() const override { return "dense"; }
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

  Tensor<T> forward(const Tensor<T>& x, const Context&) override {
    detail::check_input(x, {in_}, name());
    input_ = x;
    const std::size_t batch = x.dim(0);
    Tensor<T> y({batch, out_});
    for (std::size_t b = 0; b < batch; ++b) std::copy_n(bias_.value.ptr(), out_, y.ptr() + b * out_);
    gemm::nt(batch, out_, in_, x.ptr(), weight_.value.ptr(), y.ptr());
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!input_.empty(), name());
    detail::check_input(g, {out_}, name() + " grad");
    const std::size_t batch = input_.dim(0);
    if (g.dim(0) != batch) throw Error(ErrorCode::ShapeMismatch, "dense grad batch differs from forward");
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += g[b * out_ + o];
    gemm::tn(batch, in_, out_, g.ptr(), input_.ptr(), weight_.grad.ptr());
    Tensor<T> dx(input_.shape);
    gemm::nn(batch, in_, out_, g.ptr(), weight_.value.ptr(), dx.ptr());
    return dx;
  }

 private:
  std::size_t in_, out_;
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) during training.
template <class T>
class Dropout final : public Layer<T> {
 public:
  Dropout(Shape sample, double rate) : sample_(std::move(sample)), rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::InvalidRate, "dropout rate " + std::to_string(rate));
  }
  Shape output_shape() const override { return sample_; }
  std::string name() const override { return "dropout"; }
  double rate() const { return rate_; }

  Tensor<T> forward(const Tensor<T>& x, const Context& ctx) override {
    detail::check_input(x, sample_, name());
    mask_.assign(x.size(), T(1));
    has_cache_ = true;
    if (!ctx.training() || rate_ == 0.0) return x;
    if (ctx.rng == nullptr) throw Error(ErrorCode::InvalidConfig, "dropout in training mode needs an rng");
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
      mask_[i] = ctx.rng->bernoulli(rate_) ? T(0) : keep_scale;
      y[i] *= mask_[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(has_cache_, name());
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
    return dx;
  }

 private:
  Shape sample_;
  double rate_;
  bool has_cache_ = false;
  std::vector<T> mask_;
};

/// Max-subtracted softmax over the last dimension of [N] samples.
template <class T>
class Softmax final : public Layer<T> {
 public:
  explicit Softmax(Shape sample) : sample_(std::move(sample)) {
    if (sample_.size() != 1) throw Error(ErrorCode::ShapeMismatch, "softmax expects flat samples");
  }
  Shape output_shape() const override { return sample_; }
  std::string name() const override { return "softmax"; }

  Tensor<T> forward(const Tensor<T>& x, const Context&) override {
    detail::check_input(x, sample_, name());
    const std::size_t n = sample_[0];
    Tensor<T> y(x.shape);
    for (std::size_t b = 0; b < x.dim(0); ++b) {
      const T* in = x.ptr() + b * n;
      T* out = y.ptr() + b * n;
      const T peak = *std::max_element(in, in + n);
      T sum = 0;
      for (std::size_t i = 0; i < n; ++i) sum += (out[i] = std::exp(in[i] - peak));
      for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
    }
    output_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    detail::require_cache(!output_.empty(), name());
    const std::size_t n = sample_[0];
    Tensor<T> dx(g.shape);
    for (std::size_t b = 0; b < g.dim(0); ++b) {
      T dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += g[b * n + i] * output_[b * n + i];
      for (std::size_t i = 0; i < n; ++i) dx[b * n + i] = output_[b * n + i] * (g[b * n + i] - dot);
    }
    return dx;
  }

 private:
  Shape sample_;
  Tensor<T> output_;
};

/// `repeats` identity blocks on [C, L]: each is conv-BN-ReLU-conv-BN, added to
/// the block input, then ReLU.
template <class T>
class ResidualStage final : public Layer<T> {
 public:
  ResidualStage(Shape sample, std::size_t repeats, std::size_t kernel, Rng& init) : sample_(std::move(sample)) {
    if (sample_.size() != 2) throw Error(ErrorCode::ShapeMismatch, "residual stage expects [C,L] samples");
    const std::size_t c = sample_[0], len = sample_[1];
    for (std::size_t r = 0; r < repeats; ++r) {
      Block b;
      b.conv1 = std::make_unique<Conv1d<T>>(c, len, c, kernel, 1, init);
      b.bn1 = std::make_unique<BatchNorm<T>>(sample_);
      b.relu1 = std::make_unique<ReLU<T>>(sample_);
      b.conv2 = std::make_unique<Conv1d<T>>(c, len, c, kernel, 1, init);
      b.bn2 = std::make_unique<BatchNorm<T>>(sample_);
      b.out = std::make_unique<ReLU<T>>(sample_);
      blocks_.push_back(std::move(b));
    }
  }

  Shape output_shape() const override { return sample_; }
  std::string name() const override { return "residual"; }
  std::size_t repeats() const { return blocks_.size(); }

  std::vector<Parameter<T>*> parameters() override {
    std::vector<Parameter<T>*> out;
    for (auto& b : blocks_) {
      for (Layer<T>* l : b.layers()) {
        for (auto* p : l->parameters()) out.push_back(p);
      }
    }
    return out;
  }

  std::vector<Tensor<T>*> buffers() override {
    std::vector<Tensor<T>*> out;
    for (auto& b : blocks_) {
      for (Layer<T>* l : b.layers()) {
        for (auto* t : l->buffers()) out.push_back(t);
      }
    }
    return out;
  }

  Tensor<T> forward(const Tensor<T>& x, const Context& ctx) override {
    detail::check_input(x, sample_, name());
    Tensor<T> cur = x;
    for (auto& b : blocks_) {
      Tensor<T> h = b.bn2->forward(b.conv2->forward(b.relu1->forward(b.bn1->forward(b.conv1->forward(cur, ctx), ctx), ctx), ctx), ctx);
      for (std::size_t i = 0; i < h.size(); ++i) h[i] += cur[i];
      cur = b.out->forward(h, ctx);
    }
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> grad = g;
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      const Tensor<T> sum_grad = it->out->backward(grad);
      Tensor<T> path = it->conv1->backward(it->bn1->backward(it->relu1->backward(it->conv2->backward(it->bn2->backward(sum_grad)))));
      for (std::size_t i = 0; i < path.size(); ++i) path[i] += sum_grad[i];
      grad = std::move(path);
    }
    return grad;
  }

  struct Block {
    std::unique_ptr<Conv1d<T>> conv1;
    std::unique_ptr<BatchNorm<T>> bn1;
    std::unique_ptr<ReLU<T>> relu1;
    std::unique_ptr<Conv1d<T>> conv2;
    std::unique_ptr<BatchNorm<T>> bn2;
    std::unique_ptr<ReLU<T>> out;

    std::vector<Layer<T>*> layers() { return {conv1.get(), bn1.get(), relu1.get(), conv2.get(), bn2.get(), out.get()}; }
  };

  std::vector<Block>& blocks() { return blocks_; }

 private:
  Shape sample_;
  std::vector<Block> blocks_;
};

}  // namespace kws::nn
