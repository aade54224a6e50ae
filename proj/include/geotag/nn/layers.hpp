/*
 Copyright 2026 The Geotag Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "geotag/errors.hpp"
#include "geotag/nn/tensor.hpp"
#include "geotag/rng.hpp"

namespace geotag::nn {

enum class LayerKind { Conv2D, BatchNorm, MaxPool2D, Dropout, GlobalAvgPool, Dense };

inline std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::BatchNorm: return "BatchNormalization";
    case LayerKind::MaxPool2D: return "MaxPooling2D";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::GlobalAvgPool: return "GlobalAveragePooling2D";
    case LayerKind::Dense: return "Dense";
  }
  return "unknown";
}

/// Glorot-uniform fill: U(-l, l), l = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
void glorot_uniform(Vec<Scalar>& w, Index fan_in, Index fan_out, CounterRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Index i = 0; i < w.size(); ++i) w(i) = static_cast<Scalar>(rng.uniform(-limit, limit));
}

/// Spatial layer of the convolutional backbone.
template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  /// Throws ShapeError when the layer cannot consume `in`.
  virtual Shape4 output_shape(const Shape4& in) const = 0;
  virtual Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) = 0;
  /// Gradient w.r.t. the input of the last forward call; parameter gradients
  /// are accumulated into Parameter::grad.
  virtual Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) = 0;
  virtual std::vector<Parameter<Scalar>*> parameters() { return {}; }
};

/// Stride-1 valid cross-correlation, lowered to GEMM through im2col.
template <typename Scalar>
class Conv2D final : public Layer<Scalar> {
 public:
  Conv2D(Index in_channels, Index filters, Index kernel_h, Index kernel_w)
      : in_c_(in_channels),
        filters_(filters),
        kh_(kernel_h),
        kw_(kernel_w),
        weight_("kernel", filters * in_channels * kernel_h * kernel_w),
        bias_("bias", filters) {
    if (kernel_h < 1 || kernel_w < 1) {
      throw ShapeError("Conv2D: kernel dims must be >= 1");
    }
  }

  LayerKind kind() const override { return LayerKind::Conv2D; }

  Shape4 output_shape(const Shape4& in) const override {
    if (in.c != in_c_) {
      throw ShapeError("Conv2D: expected " + std::to_string(in_c_) + " input channels, got " +
                       std::to_string(in.c));
    }
    if (in.h < kh_ || in.w < kw_) {
      throw ShapeError("Conv2D: kernel " + std::to_string(kh_) + "x" + std::to_string(kw_) +
                       " larger than input " + std::to_string(in.h) + "x" + std::to_string(in.w));
    }
    return {in.n, filters_, in.h - kh_ + 1, in.w - kw_ + 1};
  }

  void initialize(CounterRng& rng) {
    glorot_uniform(weight_.value, in_c_ * kh_ * kw_, filters_ * kh_ * kw_, rng);
    bias_.value.setZero();
  }

  /// The first layer of a network has no use for its input gradient.
  void set_input_grad(bool enabled) { input_grad_ = enabled; }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode) override {
    const Shape4 out_shape = output_shape(x.shape());
    Tensor4<Scalar> y(out_shape);
    RowMat<Scalar> cols(patch_size(), out_shape.h * out_shape.w);
    const auto w = weights();
    for (Index n = 0; n < x.shape().n; ++n) {
      im2col(x, n, out_shape, cols);
      auto out = y.sample(n);
      out.noalias() = w * cols;
      out.colwise() += bias_.value;
    }
    input_ = x;
    cached_ = true;
    return y;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    if (!cached_ || grad_out.shape() != output_shape(input_.shape())) {
      throw InvalidStateError("Conv2D::backward without a matching forward");
    }
    const Shape4 out_shape = grad_out.shape();
    Tensor4<Scalar> grad_x(input_grad_ ? input_.shape() : Shape4{});
    RowMat<Scalar> cols(patch_size(), out_shape.h * out_shape.w);
    RowMat<Scalar> grad_cols;
    auto grad_w = Eigen::Map<RowMat<Scalar>>(weight_.grad.data(), filters_, patch_size());
    const auto w = weights();
    for (Index n = 0; n < out_shape.n; ++n) {
      const auto g = grad_out.sample(n);
      bias_.grad += g.rowwise().sum();
      im2col(input_, n, out_shape, cols);
      grad_w.noalias() += g * cols.transpose();
      if (input_grad_) {
        grad_cols.noalias() = w.transpose() * g;
        col2im(grad_cols, n, out_shape, grad_x);
      }
    }
    return grad_x;
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&weight_, &bias_}; }

  Index filters() const { return filters_; }
  Index patch_size() const { return in_c_ * kh_ * kw_; }
  Eigen::Map<const RowMat<Scalar>> weights() const {
    return Eigen::Map<const RowMat<Scalar>>(weight_.value.data(), filters_, patch_size());
  }

 private:
  void im2col(const Tensor4<Scalar>& x, Index n, const Shape4& out, RowMat<Scalar>& cols) const {
    const Index in_w = x.shape().w;
    for (Index ci = 0; ci < in_c_; ++ci) {
      const Scalar* plane = x.plane_data(n, ci);
      for (Index i = 0; i < kh_; ++i) {
        for (Index j = 0; j < kw_; ++j) {
          Scalar* row = cols.row((ci * kh_ + i) * kw_ + j).data();
          for (Index oy = 0; oy < out.h; ++oy) {
            const Scalar* src = plane + (oy + i) * in_w + j;
            std::copy(src, src + out.w, row + oy * out.w);
          }
        }
      }
    }
  }

  void col2im(const RowMat<Scalar>& cols, Index n, const Shape4& out, Tensor4<Scalar>& grad_x) const {
    const Index in_w = grad_x.shape().w;
    for (Index ci = 0; ci < in_c_; ++ci) {
      Scalar* plane = grad_x.plane_data(n, ci);
      for (Index i = 0; i < kh_; ++i) {
        for (Index j = 0; j < kw_; ++j) {
          const Scalar* row = cols.row((ci * kh_ + i) * kw_ + j).data();
          for (Index oy = 0; oy < out.h; ++oy) {
            Scalar* dst = plane + (oy + i) * in_w + j;
            const Scalar* src = row + oy * out.w;
            for (Index ox = 0; ox < out.w; ++ox) dst[ox] += src[ox];
          }
        }
      }
    }
  }

  Index in_c_, filters_, kh_, kw_;
  Parameter<Scalar> weight_;  // filters x (in_c * kh * kw), row-major
  Parameter<Scalar> bias_;
  Tensor4<Scalar> input_;
  bool cached_ = false;
  bool input_grad_ = true;
};

/// Per-channel batch normalization over (batch, height, width). Running
/// statistics start uninitialized and are seeded by the first training batch.
template <typename Scalar>
class BatchNorm final : public Layer<Scalar> {
 public:
  BatchNorm(Index channels, double momentum = 0.99, double epsilon = 1e-3)
      : channels_(channels),
        momentum_(momentum),
        epsilon_(epsilon),
        gamma_("gamma", channels),
        beta_("beta", channels),
        running_mean_("moving_mean", channels, false),
        running_var_("moving_variance", channels, false),
        initialized_("initialized", 1, false) {
    gamma_.value.setOnes();
  }

  LayerKind kind() const override { return LayerKind::BatchNorm; }

  Shape4 output_shape(const Shape4& in) const override {
    if (in.c != channels_) {
      throw ShapeError("BatchNorm: expected " + std::to_string(channels_) + " channels, got " +
                       std::to_string(in.c));
    }
    return in;
  }

  bool stats_initialized() const { return initialized_.value(0) != Scalar(0); }

  void set_running_stats(const Vec<Scalar>& mean, const Vec<Scalar>& var) {
    running_mean_.value = mean;
    running_var_.value = var;
    initialized_.value(0) = Scalar(1);
  }
  const Vec<Scalar>& running_mean() const { return running_mean_.value; }
  const Vec<Scalar>& running_var() const { return running_var_.value; }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    const Shape4 s = output_shape(x.shape());
    const Index per_channel = s.n * s.h * s.w;
    if (per_channel == 0) throw ShapeError("BatchNorm: empty input");
    Tensor4<Scalar> y(s);
    normalized_ = Tensor4<Scalar>(s);
    inv_std_.resize(channels_);
    mode_ = mode;

    if (mode == Mode::Eval && !stats_initialized()) {
      throw InvalidStateError("BatchNorm: eval mode before running statistics were initialized");
    }

    Vec<Scalar> mean(channels_), var(channels_);
    for (Index c = 0; c < channels_; ++c) {
      if (mode == Mode::Train) {
        double sum = 0.0;
        for (Index n = 0; n < s.n; ++n) sum += x.plane(n, c).template cast<double>().sum();
        const double mu = sum / static_cast<double>(per_channel);
        double sq = 0.0;
        for (Index n = 0; n < s.n; ++n) {
          sq += (x.plane(n, c).template cast<double>().array() - mu).square().sum();
        }
        mean(c) = static_cast<Scalar>(mu);
        var(c) = static_cast<Scalar>(sq / static_cast<double>(per_channel));
      } else {
        mean(c) = running_mean_.value(c);
        var(c) = running_var_.value(c);
      }
      inv_std_(c) = Scalar(1) / std::sqrt(var(c) + static_cast<Scalar>(epsilon_));
      for (Index n = 0; n < s.n; ++n) {
        normalized_.plane(n, c) = (x.plane(n, c).array() - mean(c)) * inv_std_(c);
        y.plane(n, c) = gamma_.value(c) * normalized_.plane(n, c).array() + beta_.value(c);
      }
    }

    if (mode == Mode::Train) {
      if (!stats_initialized()) {
        set_running_stats(mean, var);
      } else {
        const auto m = static_cast<Scalar>(momentum_);
        running_mean_.value = m * running_mean_.value + (Scalar(1) - m) * mean;
        running_var_.value = m * running_var_.value + (Scalar(1) - m) * var;
      }
    }
    cached_ = true;
    return y;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    if (!cached_ || grad_out.shape() != normalized_.shape()) {
      throw InvalidStateError("BatchNorm::backward without a matching forward");
    }
    const Shape4 s = grad_out.shape();
    const auto count = static_cast<Scalar>(s.n * s.h * s.w);
    Tensor4<Scalar> grad_x(s);
    for (Index c = 0; c < channels_; ++c) {
      Scalar dbeta = 0, dgamma = 0;
      for (Index n = 0; n < s.n; ++n) {
        dbeta += grad_out.plane(n, c).sum();
        dgamma += (grad_out.plane(n, c).array() * normalized_.plane(n, c).array()).sum();
      }
      beta_.grad(c) += dbeta;
      gamma_.grad(c) += dgamma;
      const Scalar scale = gamma_.value(c) * inv_std_(c);
      for (Index n = 0; n < s.n; ++n) {
        if (mode_ == Mode::Train) {
          grad_x.plane(n, c) = (scale / count) * (count * grad_out.plane(n, c).array() - dbeta -
                                                  normalized_.plane(n, c).array() * dgamma);
        } else {
          grad_x.plane(n, c) = scale * grad_out.plane(n, c).array();
        }
      }
    }
    return grad_x;
  }

  std::vector<Parameter<Scalar>*> parameters() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_, &initialized_};
  }

 private:
  Index channels_;
  double momentum_, epsilon_;
  Parameter<Scalar> gamma_, beta_, running_mean_, running_var_, initialized_;
  Tensor4<Scalar> normalized_;
  Vec<Scalar> inv_std_;
  Mode mode_ = Mode::Train;
  bool cached_ = false;
};

/// Max pooling with 'same' padding: out = ceil(in / stride), the input padded
/// with -inf, any odd padding cell going to the trailing edge. Gradients flow
/// to the first row-major maximum of each window.
template <typename Scalar>
class MaxPool2D final : public Layer<Scalar> {
 public:
  MaxPool2D(Index pool_h, Index pool_w, Index stride_h, Index stride_w)
      : ph_(pool_h), pw_(pool_w), sh_(stride_h), sw_(stride_w) {
    if (pool_h < 1 || pool_w < 1 || stride_h < 1 || stride_w < 1) {
      throw ShapeError("MaxPool2D: pool size and strides must be >= 1");
    }
  }

  LayerKind kind() const override { return LayerKind::MaxPool2D; }

  static Index same_out(Index in, Index stride) { return (in + stride - 1) / stride; }
  static Index same_pad_before(Index in, Index pool, Index stride) {
    const Index total = std::max<Index>((same_out(in, stride) - 1) * stride + pool - in, 0);
    return total / 2;
  }

  Shape4 output_shape(const Shape4& in) const override {
    if (in.h < 1 || in.w < 1) throw ShapeError("MaxPool2D: empty spatial input");
    return {in.n, in.c, same_out(in.h, sh_), same_out(in.w, sw_)};
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode) override {
    const Shape4 in = x.shape();
    const Shape4 s = output_shape(in);
    const Index top = same_pad_before(in.h, ph_, sh_);
    const Index left = same_pad_before(in.w, pw_, sw_);
    Tensor4<Scalar> y(s);
    argmax_.resize(s.size());
    Index o = 0;
    for (Index n = 0; n < s.n; ++n) {
      for (Index c = 0; c < s.c; ++c) {
        const Scalar* plane = x.plane_data(n, c);
        const Index plane_offset = x.offset(n, c, 0, 0);
        for (Index oy = 0; oy < s.h; ++oy) {
          const Index y0 = std::max<Index>(oy * sh_ - top, 0);
          const Index y1 = std::min<Index>(oy * sh_ - top + ph_, in.h);
          for (Index ox = 0; ox < s.w; ++ox, ++o) {
            const Index x0 = std::max<Index>(ox * sw_ - left, 0);
            const Index x1 = std::min<Index>(ox * sw_ - left + pw_, in.w);
            Scalar best = -std::numeric_limits<Scalar>::infinity();
            Index best_at = y0 * in.w + x0;
            for (Index yy = y0; yy < y1; ++yy) {
              for (Index xx = x0; xx < x1; ++xx) {
                const Scalar v = plane[yy * in.w + xx];
                if (v > best) {
                  best = v;
                  best_at = yy * in.w + xx;
                }
              }
            }
            y.data()(o) = best;
            argmax_[o] = static_cast<std::int32_t>(plane_offset + best_at);
          }
        }
      }
    }
    in_shape_ = in;
    out_shape_ = s;
    cached_ = true;
    return y;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    if (!cached_ || grad_out.shape() != out_shape_) {
      throw InvalidStateError("MaxPool2D::backward without a matching forward");
    }
    Tensor4<Scalar> grad_x(in_shape_);
    for (Index o = 0; o < grad_out.shape().size(); ++o) grad_x.data()(argmax_[o]) += grad_out.data()(o);
    return grad_x;
  }

 private:
  Index ph_, pw_, sh_, sw_;
  std::vector<std::int32_t> argmax_;
  Shape4 in_shape_, out_shape_;
  bool cached_ = false;
};

/// Inverted dropout. Each training forward call draws its mask from a fresh
/// sub-stream of the layer seed, so a run is reproducible from that seed.
template <typename Scalar>
class Dropout final : public Layer<Scalar> {
 public:
  explicit Dropout(double p, std::uint64_t seed = 0) : p_(p), seed_(seed) {
    if (!(p >= 0.0 && p < 1.0)) throw ShapeError("Dropout: probability must lie in [0, 1)");
  }

  LayerKind kind() const override { return LayerKind::Dropout; }
  Shape4 output_shape(const Shape4& in) const override { return in; }

  void reseed(std::uint64_t seed) {
    seed_ = seed;
    calls_ = 0;
  }
  double probability() const { return p_; }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    shape_ = x.shape();
    train_ = mode == Mode::Train && p_ > 0.0;
    if (!train_) return x;
    CounterRng rng(seed_, calls_++);
    const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - p_));
    mask_.resize(x.data().size());
    for (Index i = 0; i < mask_.size(); ++i) mask_(i) = rng.uniform() < p_ ? Scalar(0) : keep_scale;
    Tensor4<Scalar> y(shape_);
    y.data() = x.data().cwiseProduct(mask_);
    return y;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    if (grad_out.shape() != shape_) throw InvalidStateError("Dropout::backward shape mismatch");
    if (!train_) return grad_out;
    Tensor4<Scalar> g(shape_);
    g.data() = grad_out.data().cwiseProduct(mask_);
    return g;
  }

 private:
  double p_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
  Vec<Scalar> mask_;
  Shape4 shape_;
  bool train_ = false;
};

/// Mean over height x width; output is batch x channels.
template <typename Scalar>
class GlobalAvgPool {
 public:
  Mat<Scalar> forward(const Tensor4<Scalar>& x) {
    const Shape4 s = x.shape();
    if (s.h < 1 || s.w < 1) throw ShapeError("GlobalAvgPool: empty spatial input");
    Mat<Scalar> y(s.n, s.c);
    for (Index n = 0; n < s.n; ++n) y.row(n) = x.sample(n).rowwise().mean().transpose();
    shape_ = s;
    return y;
  }

  Tensor4<Scalar> backward(const Mat<Scalar>& grad_out) const {
    if (grad_out.rows() != shape_.n || grad_out.cols() != shape_.c) {
      throw InvalidStateError("GlobalAvgPool::backward shape mismatch");
    }
    Tensor4<Scalar> g(shape_);
    const auto scale = Scalar(1) / static_cast<Scalar>(shape_.h * shape_.w);
    for (Index n = 0; n < shape_.n; ++n) {
      g.sample(n).colwise() = (grad_out.row(n).transpose() * scale).eval();
    }
    return g;
  }

 private:
  Shape4 shape_;
};

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

/// Fully connected layer with sigmoid activation and an L2 kernel penalty
/// lambda * sum(w^2).
template <typename Scalar>
class Dense {
 public:
  Dense(Index inputs, Index units, double l2_lambda)
      : inputs_(inputs), units_(units), l2_(l2_lambda), weight_("kernel", units * inputs), bias_("bias", units) {}

  void initialize(CounterRng& rng) {
    glorot_uniform(weight_.value, inputs_, units_, rng);
    bias_.value.setZero();
  }

  Eigen::Map<RowMat<Scalar>> weights() {
    return Eigen::Map<RowMat<Scalar>>(weight_.value.data(), units_, inputs_);
  }
  Eigen::Map<const RowMat<Scalar>> weights() const {
    return Eigen::Map<const RowMat<Scalar>>(weight_.value.data(), units_, inputs_);
  }

  /// Probabilities, batch x units.
  Mat<Scalar> forward(const Mat<Scalar>& x) {
    if (x.cols() != inputs_) {
      throw ShapeError("Dense: expected " + std::to_string(inputs_) + " inputs, got " +
                       std::to_string(x.cols()));
    }
    input_ = x;
    Mat<Scalar> logits = x * weights().transpose();
    logits.rowwise() += bias_.value.transpose();
    probs_ = logits.unaryExpr([](Scalar z) { return sigmoid(z); });
    return probs_;
  }

  /// Backward from the pre-sigmoid logits; also adds the L2 gradient 2*lambda*w.
  Mat<Scalar> backward_logits(const Mat<Scalar>& grad_logits) {
    if (grad_logits.rows() != input_.rows() || grad_logits.cols() != units_) {
      throw InvalidStateError("Dense::backward shape mismatch");
    }
    auto grad_w = Eigen::Map<RowMat<Scalar>>(weight_.grad.data(), units_, inputs_);
    grad_w.noalias() += grad_logits.transpose() * input_;
    grad_w += static_cast<Scalar>(2.0 * l2_) * weights();
    bias_.grad += grad_logits.colwise().sum().transpose();
    return grad_logits * weights();
  }

  /// Backward from the probabilities (chains through the sigmoid derivative).
  Mat<Scalar> backward(const Mat<Scalar>& grad_probs) {
    return backward_logits(grad_probs.cwiseProduct(probs_.cwiseProduct(
        (Mat<Scalar>::Ones(probs_.rows(), probs_.cols()) - probs_))));
  }

  Scalar penalty() const { return static_cast<Scalar>(l2_) * weight_.value.squaredNorm(); }

  std::vector<Parameter<Scalar>*> parameters() { return {&weight_, &bias_}; }
  Index units() const { return units_; }
  Index inputs() const { return inputs_; }
  double l2_lambda() const { return l2_; }

 private:
  Index inputs_, units_;
  double l2_;
  Parameter<Scalar> weight_, bias_;
  Mat<Scalar> input_, probs_;
};

}  // namespace geotag::nn
