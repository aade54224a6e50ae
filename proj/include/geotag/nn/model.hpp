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

#include <cstdint>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geotag/nn/adam.hpp"
#include "geotag/nn/layers.hpp"
#include "geotag/nn/loss.hpp"

namespace geotag::nn {

struct LayerSpec {
  LayerKind kind = LayerKind::Conv2D;
  Index filters = 0;            // Conv2D
  Index kernel_h = 0, kernel_w = 0;
  Index pool_h = 0, pool_w = 0;  // MaxPool2D
  Index stride = 1;
  std::string padding = "valid";
  double drop_prob = 0.0;  // Dropout

  static LayerSpec conv(Index filters, Index kernel) {
    return {LayerKind::Conv2D, filters, kernel, kernel, 0, 0, 1, "valid", 0.0};
  }
  static LayerSpec batchnorm() { return {LayerKind::BatchNorm}; }
  static LayerSpec maxpool(Index pool, Index stride) {
    return {LayerKind::MaxPool2D, 0, 0, 0, pool, pool, stride, "same", 0.0};
  }
  static LayerSpec dropout(double p) { return {LayerKind::Dropout, 0, 0, 0, 0, 0, 1, "valid", p}; }

  bool operator==(const LayerSpec&) const = default;
};

struct HeadSpec {
  std::string name;
  Index units = 0;
  double l2_lambda = 0.001;
  bool operator==(const HeadSpec&) const = default;
};

/// Per-mel-band standardization applied to the network input.
struct FeatureNorm {
  std::vector<double> mean;
  std::vector<double> stddev;
  bool operator==(const FeatureNorm&) const = default;
};

struct ModelConfig {
  std::string architecture = "multitask";
  Index input_channels = 1;
  Index input_height = 128;
  Index input_width = 431;
  std::vector<LayerSpec> backbone;
  std::vector<HeadSpec> heads;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;
  AdamConfig adam;
  std::optional<FeatureNorm> norm;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);
void to_json(nlohmann::json& j, const HeadSpec& s);
void from_json(const nlohmann::json& j, HeadSpec& s);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Rows 1-16 of the large CNN: four conv/batchnorm/maxpool/dropout blocks.
std::vector<LayerSpec> large_cnn_backbone();

/// Scene (10-way) and city (6-way) heads over the shared backbone.
ModelConfig multitask_config(Index input_width = 431);
/// City head only.
ModelConfig singletask_config(Index input_width = 431);
/// Two small conv blocks on an 8x16 input; used for end-to-end gradient checks.
ModelConfig miniature_config();

/// Throws ValidationError for configs violating the architecture invariants.
void validate(const ModelConfig& config);

struct TraceEntry {
  int row = 0;  // 1-based layer number
  LayerKind kind = LayerKind::Conv2D;
  std::string head;  // empty for backbone layers
  Shape4 output;     // batch dimension 1
  Index parameter_count = 0;
};

template <typename Scalar>
class Model {
 public:
  struct Head {
    std::string name;
    GlobalAvgPool<Scalar> pool;
    Dense<Scalar> dense;
  };

  /// Instantiates and initializes every layer (Glorot-uniform weights, zero
  /// biases), tracing shapes from the configured input.
  Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    validate(config_);
    CounterRng init(seed, 0);
    Shape4 shape{1, config_.input_channels, config_.input_height, config_.input_width};
    int row = 0;
    for (const LayerSpec& spec : config_.backbone) {
      ++row;
      std::unique_ptr<Layer<Scalar>> layer;
      switch (spec.kind) {
        case LayerKind::Conv2D: {
          auto conv = std::make_unique<Conv2D<Scalar>>(shape.c, spec.filters, spec.kernel_h, spec.kernel_w);
          conv->initialize(init);
          if (row == 1) conv->set_input_grad(false);
          layer = std::move(conv);
          break;
        }
        case LayerKind::BatchNorm:
          layer = std::make_unique<BatchNorm<Scalar>>(shape.c, config_.bn_momentum, config_.bn_epsilon);
          break;
        case LayerKind::MaxPool2D:
          layer = std::make_unique<MaxPool2D<Scalar>>(spec.pool_h, spec.pool_w, spec.stride, spec.stride);
          break;
        case LayerKind::Dropout:
          layer = std::make_unique<Dropout<Scalar>>(spec.drop_prob, hash_combine(seed, static_cast<std::uint64_t>(row)));
          break;
        default:
          throw ShapeError("layer " + std::to_string(row) + ": " + to_string(spec.kind) +
                           " is not a backbone layer");
      }
      try {
        shape = layer->output_shape(shape);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(row) + " (" + to_string(spec.kind) + "): " + e.what());
      }
      Index count = 0;
      for (auto* p : layer->parameters()) count += p->trainable ? p->value.size() : 0;
      for (auto* p : layer->parameters()) p->name = "layer" + std::to_string(row) + "/" + p->name;
      trace_.push_back({row, spec.kind, "", shape, count});
      layers_.push_back(std::move(layer));
    }
    backbone_shape_ = shape;
    for (const HeadSpec& spec : config_.heads) {
      Head head{spec.name, GlobalAvgPool<Scalar>{}, Dense<Scalar>(shape.c, spec.units, spec.l2_lambda)};
      head.dense.initialize(init);
      trace_.push_back({++row, LayerKind::GlobalAvgPool, spec.name, Shape4{1, shape.c, 1, 1}, 0});
      for (auto* p : head.dense.parameters()) p->name = "layer" + std::to_string(row + 1) + "/" + p->name;
      trace_.push_back({++row, LayerKind::Dense, spec.name, Shape4{1, spec.units, 1, 1},
                        spec.units * shape.c + spec.units});
      heads_.push_back(std::move(head));
    }
  }

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  std::size_t head_count() const { return heads_.size(); }
  const Head& head(std::size_t i) const { return heads_.at(i); }
  std::optional<std::size_t> head_index(const std::string& name) const {
    for (std::size_t i = 0; i < heads_.size(); ++i) {
      if (heads_[i].name == name) return i;
    }
    return std::nullopt;
  }
  Layer<Scalar>& layer(std::size_t i) { return *layers_.at(i); }
  std::size_t layer_count() const { return layers_.size(); }

  Shape4 input_shape(Index batch) const {
    return {batch, config_.input_channels, config_.input_height, config_.input_width};
  }

  /// Per-head sigmoid probabilities, each batch x units.
  std::vector<Mat<Scalar>> forward(const Tensor4<Scalar>& x, Mode mode) {
    const Shape4 expected = input_shape(x.shape().n);
    if (x.shape() != expected) {
      throw ShapeError("model input " + x.shape().str() + " does not match " + expected.str());
    }
    Tensor4<Scalar> h = normalize(x);
    for (auto& layer : layers_) h = layer->forward(h, mode);
    if (!h.all_finite()) throw NumericalError("non-finite activations in the backbone");
    std::vector<Mat<Scalar>> out;
    for (auto& head : heads_) out.push_back(head.dense.forward(head.pool.forward(h)));
    return out;
  }

  /// Accumulates parameter gradients from per-head logit gradients.
  void backward(const std::vector<Mat<Scalar>>& grad_logits) {
    if (grad_logits.size() != heads_.size()) throw InvalidStateError("backward: head count mismatch");
    Tensor4<Scalar> g;
    for (std::size_t i = 0; i < heads_.size(); ++i) {
      Tensor4<Scalar> gi = heads_[i].pool.backward(heads_[i].dense.backward_logits(grad_logits[i]));
      if (i == 0) {
        g = std::move(gi);
      } else {
        g.data() += gi.data();
      }
    }
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (auto& layer : layers_) {
      for (auto* p : layer->parameters()) out.push_back(p);
    }
    for (auto& head : heads_) {
      for (auto* p : head.dense.parameters()) out.push_back(p);
    }
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->grad.setZero();
  }

  Scalar l2_penalty() const {
    Scalar total = 0;
    for (const auto& head : heads_) total += head.dense.penalty();
    return total;
  }

  void reseed_dropout(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (auto* d = dynamic_cast<Dropout<Scalar>*>(layers_[i].get())) {
        d->reseed(hash_combine(seed, static_cast<std::uint64_t>(i + 1)));
      }
    }
  }

  void set_norm(std::optional<FeatureNorm> norm) {
    config_.norm = std::move(norm);
    validate(config_);
  }

 private:
  Tensor4<Scalar> normalize(const Tensor4<Scalar>& x) const {
    if (!config_.norm) return x;
    Tensor4<Scalar> y = x;
    const auto& mean = config_.norm->mean;
    const auto& sd = config_.norm->stddev;
    for (Index n = 0; n < x.shape().n; ++n) {
      for (Index c = 0; c < x.shape().c; ++c) {
        auto plane = y.plane(n, c);
        for (Index r = 0; r < x.shape().h; ++r) {
          plane.row(r).array() = (plane.row(r).array() - static_cast<Scalar>(mean[r])) /
                                 static_cast<Scalar>(sd[r]);
        }
      }
    }
    return y;
  }

  ModelConfig config_;
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
  std::vector<Head> heads_;
  std::vector<TraceEntry> trace_;
  Shape4 backbone_shape_;
};

/// Index of the largest probability in each row.
template <typename Scalar>
std::vector<int> argmax_rows(const Mat<Scalar>& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Index r = 0; r < probs.rows(); ++r) {
    Index best;
    probs.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace geotag::nn
