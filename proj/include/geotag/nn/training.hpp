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
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "geotag/labels.hpp"
#include "geotag/nn/model.hpp"

namespace geotag::nn {

/// One labeled log-mel feature (n_mels x frames).
struct Example {
  Eigen::MatrixXf features;
  int city = 0;
  int scene = 0;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // sample-weighted mean training loss, L2 included
  // Accuracies of the training-mode forward passes during the epoch.
  std::optional<double> scene_accuracy;
  std::optional<double> city_accuracy;
  // Eval-mode accuracy over the whole training set, when it was computed.
  std::optional<double> eval_city_accuracy;
  std::optional<double> val_loss;
  std::optional<double> val_city_accuracy;
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainOptions {
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
  int patience = 20;  // early stop on validation loss; 0 disables
  // Stop once the eval-mode training city accuracy reaches this fraction.
  std::optional<double> target_city_accuracy;
  int min_epochs = 0;  // no early or target stop before this epoch
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::string stop_reason;
};

/// Per-band mean and standard deviation over every frame of every example.
FeatureNorm compute_feature_norm(const std::vector<Example>& examples);

/// Copies examples[indices] into a batch x 1 x n_mels x frames tensor.
template <typename Scalar>
Tensor4<Scalar> make_batch(const std::vector<Example>& examples, const std::vector<std::size_t>& indices,
                           const Shape4& sample_shape) {
  Tensor4<Scalar> x(Shape4{static_cast<Index>(indices.size()), 1, sample_shape.h, sample_shape.w});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Eigen::MatrixXf& f = examples.at(indices[b]).features;
    if (f.rows() != sample_shape.h || f.cols() != sample_shape.w) {
      throw ShapeError("feature " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                       " does not match model input " + std::to_string(sample_shape.h) + "x" +
                       std::to_string(sample_shape.w));
    }
    x.plane(static_cast<Index>(b), 0) = f.cast<Scalar>();
  }
  return x;
}

/// Label of each example for the named head ("scene" or "city").
inline int head_label(const Example& e, const std::string& head) {
  if (head == "scene") return e.scene;
  if (head == "city") return e.city;
  throw InvalidInputError("no labels for head '" + head + "'");
}

/// Eval-mode probabilities for every example, one batch x units matrix per head.
template <typename Scalar>
std::vector<Mat<Scalar>> predict(Model<Scalar>& model, const std::vector<Example>& examples,
                                 int batch_size = 32) {
  std::vector<Mat<Scalar>> out;
  for (std::size_t h = 0; h < model.head_count(); ++h) {
    out.push_back(Mat<Scalar>(static_cast<Index>(examples.size()), model.head(h).dense.units()));
  }
  const Shape4 shape = model.input_shape(1);
  for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(examples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto probs = model.forward(make_batch<Scalar>(examples, idx, shape), Mode::Eval);
    for (std::size_t h = 0; h < probs.size(); ++h) {
      out[h].middleRows(static_cast<Index>(start), static_cast<Index>(idx.size())) = probs[h];
    }
  }
  return out;
}

namespace detail {

template <typename Scalar>
struct PassStats {
  double loss = 0.0;
  std::vector<std::size_t> correct;
  std::size_t count = 0;
};

template <typename Scalar>
std::vector<Mat<Scalar>> batch_targets(const Model<Scalar>& model, const std::vector<Example>& examples,
                                       const std::vector<std::size_t>& idx) {
  std::vector<Mat<Scalar>> targets;
  for (std::size_t h = 0; h < model.head_count(); ++h) {
    std::vector<int> labels;
    for (std::size_t i : idx) labels.push_back(head_label(examples[i], model.head(h).name));
    targets.push_back(one_hot<Scalar>(labels, model.head(h).dense.units()));
  }
  return targets;
}

template <typename Scalar>
void tally(const Model<Scalar>& model, const std::vector<Mat<Scalar>>& probs,
           const std::vector<Example>& examples, const std::vector<std::size_t>& idx, PassStats<Scalar>& stats) {
  stats.correct.resize(model.head_count(), 0);
  for (std::size_t h = 0; h < probs.size(); ++h) {
    const auto predicted = argmax_rows(probs[h]);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      if (predicted[b] == head_label(examples[idx[b]], model.head(h).name)) ++stats.correct[h];
    }
  }
  stats.count += idx.size();
}

template <typename Scalar>
PassStats<Scalar> evaluate_pass(Model<Scalar>& model, const std::vector<Example>& examples, int batch_size) {
  PassStats<Scalar> stats;
  stats.correct.assign(model.head_count(), 0);
  const Shape4 shape = model.input_shape(1);
  const double penalty = static_cast<double>(model.l2_penalty());
  for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(examples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto probs = model.forward(make_batch<Scalar>(examples, idx, shape), Mode::Eval);
    const auto loss = multitask_loss(probs, batch_targets(model, examples, idx), Scalar(0));
    stats.loss += static_cast<double>(loss.total) * static_cast<double>(idx.size());
    tally(model, probs, examples, idx, stats);
  }
  if (stats.count > 0) stats.loss = stats.loss / static_cast<double>(stats.count) + penalty;
  return stats;
}

template <typename Scalar>
std::optional<double> head_accuracy(const Model<Scalar>& model, const PassStats<Scalar>& stats,
                                    const std::string& head) {
  const auto h = model.head_index(head);
  if (!h || stats.count == 0) return std::nullopt;
  return static_cast<double>(stats.correct[*h]) / static_cast<double>(stats.count);
}

}  // namespace detail

/// Mini-batch training with a seeded per-epoch shuffle, Adam updates and
/// training-mode dropout/batchnorm. Single-threaded and deterministic given
/// the seed. Throws NumericalError (naming epoch and batch) on a non-finite
/// loss.
template <typename Scalar>
TrainResult train(Model<Scalar>& model, AdamState<Scalar>& adam, const std::vector<Example>& train_set,
                  const std::vector<Example>& validation_set, const TrainOptions& options) {
  if (train_set.empty()) throw InvalidInputError("train: empty training set");
  if (options.batch_size < 1) throw InvalidInputError("train: batch size must be >= 1");

  TrainResult result;
  model.reseed_dropout(hash_combine(options.seed, 0xd509));
  const Shape4 shape = model.input_shape(1);
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng shuffle(options.seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle.uniform_int(0, i)]);
    }

    detail::PassStats<Scalar> stats;
    stats.correct.assign(model.head_count(), 0);
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      ++batch_no;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<Mat<Scalar>> probs;
      LossResult<Scalar> loss;
      try {
        probs = model.forward(make_batch<Scalar>(train_set, idx, shape), Mode::Train);
        loss = multitask_loss(probs, detail::batch_targets(model, train_set, idx), model.l2_penalty());
        if (!std::isfinite(static_cast<double>(loss.total))) throw NumericalError("non-finite loss");
        model.zero_grad();
        model.backward(loss.grad_logits);
        adam_step(model.parameters(), adam);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no) +
                             ": " + e.what());
      }
      stats.loss += static_cast<double>(loss.total) * static_cast<double>(idx.size());
      detail::tally(model, probs, train_set, idx, stats);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = stats.loss / static_cast<double>(stats.count);
    record.scene_accuracy = detail::head_accuracy(model, stats, "scene");
    record.city_accuracy = detail::head_accuracy(model, stats, "city");

    const bool last = epoch == options.epochs;
    const bool near_target = options.target_city_accuracy && record.city_accuracy &&
                             *record.city_accuracy >= *options.target_city_accuracy;
    if (last || near_target) {
      record.eval_city_accuracy =
          detail::head_accuracy(model, detail::evaluate_pass(model, train_set, options.batch_size), "city");
    }

    std::string stop;
    if (!validation_set.empty()) {
      const auto val = detail::evaluate_pass(model, validation_set, options.batch_size);
      record.val_loss = val.loss;
      record.val_city_accuracy = detail::head_accuracy(model, val, "city");
      if (val.loss < best_val) {
        best_val = val.loss;
        since_best = 0;
      } else if (options.patience > 0 && ++since_best >= options.patience) {
        stop = "early stop: validation loss flat for " + std::to_string(options.patience) + " epochs";
      }
    }
    if (options.target_city_accuracy && record.eval_city_accuracy &&
        *record.eval_city_accuracy >= *options.target_city_accuracy) {
      stop = "reached target city accuracy";
    }

    result.history.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
    if (!stop.empty() && epoch >= options.min_epochs) {
      result.stop_reason = stop;
      return result;
    }
  }
  result.stop_reason = "completed " + std::to_string(options.epochs) + " epochs";
  return result;
}

}  // namespace geotag::nn
