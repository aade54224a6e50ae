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

#include <algorithm>
#include <cmath>
#include <vector>

#include "geotag/errors.hpp"
#include "geotag/nn/tensor.hpp"

namespace geotag::nn {

inline constexpr double kProbClip = 1e-7;

template <typename Scalar>
struct HeadLoss {
  Scalar loss = 0;        // mean over batch of the per-sample class-mean BCE
  Mat<Scalar> grad_logits;  // d loss / d logits, batch x classes
};

/// Throws InvalidInputError unless every row is a one-hot vector.
template <typename Scalar>
void check_one_hot(const Mat<Scalar>& targets) {
  for (Index r = 0; r < targets.rows(); ++r) {
    int ones = 0;
    for (Index c = 0; c < targets.cols(); ++c) {
      const Scalar t = targets(r, c);
      if (t == Scalar(1)) {
        ++ones;
      } else if (t != Scalar(0)) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw InvalidInputError("loss target row " + std::to_string(r) + " is not one-hot");
  }
}

/// Mean binary cross-entropy of sigmoid probabilities, clipped to
/// [1e-7, 1 - 1e-7]. Inside the clip range the logit gradient is
/// (p - y) / (classes * batch); clipped cells get zero gradient.
template <typename Scalar>
HeadLoss<Scalar> bce_head_loss(const Mat<Scalar>& probs, const Mat<Scalar>& targets) {
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols()) {
    throw InvalidInputError("loss: prediction and target shapes differ");
  }
  check_one_hot(targets);
  const auto lo = static_cast<Scalar>(kProbClip);
  const auto hi = static_cast<Scalar>(1.0 - kProbClip);
  const auto denom = static_cast<Scalar>(probs.rows() * probs.cols());

  HeadLoss<Scalar> out;
  out.grad_logits.resize(probs.rows(), probs.cols());
  double total = 0.0;
  for (Index r = 0; r < probs.rows(); ++r) {
    for (Index c = 0; c < probs.cols(); ++c) {
      const Scalar p_raw = probs(r, c);
      const Scalar p = std::clamp(p_raw, lo, hi);
      const Scalar y = targets(r, c);
      total -= static_cast<double>(y * std::log(p) + (Scalar(1) - y) * std::log(Scalar(1) - p));
      out.grad_logits(r, c) = (p_raw >= lo && p_raw <= hi) ? (p_raw - y) / denom : Scalar(0);
    }
  }
  out.loss = static_cast<Scalar>(total / static_cast<double>(denom));
  return out;
}

template <typename Scalar>
struct LossResult {
  Scalar total = 0;              // sum of head losses + L2 penalty
  std::vector<Scalar> per_head;  // data term of each head
  std::vector<Mat<Scalar>> grad_logits;
};

/// Equally weighted sum of per-head BCE plus the given L2 penalty. Heads are
/// ordered as in the model config (scene then city for the multi-task net).
template <typename Scalar>
LossResult<Scalar> multitask_loss(const std::vector<Mat<Scalar>>& probs,
                                  const std::vector<Mat<Scalar>>& targets, Scalar l2_penalty) {
  if (probs.size() != targets.size()) throw InvalidInputError("loss: head count mismatch");
  LossResult<Scalar> out;
  out.total = l2_penalty;
  for (std::size_t h = 0; h < probs.size(); ++h) {
    HeadLoss<Scalar> head = bce_head_loss(probs[h], targets[h]);
    out.total += head.loss;
    out.per_head.push_back(head.loss);
    out.grad_logits.push_back(std::move(head.grad_logits));
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> one_hot(const std::vector<int>& labels, Index classes) {
  Mat<Scalar> t = Mat<Scalar>::Zero(static_cast<Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw InvalidInputError("label out of range");
    t(static_cast<Index>(i), labels[i]) = Scalar(1);
  }
  return t;
}

}  // namespace geotag::nn
