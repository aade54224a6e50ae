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
#include <json.hpp>
#include <vector>

#include "geotag/errors.hpp"
#include "geotag/nn/tensor.hpp"

namespace geotag::nn {

/// Defaults: lr 1e-4, beta1 0.9, beta2 0.999, no decay, no amsgrad.
struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  bool operator==(const AdamConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const AdamConfig& c) {
  j = nlohmann::json{{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
}

inline void from_json(const nlohmann::json& j, AdamConfig& c) {
  const AdamConfig d;
  c.lr = j.value("lr", d.lr);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.epsilon = j.value("epsilon", d.epsilon);
}

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::int64_t t = 0;
  std::vector<Vec<Scalar>> m;
  std::vector<Vec<Scalar>> v;
};

/// One bias-corrected Adam update over the trainable parameters:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   w <- w - lr * m_hat / (sqrt(v_hat) + eps)
/// Moments are created lazily on the first step. Throws NumericalError on a
/// non-finite gradient, before any parameter is touched.
template <typename Scalar>
void adam_step(const std::vector<Parameter<Scalar>*>& params, AdamState<Scalar>& state) {
  std::vector<Parameter<Scalar>*> trainable;
  for (auto* p : params) {
    if (!p->trainable) continue;
    if (!p->grad.allFinite()) throw NumericalError("non-finite gradient in parameter '" + p->name + "'");
    trainable.push_back(p);
  }
  if (state.m.empty()) {
    for (auto* p : trainable) {
      state.m.push_back(Vec<Scalar>::Zero(p->value.size()));
      state.v.push_back(Vec<Scalar>::Zero(p->value.size()));
    }
  }
  if (state.m.size() != trainable.size()) throw InvalidStateError("Adam state does not match parameters");

  ++state.t;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.t);
  const auto b1 = static_cast<Scalar>(c.beta1);
  const auto b2 = static_cast<Scalar>(c.beta2);
  const auto correction1 = static_cast<Scalar>(1.0 - std::pow(c.beta1, t));
  const auto correction2 = static_cast<Scalar>(1.0 - std::pow(c.beta2, t));
  const auto lr = static_cast<Scalar>(c.lr);
  const auto eps = static_cast<Scalar>(c.epsilon);

  for (std::size_t i = 0; i < trainable.size(); ++i) {
    auto& p = *trainable[i];
    if (state.m[i].size() != p.value.size()) throw InvalidStateError("Adam moment shape mismatch");
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * p.grad;
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
    const auto m_hat = (state.m[i] / correction1).array();
    const auto v_hat = (state.v[i] / correction2).array();
    p.value.array() -= lr * m_hat / (v_hat.sqrt() + eps);
  }
}

}  // namespace geotag::nn
