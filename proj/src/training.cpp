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

#include "geotag/nn/training.hpp"

namespace geotag::nn {

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"loss", r.loss}};
  const auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("scene_accuracy", r.scene_accuracy);
  put("city_accuracy", r.city_accuracy);
  put("eval_city_accuracy", r.eval_city_accuracy);
  put("val_loss", r.val_loss);
  put("val_city_accuracy", r.val_city_accuracy);
  return j;
}

FeatureNorm compute_feature_norm(const std::vector<Example>& examples) {
  if (examples.empty()) throw InvalidInputError("feature norm: no examples");
  const Index bands = examples.front().features.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(bands);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(bands);
  double count = 0.0;
  for (const Example& e : examples) {
    if (e.features.rows() != bands) throw ShapeError("feature norm: inconsistent band count");
    const Eigen::MatrixXd f = e.features.cast<double>();
    sum += f.rowwise().sum();
    sq += f.array().square().matrix().rowwise().sum();
    count += static_cast<double>(f.cols());
  }
  FeatureNorm norm;
  for (Index b = 0; b < bands; ++b) {
    const double mean = sum(b) / count;
    const double var = std::max(sq(b) / count - mean * mean, 0.0);
    norm.mean.push_back(mean);
    // Constant bands (e.g. all at the dB floor) pass through unscaled.
    norm.stddev.push_back(var > 1e-12 ? std::sqrt(var) : 1.0);
  }
  return norm;
}

}  // namespace geotag::nn
