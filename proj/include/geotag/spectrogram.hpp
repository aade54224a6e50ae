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

#include <Eigen/Dense>

namespace geotag {

/// Magnitude time-frequency matrix: rows are frequency bins, columns frames.
struct Spectrogram {
  Eigen::MatrixXd values;
  Eigen::VectorXd bin_freqs;  // Hz per row, strictly increasing
  int sample_rate = 0;
  int hop = 0;
  int window = 0;

  Eigen::Index bins() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
};

}  // namespace geotag
