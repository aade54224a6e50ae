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
#include <string>

#include "geotag/errors.hpp"

namespace geotag::nn {

using Eigen::Index;

enum class Mode { Train, Eval };

/// NCHW extents.
struct Shape4 {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  Index size() const { return n * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major NCHW tensor. Each (n, c) plane is contiguous, and each
/// sample views as a channels x (h*w) row-major matrix.
template <typename Scalar>
class Tensor4 {
 public:
  using PlaneMap = Eigen::Map<RowMat<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const RowMat<Scalar>>;

  Tensor4() = default;
  explicit Tensor4(const Shape4& shape) : shape_(shape), data_(Vec<Scalar>::Zero(shape.size())) {}
  Tensor4(const Shape4& shape, Scalar fill)
      : shape_(shape), data_(Vec<Scalar>::Constant(shape.size(), fill)) {}

  const Shape4& shape() const { return shape_; }
  Vec<Scalar>& data() { return data_; }
  const Vec<Scalar>& data() const { return data_; }

  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  Scalar& operator()(Index n, Index c, Index h, Index w) { return data_(offset(n, c, h, w)); }
  Scalar operator()(Index n, Index c, Index h, Index w) const { return data_(offset(n, c, h, w)); }

  Scalar* plane_data(Index n, Index c) { return data_.data() + offset(n, c, 0, 0); }
  const Scalar* plane_data(Index n, Index c) const { return data_.data() + offset(n, c, 0, 0); }

  PlaneMap plane(Index n, Index c) { return PlaneMap(plane_data(n, c), shape_.h, shape_.w); }
  ConstPlaneMap plane(Index n, Index c) const {
    return ConstPlaneMap(plane_data(n, c), shape_.h, shape_.w);
  }

  /// channels x (h*w) view of one sample.
  PlaneMap sample(Index n) { return PlaneMap(plane_data(n, 0), shape_.c, shape_.h * shape_.w); }
  ConstPlaneMap sample(Index n) const {
    return ConstPlaneMap(plane_data(n, 0), shape_.c, shape_.h * shape_.w);
  }

  bool all_finite() const { return data_.allFinite(); }

 private:
  Shape4 shape_;
  Vec<Scalar> data_;
};

/// Learned (or tracked) parameter with its gradient accumulator. Parameters
/// with trainable == false (batchnorm running statistics) are checkpointed
/// but never updated by the optimizer.
template <typename Scalar>
struct Parameter {
  std::string name;
  Vec<Scalar> value;
  Vec<Scalar> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Index size, bool is_trainable = true)
      : name(std::move(n)),
        value(Vec<Scalar>::Zero(size)),
        grad(Vec<Scalar>::Zero(size)),
        trainable(is_trainable) {}
};

}  // namespace geotag::nn
