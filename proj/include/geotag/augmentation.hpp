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
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <variant>

#include "geotag/audio_io.hpp"
#include "geotag/errors.hpp"
#include "geotag/spectrogram.hpp"

namespace geotag::augment {

enum class Kind { Cyclic, Drop, Stretch };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& name);

struct CyclicParams {
  double fraction = 0.5;
  bool operator==(const CyclicParams&) const = default;
};

/// Removes samples [index, min(index + count, len)).
struct DropParams {
  Eigen::Index count = 1;
  Eigen::Index index = 0;
  bool operator==(const DropParams&) const = default;
};

struct StretchParams {
  Eigen::Index row_start = 0;
  Eigen::Index row_span = 1;
  Eigen::Index col_start = 0;
  Eigen::Index col_span = 1;
  double factor = 1.0;
  bool operator==(const StretchParams&) const = default;
};

struct StretchConfig {
  double factor_min = 0.8;
  double factor_max = 1.2;
  double max_span_fraction = 0.25;
};

/// One replayable augmentation application. `stream` selects the RNG
/// sub-stream under `seed`; `params` is filled once the concrete draw is known
/// (drop and stretch draws depend on the input's dimensions).
struct AugmentationSpec {
  Kind kind = Kind::Cyclic;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::variant<std::monostate, CyclicParams, DropParams, StretchParams> params;

  bool operator==(const AugmentationSpec&) const = default;
};

void to_json(nlohmann::json& j, const AugmentationSpec& spec);
void from_json(const nlohmann::json& j, AugmentationSpec& spec);

// Waveform operators. Every channel receives the same split/removal so stereo
// pairs stay time aligned.

audio::AudioClip cyclic_shift(const audio::AudioClip& clip, double fraction = 0.5);

DropParams draw_drop_params(Eigen::Index length, std::uint64_t seed, std::uint64_t stream);
audio::AudioClip drop_interval(const audio::AudioClip& clip, const DropParams& params);

/// Two outputs, drawn from sub-streams 0 and 1 of `seed`.
std::array<audio::AudioClip, 2> drop_intervals(const audio::AudioClip& clip, std::uint64_t seed);

/// Align-corners bilinear interpolation. A degenerate output dimension of 1
/// samples source coordinate 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> bilinear_resize(
    const Eigen::MatrixBase<Derived>& in, Eigen::Index out_rows, Eigen::Index out_cols) {
  using Scalar = typename Derived::Scalar;
  if (in.rows() < 1 || in.cols() < 1 || out_rows < 1 || out_cols < 1) {
    throw InvalidInputError("bilinear_resize: dimensions must be >= 1");
  }
  const auto axis = [](Eigen::Index in_dim, Eigen::Index out_dim, Eigen::Index i, Eigen::Index& i0,
                       Eigen::Index& i1, Scalar& w) {
    const double src =
        out_dim == 1 ? 0.0
                     : static_cast<double>(i) * static_cast<double>(in_dim - 1) /
                           static_cast<double>(out_dim - 1);
    i0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(src)), in_dim - 1);
    i1 = std::min<Eigen::Index>(i0 + 1, in_dim - 1);
    w = static_cast<Scalar>(src - static_cast<double>(i0));
  };
  const auto lerp = [](Scalar a, Scalar b, Scalar w) {
    const Scalar v = (Scalar(1) - w) * a + w * b;
    return std::clamp(v, std::min(a, b), std::max(a, b));
  };

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(out_rows, out_cols);
  for (Eigen::Index r = 0; r < out_rows; ++r) {
    Eigen::Index r0, r1;
    Scalar wr;
    axis(in.rows(), out_rows, r, r0, r1, wr);
    for (Eigen::Index c = 0; c < out_cols; ++c) {
      Eigen::Index c0, c1;
      Scalar wc;
      axis(in.cols(), out_cols, c, c0, c1, wc);
      const Scalar top = lerp(in(r0, c0), in(r0, c1), wc);
      const Scalar bottom = lerp(in(r1, c0), in(r1, c1), wc);
      out(r, c) = lerp(top, bottom, wr);
    }
  }
  return out;
}

StretchParams draw_stretch_params(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                  std::uint64_t stream, const StretchConfig& config = {});

/// Resizes the row band and then the column band by `factor`, then restores
/// the whole matrix to its original dimensions.
Eigen::MatrixXd apply_stretch(const Eigen::MatrixXd& values, const StretchParams& params);

Spectrogram apply_stretch(const Spectrogram& spec, const StretchParams& params);

/// Four outputs, drawn from sub-streams 0..3 of `seed`.
std::array<Spectrogram, 4> stretch_spectrogram(const Spectrogram& spec, std::uint64_t seed,
                                               const StretchConfig& config = {});

inline constexpr Eigen::Index kMinStretchDim = 8;

}  // namespace geotag::augment
