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

#include "geotag/augmentation.hpp"

#include "geotag/rng.hpp"

namespace geotag::augment {

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::Cyclic: return "cyclic";
    case Kind::Drop: return "drop";
    case Kind::Stretch: return "stretch";
  }
  return "unknown";
}

Kind kind_from_string(const std::string& name) {
  if (name == "cyclic") return Kind::Cyclic;
  if (name == "drop") return Kind::Drop;
  if (name == "stretch") return Kind::Stretch;
  throw ValidationError("unknown augmentation '" + name + "'");
}

void to_json(nlohmann::json& j, const AugmentationSpec& spec) {
  nlohmann::json params = nlohmann::json::object();
  params["stream"] = spec.stream;
  if (const auto* c = std::get_if<CyclicParams>(&spec.params)) {
    params["fraction"] = c->fraction;
  } else if (const auto* d = std::get_if<DropParams>(&spec.params)) {
    params["count"] = d->count;
    params["index"] = d->index;
  } else if (const auto* s = std::get_if<StretchParams>(&spec.params)) {
    params["row_start"] = s->row_start;
    params["row_span"] = s->row_span;
    params["col_start"] = s->col_start;
    params["col_span"] = s->col_span;
    params["factor"] = s->factor;
  }
  j = nlohmann::json{{"kind", to_string(spec.kind)}, {"seed", spec.seed}, {"params", params}};
}

void from_json(const nlohmann::json& j, AugmentationSpec& spec) {
  spec.kind = kind_from_string(j.at("kind").get<std::string>());
  spec.seed = j.at("seed").get<std::uint64_t>();
  const auto& p = j.at("params");
  spec.stream = p.value("stream", std::uint64_t{0});
  spec.params = std::monostate{};
  switch (spec.kind) {
    case Kind::Cyclic:
      if (p.contains("fraction")) spec.params = CyclicParams{p.at("fraction").get<double>()};
      break;
    case Kind::Drop:
      if (p.contains("count")) {
        spec.params = DropParams{p.at("count").get<Eigen::Index>(), p.at("index").get<Eigen::Index>()};
      }
      break;
    case Kind::Stretch:
      if (p.contains("factor")) {
        spec.params = StretchParams{p.at("row_start").get<Eigen::Index>(),
                                    p.at("row_span").get<Eigen::Index>(),
                                    p.at("col_start").get<Eigen::Index>(),
                                    p.at("col_span").get<Eigen::Index>(),
                                    p.at("factor").get<double>()};
      }
      break;
  }
}

audio::AudioClip cyclic_shift(const audio::AudioClip& clip, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidInputError("cyclic_shift: fraction must lie in (0, 1)");
  }
  const Eigen::Index len = clip.length();
  if (len == 0) throw InvalidInputError("cyclic_shift: empty clip");
  const auto k = static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(len)));

  audio::AudioClip out = clip;
  out.samples.leftCols(len - k) = clip.samples.rightCols(len - k);
  out.samples.rightCols(k) = clip.samples.leftCols(k);
  return out;
}

DropParams draw_drop_params(Eigen::Index length, std::uint64_t seed, std::uint64_t stream) {
  if (length < 2) throw InvalidInputError("drop: clip must have at least 2 samples");
  CounterRng rng(seed, stream);
  DropParams p;
  p.count = static_cast<Eigen::Index>(rng.uniform_int(1, static_cast<std::uint64_t>(length)));
  p.index = static_cast<Eigen::Index>(rng.uniform_int(0, static_cast<std::uint64_t>(length - 1)));
  return p;
}

audio::AudioClip drop_interval(const audio::AudioClip& clip, const DropParams& params) {
  const Eigen::Index len = clip.length();
  if (params.count < 1 || params.index < 0 || params.index >= len) {
    throw InvalidInputError("drop: removal interval outside the clip");
  }
  const Eigen::Index end = std::min(params.index + params.count, len);
  const Eigen::Index tail = len - end;

  audio::AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  out.labels = clip.labels;
  out.samples.resize(clip.channels(), params.index + tail);
  out.samples.leftCols(params.index) = clip.samples.leftCols(params.index);
  out.samples.rightCols(tail) = clip.samples.rightCols(tail);
  return out;
}

std::array<audio::AudioClip, 2> drop_intervals(const audio::AudioClip& clip, std::uint64_t seed) {
  return {drop_interval(clip, draw_drop_params(clip.length(), seed, 0)),
          drop_interval(clip, draw_drop_params(clip.length(), seed, 1))};
}

StretchParams draw_stretch_params(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                  std::uint64_t stream, const StretchConfig& config) {
  if (rows < kMinStretchDim || cols < kMinStretchDim) {
    throw InvalidInputError("stretch: spectrogram must be at least 8x8");
  }
  if (!(config.factor_min > 0.0 && config.factor_min <= config.factor_max)) {
    throw InvalidInputError("stretch: invalid factor range");
  }
  CounterRng rng(seed, stream);
  const auto band = [&](Eigen::Index dim, Eigen::Index& start, Eigen::Index& span) {
    const auto max_span = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::floor(config.max_span_fraction * static_cast<double>(dim))));
    span = static_cast<Eigen::Index>(rng.uniform_int(1, static_cast<std::uint64_t>(max_span)));
    start = static_cast<Eigen::Index>(rng.uniform_int(0, static_cast<std::uint64_t>(dim - span)));
  };
  StretchParams p;
  band(rows, p.row_start, p.row_span);
  band(cols, p.col_start, p.col_span);
  p.factor = rng.uniform(config.factor_min, config.factor_max);
  return p;
}

Eigen::MatrixXd apply_stretch(const Eigen::MatrixXd& values, const StretchParams& p) {
  const Eigen::Index rows = values.rows();
  const Eigen::Index cols = values.cols();
  if (p.row_start < 0 || p.row_span < 1 || p.row_start + p.row_span > rows || p.col_start < 0 ||
      p.col_span < 1 || p.col_start + p.col_span > cols || !(p.factor > 0.0)) {
    throw InvalidInputError("stretch: band outside the matrix");
  }
  const auto scaled = [&](Eigen::Index span) {
    return std::max<Eigen::Index>(1, std::lround(static_cast<double>(span) * p.factor));
  };

  const Eigen::Index new_rows = scaled(p.row_span);
  Eigen::MatrixXd row_stretched(rows - p.row_span + new_rows, cols);
  row_stretched.topRows(p.row_start) = values.topRows(p.row_start);
  row_stretched.middleRows(p.row_start, new_rows) =
      bilinear_resize(values.middleRows(p.row_start, p.row_span), new_rows, cols);
  const Eigen::Index below = rows - p.row_start - p.row_span;
  row_stretched.bottomRows(below) = values.bottomRows(below);

  const Eigen::Index new_cols = scaled(p.col_span);
  Eigen::MatrixXd both(row_stretched.rows(), cols - p.col_span + new_cols);
  both.leftCols(p.col_start) = row_stretched.leftCols(p.col_start);
  both.middleCols(p.col_start, new_cols) =
      bilinear_resize(row_stretched.middleCols(p.col_start, p.col_span), row_stretched.rows(), new_cols);
  const Eigen::Index right = cols - p.col_start - p.col_span;
  both.rightCols(right) = row_stretched.rightCols(right);

  return bilinear_resize(both, rows, cols);
}

Spectrogram apply_stretch(const Spectrogram& spec, const StretchParams& params) {
  Spectrogram out = spec;
  out.values = apply_stretch(spec.values, params);
  return out;
}

std::array<Spectrogram, 4> stretch_spectrogram(const Spectrogram& spec, std::uint64_t seed,
                                               const StretchConfig& config) {
  std::array<Spectrogram, 4> out;
  for (std::uint64_t i = 0; i < out.size(); ++i) {
    out[i] = apply_stretch(spec, draw_stretch_params(spec.bins(), spec.frames(), seed, i, config));
  }
  return out;
}

}  // namespace geotag::augment
