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

#include <doctest.h>

#include <algorithm>

#include "geotag/augmentation.hpp"
#include "geotag/errors.hpp"
#include "geotag/rng.hpp"

using namespace geotag;
using geotag::audio::AudioClip;

namespace {

AudioClip mono(std::initializer_list<double> values) {
  AudioClip clip;
  clip.sample_rate = 100;
  clip.samples.resize(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) clip.samples(0, i++) = v;
  return clip;
}

AudioClip ramp(Eigen::Index channels, Eigen::Index length) {
  AudioClip clip;
  clip.sample_rate = 100;
  clip.samples.resize(channels, length);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index i = 0; i < length; ++i) clip.samples(c, i) = static_cast<double>(c * 1000 + i);
  }
  return clip;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Eigen::MatrixXd m(rows, cols);
  CounterRng rng(seed, 0);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.0, 5.0);
  return m;
}

Spectrogram spectrogram(const Eigen::MatrixXd& values) {
  Spectrogram s;
  s.values = values;
  s.bin_freqs = Eigen::VectorXd::LinSpaced(values.rows(), 0.0, static_cast<double>(values.rows() - 1));
  s.sample_rate = 22050;
  s.window = 2048;
  s.hop = 512;
  return s;
}

}  // namespace

TEST_CASE("cyclic shift: definition examples") {
  CHECK(augment::cyclic_shift(mono({1, 2, 3, 4})).samples == mono({3, 4, 1, 2}).samples);
  CHECK(augment::cyclic_shift(mono({1, 2, 3, 4, 5})).samples == mono({3, 4, 5, 1, 2}).samples);
  CHECK_THROWS_AS(augment::cyclic_shift(AudioClip{Eigen::MatrixXd(1, 0), 100, "", {}}), InvalidInputError);
}

TEST_CASE("cyclic shift: multiset preservation and involution") {
  for (Eigen::Index len : {2, 7, 64, 101}) {
    const AudioClip clip = ramp(2, len);
    const AudioClip shifted = augment::cyclic_shift(clip);
    for (Eigen::Index c = 0; c < 2; ++c) {
      std::vector<double> a(clip.samples.row(c).begin(), clip.samples.row(c).end());
      std::vector<double> b(shifted.samples.row(c).begin(), shifted.samples.row(c).end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
    if (len % 2 == 0) CHECK(augment::cyclic_shift(shifted).samples == clip.samples);
  }
  const AudioClip clip = ramp(1, 40);
  CHECK(augment::cyclic_shift(augment::cyclic_shift(clip, 0.25), 0.75).samples == clip.samples);
}

TEST_CASE("drop: removal arithmetic and truncation at the end") {
  const AudioClip clip = ramp(1, 10);
  const AudioClip a = augment::drop_interval(clip, {3, 4});
  CHECK(a.samples == mono({0, 1, 2, 3, 7, 8, 9}).samples);
  const AudioClip b = augment::drop_interval(clip, {8, 5});
  CHECK(b.length() == 5);
  CHECK(b.samples == mono({0, 1, 2, 3, 4}).samples);
}

TEST_CASE("drop: two seeded outputs, reproducible, lengths consistent with the draws") {
  const AudioClip clip = ramp(2, 500);
  const auto first = augment::drop_intervals(clip, 99);
  const auto again = augment::drop_intervals(clip, 99);
  REQUIRE(first.size() == 2);
  for (std::uint64_t stream = 0; stream < 2; ++stream) {
    const auto p = augment::draw_drop_params(500, 99, stream);
    CHECK(p.count >= 1);
    CHECK(p.count <= 500);
    CHECK(p.index >= 0);
    CHECK(p.index < 500);
    const Eigen::Index removed = std::min<Eigen::Index>(p.count, 500 - p.index);
    CHECK(first[stream].length() == 500 - removed);
    CHECK(first[stream].samples == again[stream].samples);
  }
  CHECK(augment::draw_drop_params(500, 99, 0) != augment::draw_drop_params(500, 99, 1));
  CHECK_THROWS_AS(augment::drop_intervals(ramp(1, 1), 1), InvalidInputError);
}

TEST_CASE("stereo rule: shared parameters commute with channel averaging") {
  AudioClip clip = ramp(2, 333);
  clip.samples.row(1) = clip.samples.row(1).reverse().eval();
  const auto avg = [](const AudioClip& c) { return audio::average_channels(c).samples; };

  CHECK((augment::cyclic_shift(audio::average_channels(clip)).samples - avg(augment::cyclic_shift(clip)))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  const auto per_channel = augment::drop_intervals(clip, 5);
  const auto averaged = augment::drop_intervals(audio::average_channels(clip), 5);
  for (int i = 0; i < 2; ++i) CHECK(avg(per_channel[static_cast<std::size_t>(i)]) == averaged[static_cast<std::size_t>(i)].samples);
}

TEST_CASE("bilinear resize: hand-evaluated oracle, identity, constant") {
  Eigen::MatrixXd in(2, 2);
  in << 0, 2, 4, 6;
  Eigen::MatrixXd expected(3, 3);
  expected << 0, 1, 2, 2, 3, 4, 4, 5, 6;
  CHECK(augment::bilinear_resize(in, 3, 3) == expected);

  const Eigen::MatrixXd m = random_matrix(5, 7, 1);
  CHECK(augment::bilinear_resize(m, 5, 7) == m);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 1, 2.5);
  CHECK((augment::bilinear_resize(one, 4, 9).array() == 2.5).all());
  CHECK_THROWS_AS(augment::bilinear_resize(m, 0, 3), InvalidInputError);
}

TEST_CASE("stretch: four outputs of unchanged dims, drawn inside the configured ranges") {
  const Spectrogram spec = spectrogram(random_matrix(64, 40, 2));
  const auto outs = augment::stretch_spectrogram(spec, 17);
  REQUIRE(outs.size() == 4);
  const double lo = spec.values.minCoeff();
  const double hi = spec.values.maxCoeff();
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto& out = outs[s];
    CHECK(out.values.rows() == 64);
    CHECK(out.values.cols() == 40);
    CHECK(out.bin_freqs == spec.bin_freqs);
    CHECK(out.values.minCoeff() >= lo);
    CHECK(out.values.maxCoeff() <= hi);

    const auto p = augment::draw_stretch_params(64, 40, 17, s);
    CHECK(p.factor >= 0.8);
    CHECK(p.factor <= 1.2);
    CHECK(p.row_span >= 1);
    CHECK(p.row_span <= 16);
    CHECK(p.col_span >= 1);
    CHECK(p.col_span <= 10);
    CHECK(p.row_start + p.row_span <= 64);
    CHECK(p.col_start + p.col_span <= 40);
    CHECK(augment::apply_stretch(spec, p).values == out.values);
  }
  CHECK_THROWS_AS(augment::stretch_spectrogram(spectrogram(random_matrix(7, 40, 3)), 1), InvalidInputError);
}

TEST_CASE("stretch: unit factor is a near identity, constants stay constant") {
  const Eigen::MatrixXd m = random_matrix(30, 50, 4);
  const augment::StretchParams unit{3, 6, 10, 9, 1.0};
  CHECK((augment::apply_stretch(m, unit) - m).cwiseAbs().maxCoeff() < 1e-6);

  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(20, 20, 0.75);
  const augment::StretchParams wide{2, 5, 4, 5, 1.17};
  CHECK((augment::apply_stretch(c, wide).array() == 0.75).all());
}

TEST_CASE("augmentation spec: JSON round trip for every kind") {
  using augment::AugmentationSpec;
  const std::vector<AugmentationSpec> specs = {
      {augment::Kind::Cyclic, 1, 0, augment::CyclicParams{0.5}},
      {augment::Kind::Drop, 18446744073709551615ULL, 1, augment::DropParams{12, 400}},
      {augment::Kind::Stretch, 77, 3, augment::StretchParams{1, 2, 3, 4, 0.93}},
      {augment::Kind::Stretch, 78, 2, std::monostate{}}};
  for (const auto& spec : specs) {
    const nlohmann::json j = spec;
    CHECK(j.get<AugmentationSpec>() == spec);
  }
  CHECK(augment::kind_from_string("stretch") == augment::Kind::Stretch);
  CHECK_THROWS(augment::kind_from_string("reverb"));
}
