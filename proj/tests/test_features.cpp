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

#include <cmath>
#include <filesystem>

#include "geotag/errors.hpp"
#include "geotag/features.hpp"
#include "geotag/rng.hpp"

using namespace geotag;
using namespace geotag::features;

namespace {

Eigen::VectorXd sine(Eigen::Index length, double hz, double rate, double amplitude = 1.0) {
  Eigen::VectorXd x(length);
  for (Eigen::Index n = 0; n < length; ++n) x(n) = amplitude * std::sin(2.0 * M_PI * hz * n / rate);
  return x;
}

audio::AudioClip clip_of(const Eigen::VectorXd& x, int rate = 22050) {
  audio::AudioClip clip;
  clip.sample_rate = rate;
  clip.samples = x.transpose();
  return clip;
}

}  // namespace

TEST_CASE("stft: zeros, frame count, bin-centred sine peaks at its bin") {
  const Spectrogram zero = stft(Eigen::VectorXd::Zero(4096), 22050, 2048, 512);
  CHECK(zero.values.isZero());
  CHECK(zero.bins() == 1025);
  CHECK(frame_count(220500, 512) == 431);
  CHECK(stft(Eigen::VectorXd::Zero(220500), 22050, 2048, 512).frames() == 431);

  for (int k : {10, 93, 500, 1014}) {
    const Spectrogram s = stft(sine(22050, k * 22050.0 / 2048.0, 22050.0), 22050, 2048, 512);
    // Frames whose window lies wholly inside the signal.
    for (Eigen::Index f = 2; f * 512 + 1024 <= 22050; ++f) {
      Eigen::Index peak;
      s.values.col(f).maxCoeff(&peak);
      CHECK(peak == k);
    }
  }
  CHECK_THROWS_AS(stft(Eigen::VectorXd::Zero(10), 22050, 1000, 256), InvalidInputError);
}

TEST_CASE("stft: Parseval per interior frame, energy additivity of orthogonal bins") {
  const Eigen::Index window = 1024, hop = 256;
  Eigen::VectorXd x(8192);
  CounterRng rng(3, 0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  const Spectrogram s = stft(x, 8000, static_cast<int>(window), static_cast<int>(hop));

  double framed = 0.0, spectral = 0.0;
  for (Eigen::Index f = 2; f + 2 < s.frames(); ++f) {
    for (Eigen::Index n = 0; n < window; ++n) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(window));
      framed += std::pow(w * x(f * hop - window / 2 + n), 2);
    }
    const auto col = s.values.col(f).array().square();
    spectral += (col(0) + col(window / 2) + 2.0 * col.segment(1, window / 2 - 1).sum()) / static_cast<double>(window);
  }
  CHECK(std::abs(spectral - framed) <= 1e-6 * framed);

  const double rate = 22050.0;
  const Eigen::VectorXd a = sine(8192, 40 * rate / 2048, rate);
  const Eigen::VectorXd b = sine(8192, 300 * rate / 2048, rate, 0.5);
  const auto energy = [&](const Eigen::VectorXd& v) {
    return stft(v, 22050, 2048, 512).values.middleCols(2, 12).squaredNorm();
  };
  const double sum = energy(a + b);
  CHECK(std::abs(sum - (energy(a) + energy(b))) <= 1e-6 * sum);
}

TEST_CASE("trim: bins 10..1014 survive at 22050 / 2048 with 100 Hz cuts") {
  const Spectrogram s = stft(Eigen::VectorXd::Ones(4096), 22050, 2048, 512);
  const Spectrogram t = trim_frequencies(s, 100.0, 100.0);
  REQUIRE(t.bins() == 1005);
  CHECK(t.bin_freqs(0) == doctest::Approx(10 * 22050.0 / 2048.0));
  CHECK(t.bin_freqs(1004) == doctest::Approx(1014 * 22050.0 / 2048.0));
  CHECK(t.values == s.values.middleRows(10, 1005));
  CHECK(9 * 22050.0 / 2048.0 < 100.0);
  CHECK(1015 * 22050.0 / 2048.0 > 11025.0 - 100.0);

  const Spectrogram same = trim_frequencies(s, 0.0, 0.0);
  CHECK(same.values == s.values);
  CHECK_THROWS_AS(trim_frequencies(s, 6000.0, 6000.0), InvalidInputError);
}

TEST_CASE("mel scale and filterbank shape") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-5));
  CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5));

  const Spectrogram s = trim_frequencies(stft(Eigen::VectorXd::Ones(4096), 22050, 2048, 512), 100, 100);
  const Eigen::MatrixXd fb = mel_filterbank(128, s.bin_freqs, 100.0, 10925.0);
  REQUIRE(fb.rows() == 128);
  REQUIRE(fb.cols() == 1005);
  CHECK(fb.minCoeff() >= 0.0);
  for (Eigen::Index m = 0; m < fb.rows(); ++m) {
    const auto row = fb.row(m);
    CHECK(row.sum() > 0.0);
    int maxima = 0;
    for (Eigen::Index k = 0; k < row.size(); ++k) {
      const double left = k > 0 ? row(k - 1) : 0.0;
      const double right = k + 1 < row.size() ? row(k + 1) : 0.0;
      if (row(k) > 0.0 && row(k) > left && row(k) >= right) ++maxima;
    }
    CHECK(maxima == 1);
  }
}

TEST_CASE("trim then mel equals band-limited mel on the full spectrogram") {
  const Eigen::VectorXd x = sine(6000, 440.0, 22050.0) + sine(6000, 5000.0, 22050.0, 0.3);
  const Spectrogram full = stft(x, 22050, 2048, 512);
  const Spectrogram trimmed = trim_frequencies(full, 100, 100);
  const auto a = log_mel(trimmed, mel_filterbank(128, trimmed.bin_freqs, 100.0, 10925.0));
  const auto b = log_mel(full, mel_filterbank(128, full.bin_freqs, 100.0, 10925.0));
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("log mel: 0 dB, 10 dB, floor and monotonicity") {
  Spectrogram s;
  s.values.resize(1, 4);
  s.values << 1.0, std::sqrt(10.0), 0.0, 2.0;
  s.bin_freqs = Eigen::VectorXd::Constant(1, 500.0);
  const auto out = log_mel(s, Eigen::MatrixXd::Ones(1, 1));
  CHECK(out.values(0, 0) == doctest::Approx(0.0));
  CHECK(out.values(0, 1) == doctest::Approx(10.0));
  CHECK(out.values(0, 2) == doctest::Approx(-100.0));
  CHECK(out.values(0, 3) > out.values(0, 0));
  CHECK_THROWS_AS(log_mel(s, Eigen::MatrixXd::Ones(1, 2)), InvalidInputError);
}

TEST_CASE("featurize: 10 s -> 128x431, 5 s -> 216 real frames padded with the floor") {
  CounterRng rng(5, 0);
  Eigen::VectorXd x(220500);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = 0.1 * rng.normal();
  const FeatureConfig config;
  const auto ten = featurize(clip_of(x), config);
  CHECK(ten.values.rows() == 128);
  CHECK(ten.values.cols() == 431);
  CHECK(ten.real_frames == 431);
  CHECK(ten.values.minCoeff() >= -100.0f);
  CHECK(ten.values.allFinite());

  const auto five = featurize(clip_of(x.head(110250)), config);
  CHECK(five.values.cols() == 431);
  CHECK(five.real_frames == 216);
  CHECK((five.values.rightCols(431 - 216).array() == -100.0f).all());
  CHECK((five.values.col(215).array() > -100.0f).any());

  const auto tiny = featurize(clip_of(x.head(300)), config);
  CHECK(tiny.values.rows() == 128);
  CHECK(tiny.values.cols() == 431);

  audio::AudioClip empty;
  empty.sample_rate = 22050;
  empty.samples.resize(1, 0);
  const auto none = featurize(empty, config);
  CHECK((none.values.array() == -100.0f).all());
  CHECK(none.real_frames == 0);
}

TEST_CASE("feature extractor: stereo averaging without stretch, unit stretch keeps the feature") {
  const Eigen::VectorXd l = sine(30000, 700.0, 22050.0);
  const Eigen::VectorXd r = sine(30000, 2100.0, 22050.0, 0.5);
  audio::AudioClip stereo;
  stereo.sample_rate = 22050;
  stereo.samples.resize(2, 30000);
  stereo.samples.row(0) = l.transpose();
  stereo.samples.row(1) = r.transpose();
  FeatureConfig config;
  config.frames = 64;
  const FeatureExtractor fx(config);
  const auto averaged = fx(stereo);
  const auto direct = fx(clip_of(0.5 * (l + r)));
  CHECK(averaged.values == direct.values);

  audio::AudioClip mono = clip_of(l);
  const auto plain = fx(mono);
  const auto unit = fx(mono, augment::StretchParams{5, 20, 3, 10, 1.0});
  CHECK((plain.values - unit.values).cwiseAbs().maxCoeff() < 1e-3f);
  CHECK_THROWS_AS(fx(clip_of(Eigen::VectorXd::Zero(100), 44100)), InvalidInputError);
}

TEST_CASE("feature record: bit-identical round trip") {
  LogMelFeature f;
  f.values = Eigen::MatrixXf::Random(128, 19);
  f.real_frames = 17;
  f.source_id = "audio/park-london-1.wav";
  f.lineage = {{augment::Kind::Cyclic, 5, 0, augment::CyclicParams{}},
               {augment::Kind::Stretch, 6, 2, augment::StretchParams{1, 2, 3, 4, 1.1}}};
  const auto path = std::filesystem::temp_directory_path() / "geotag_feature.gtf";
  write_feature(path, f);
  const auto back = read_feature(path);
  CHECK(back.values == f.values);
  CHECK(back.real_frames == 17);
  CHECK(back.source_id == f.source_id);
  CHECK(back.lineage == f.lineage);
  std::filesystem::remove(path);
}
