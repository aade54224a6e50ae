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
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "geotag/audio_io.hpp"
#include "geotag/augmentation.hpp"
#include "geotag/spectrogram.hpp"

namespace geotag::features {

inline constexpr double kPowerFloor = 1e-10;
inline constexpr double kFloorDb = -100.0;

struct FeatureConfig {
  int sample_rate = audio::kPipelineRate;
  int window = 2048;
  int hop = 512;
  double low_cut = 100.0;   // Hz trimmed from the bottom of the spectrum
  double high_cut = 100.0;  // Hz trimmed from below Nyquist
  int n_mels = 128;
  bool mel_area_normalize = false;
  int frames = 431;  // fixed feature width after pad/crop

  double nyquist() const { return sample_rate / 2.0; }
  bool operator==(const FeatureConfig&) const = default;
};

void to_json(nlohmann::json& j, const FeatureConfig& c);
void from_json(const nlohmann::json& j, FeatureConfig& c);

/// Log-mel feature in dB, n_mels x frames.
struct LogMelFeature {
  Eigen::MatrixXf values;
  Eigen::Index real_frames = 0;  // frames before right-padding
  std::string source_id;
  std::vector<augment::AugmentationSpec> lineage;

  Eigen::Index frames() const { return values.cols(); }
};

/// Hann-windowed (periodic), reflect center-padded STFT magnitudes with
/// window/2 + 1 bins and 1 + floor(len / hop) frames.
Spectrogram stft(const Eigen::Ref<const Eigen::VectorXd>& samples, int sample_rate, int window,
                 int hop);

/// Keeps rows with low_cut <= freq <= nyquist - high_cut.
Spectrogram trim_frequencies(const Spectrogram& spec, double low_cut, double high_cut);

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters centered on mel-equispaced frequencies between f_min
/// and f_max, evaluated at `bin_freqs`. Returns n_mels x bins.
Eigen::MatrixXd mel_filterbank(int n_mels, const Eigen::Ref<const Eigen::VectorXd>& bin_freqs,
                               double f_min, double f_max, bool area_normalize = false);

/// 10 log10(max(filterbank * values^2, 1e-10)).
LogMelFeature log_mel(const Spectrogram& spec, const Eigen::Ref<const Eigen::MatrixXd>& filterbank);

/// Right-pads with the dB floor or crops to exactly `frames` columns.
Eigen::MatrixXf pad_or_crop(const Eigen::Ref<const Eigen::MatrixXf>& values, Eigen::Index frames);

/// Full waveform-to-feature chain with a filterbank built once per config.
/// Stereo input is averaged to mono before the STFT, unless a stretch is
/// requested: then each channel's spectrogram is stretched with the same
/// parameters and the magnitudes are averaged.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig config);

  LogMelFeature operator()(const audio::AudioClip& clip,
                           const std::optional<augment::StretchParams>& stretch = std::nullopt) const;

  /// Magnitude spectrogram of `clip` (channel-averaged), before trimming.
  Spectrogram spectrogram(const audio::AudioClip& clip,
                          const std::optional<augment::StretchParams>& stretch = std::nullopt) const;

  /// Trim, log-mel and pad/crop of an untrimmed spectrogram.
  LogMelFeature finish(const Spectrogram& spec) const;

  const FeatureConfig& config() const { return config_; }
  const Eigen::MatrixXd& filterbank() const { return filterbank_; }

 private:
  FeatureConfig config_;
  Eigen::MatrixXd filterbank_;
};

LogMelFeature featurize(const audio::AudioClip& clip, const FeatureConfig& config,
                        const std::optional<augment::StretchParams>& stretch = std::nullopt);

/// Number of STFT frames for a clip of `length` samples.
inline Eigen::Index frame_count(Eigen::Index length, int hop) { return 1 + length / hop; }

// Cache record: "GTF1", u32 rows, u32 cols, rows*cols f32 (row-major), u32
// byte length + UTF-8 JSON lineage. All integers little-endian.
void write_feature(const std::filesystem::path& path, const LogMelFeature& feature);
LogMelFeature read_feature(const std::filesystem::path& path);

nlohmann::json lineage_json(const LogMelFeature& feature);

}  // namespace geotag::features
