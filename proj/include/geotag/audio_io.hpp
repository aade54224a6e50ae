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
#include <optional>
#include <string>

#include "geotag/labels.hpp"

namespace geotag::audio {

/// Multi-channel PCM clip. `samples` is channels x frames, amplitudes in
/// [-1, 1].
struct AudioClip {
  Eigen::MatrixXd samples;
  int sample_rate = 0;
  std::string source_id;
  std::optional<ClipLabels> labels;

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index length() const { return samples.cols(); }
};

/// Throws InvalidInputError unless the clip satisfies the pipeline
/// invariants (1 or 2 channels, positive rate, finite samples).
void validate(const AudioClip& clip);

/// Decodes a RIFF/WAVE file: 16/24-bit integer PCM or 32-bit float, mono or
/// stereo. Integer samples are divided by 2^(bits-1).
AudioClip load_wav(const std::filesystem::path& path);

/// Writes integer PCM (16 or 24 bits). Test-fixture and synthetic-data helper.
void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               int bits_per_sample = 16);

/// Polyphase windowed-sinc resampler (Kaiser window, 64 taps per phase).
/// Output length is round(len * target_rate / sample_rate).
AudioClip resample(const AudioClip& clip, int target_rate);

/// Arithmetic mean across channels; mono input is returned unchanged.
AudioClip average_channels(const AudioClip& clip);

/// Pipeline rate every clip is brought to before augmentation.
inline constexpr int kPipelineRate = 22050;

}  // namespace geotag::audio
