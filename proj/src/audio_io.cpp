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

#include "geotag/audio_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <vector>

#include "geotag/errors.hpp"

namespace geotag::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const FormatChunk& fmt) {
  if (fmt.format == kFormatFloat) {
    float f;
    std::uint32_t bits = read_u32(p);
    std::memcpy(&f, &bits, sizeof f);
    return static_cast<double>(f);
  }
  if (fmt.bits == 16) {
    return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
  }
  // 24-bit: sign-extend from bit 23.
  std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
  if (v & 0x800000) v -= 0x1000000;
  return v / 8388608.0;
}

}  // namespace

void validate(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw InvalidInputError("sample rate must be positive");
  if (clip.channels() < 1 || clip.channels() > 2) {
    throw InvalidInputError("clip must have 1 or 2 channels, got " +
                            std::to_string(clip.channels()));
  }
  if (!clip.samples.allFinite()) throw InvalidInputError("clip contains non-finite samples");
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    throw DecodeError(path.string() + ": " + why);
  };

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }

  std::optional<FormatChunk> fmt;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* id = bytes.data() + pos;
    const std::uint32_t size = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    const std::size_t remaining = bytes.size() - body;

    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || size > remaining) fail("malformed fmt chunk");
      const std::uint8_t* p = bytes.data() + body;
      FormatChunk f;
      f.format = read_u16(p);
      f.channels = read_u16(p + 2);
      f.sample_rate = read_u32(p + 4);
      f.bits = read_u16(p + 14);
      if (f.format == kFormatExtensible) {
        if (size < 40) fail("malformed extensible fmt chunk");
        f.format = read_u16(p + 24);
      }
      fmt = f;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (size > remaining) fail("truncated data chunk");
      data = bytes.data() + body;
      data_size = size;
      break;
    } else if (size > remaining) {
      fail("truncated chunk");
    }
    pos = body + size + (size & 1u);
  }

  if (!fmt) fail("missing fmt chunk");
  if (data == nullptr) fail("missing data chunk");

  const bool pcm_ok = fmt->format == kFormatPcm && (fmt->bits == 16 || fmt->bits == 24);
  const bool float_ok = fmt->format == kFormatFloat && fmt->bits == 32;
  if (!pcm_ok && !float_ok) {
    throw UnsupportedFormatError(path.string() + ": unsupported encoding (format " +
                                 std::to_string(fmt->format) + ", " +
                                 std::to_string(fmt->bits) + " bits)");
  }
  if (fmt->channels < 1 || fmt->channels > 2) {
    throw UnsupportedFormatError(path.string() + ": unsupported channel count " +
                                 std::to_string(fmt->channels));
  }
  if (fmt->sample_rate == 0) fail("zero sample rate");

  const std::size_t bytes_per_sample = fmt->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  const std::size_t frames = data_size / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.source_id = path.stem().string();
  clip.samples.resize(fmt->channels, static_cast<Eigen::Index>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < fmt->channels; ++c) {
      clip.samples(c, static_cast<Eigen::Index>(i)) =
          decode_sample(data + i * frame_bytes + c * bytes_per_sample, *fmt);
    }
  }
  if (!clip.samples.allFinite()) fail("non-finite float samples");
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, int bits_per_sample) {
  validate(clip);
  if (bits_per_sample != 16 && bits_per_sample != 24) {
    throw InvalidInputError("write_wav supports 16 or 24 bits per sample");
  }
  const auto channels = static_cast<std::uint16_t>(clip.channels());
  const std::uint32_t bytes_per_sample = bits_per_sample / 8;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(clip.length()) * channels * bytes_per_sample;
  const double full_scale = bits_per_sample == 16 ? 32768.0 : 8388608.0;
  const double max_code = full_scale - 1.0;

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * channels * bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
  put_u16(out, static_cast<std::uint16_t>(bits_per_sample));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_size);

  for (Eigen::Index i = 0; i < clip.length(); ++i) {
    for (Eigen::Index c = 0; c < clip.channels(); ++c) {
      const double q = std::clamp(std::round(clip.samples(c, i) * full_scale), -full_scale, max_code);
      const auto code = static_cast<std::int32_t>(q);
      for (std::uint32_t b = 0; b < bytes_per_sample; ++b) {
        out.push_back(static_cast<std::uint8_t>((code >> (8 * b)) & 0xFF));
      }
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

namespace {

constexpr int kTapsPerPhase = 64;
constexpr double kKaiserBeta = 8.6;
constexpr long kMaxTabulatedPhases = 4096;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

// Taps for an output instant that sits `frac` input samples past its base
// index. Tap j multiplies input sample base - 31 + j.
void phase_taps(double frac, double cutoff, double* taps) {
  const double half = kTapsPerPhase / 2.0;
  const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
  double sum = 0.0;
  for (int j = 0; j < kTapsPerPhase; ++j) {
    const double d = frac + (half - 1) - j;
    const double x = d / half;
    const double w = std::abs(x) >= 1.0
                         ? 0.0
                         : std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - x * x)) / norm;
    taps[j] = cutoff * sinc(cutoff * d) * w;
    sum += taps[j];
  }
  for (int j = 0; j < kTapsPerPhase; ++j) taps[j] /= sum;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw InvalidInputError("target rate must be positive");
  if (clip.sample_rate <= 0) throw InvalidInputError("source rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const long g = std::gcd(static_cast<long>(clip.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g;
  const long down = clip.sample_rate / g;
  const double cutoff = std::min(1.0, static_cast<double>(target_rate) / clip.sample_rate);

  const Eigen::Index in_len = clip.length();
  const auto out_len = static_cast<Eigen::Index>(
      (static_cast<long long>(in_len) * target_rate + clip.sample_rate / 2) / clip.sample_rate);

  const bool tabulate = up <= kMaxTabulatedPhases;
  Eigen::Matrix<double, Eigen::Dynamic, kTapsPerPhase, Eigen::RowMajor> table;
  if (tabulate) {
    table.resize(up, kTapsPerPhase);
    for (long p = 0; p < up; ++p) {
      phase_taps(static_cast<double>(p) / up, cutoff, table.row(p).data());
    }
  }

  AudioClip out;
  out.sample_rate = target_rate;
  out.source_id = clip.source_id;
  out.labels = clip.labels;
  out.samples.setZero(clip.channels(), out_len);

  std::array<double, kTapsPerPhase> scratch{};
  for (Eigen::Index n = 0; n < out_len; ++n) {
    const long long num = static_cast<long long>(n) * down;
    const long long base = num / up;
    const long phase = static_cast<long>(num % up);
    const double* taps = nullptr;
    if (tabulate) {
      taps = table.row(phase).data();
    } else {
      phase_taps(static_cast<double>(phase) / up, cutoff, scratch.data());
      taps = scratch.data();
    }
    const long long first = base - (kTapsPerPhase / 2 - 1);
    for (Eigen::Index c = 0; c < clip.channels(); ++c) {
      double acc = 0.0;
      for (int j = 0; j < kTapsPerPhase; ++j) {
        const long long idx = first + j;
        if (idx >= 0 && idx < in_len) acc += taps[j] * clip.samples(c, static_cast<Eigen::Index>(idx));
      }
      out.samples(c, n) = acc;
    }
  }
  return out;
}

AudioClip average_channels(const AudioClip& clip) {
  if (clip.channels() <= 1) return clip;
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  out.labels = clip.labels;
  out.samples = clip.samples.colwise().mean();
  return out;
}

}  // namespace geotag::audio
