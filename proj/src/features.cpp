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

#include "geotag/features.hpp"

#include <bit>
#include <complex>
#include <cstring>
#include <fstream>
#include <unsupported/Eigen/FFT>

#include "geotag/errors.hpp"

namespace geotag::features {

static_assert(std::endian::native == std::endian::little,
              "feature cache I/O assumes a little-endian host");

void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = nlohmann::json{{"sample_rate", c.sample_rate},
                     {"window", c.window},
                     {"hop", c.hop},
                     {"low_cut", c.low_cut},
                     {"high_cut", c.high_cut},
                     {"n_mels", c.n_mels},
                     {"mel_area_normalize", c.mel_area_normalize},
                     {"frames", c.frames}};
}

void from_json(const nlohmann::json& j, FeatureConfig& c) {
  FeatureConfig d;
  c.sample_rate = j.value("sample_rate", d.sample_rate);
  c.window = j.value("window", d.window);
  c.hop = j.value("hop", d.hop);
  c.low_cut = j.value("low_cut", d.low_cut);
  c.high_cut = j.value("high_cut", d.high_cut);
  c.n_mels = j.value("n_mels", d.n_mels);
  c.mel_area_normalize = j.value("mel_area_normalize", d.mel_area_normalize);
  c.frames = j.value("frames", d.frames);
}

namespace {

Eigen::Index reflect_index(Eigen::Index j, Eigen::Index len) {
  if (len == 1) return 0;
  const Eigen::Index period = 2 * (len - 1);
  j = std::abs(j) % period;
  return j < len ? j : period - j;
}

}  // namespace

Spectrogram stft(const Eigen::Ref<const Eigen::VectorXd>& samples, int sample_rate, int window,
                 int hop) {
  if (window < 2 || (window & (window - 1)) != 0) {
    throw InvalidInputError("stft: window must be a power of two");
  }
  if (hop <= 0 || hop > window) throw InvalidInputError("stft: hop must lie in (0, window]");
  if (samples.size() < 1) throw InvalidInputError("stft: empty signal");

  const Eigen::Index len = samples.size();
  const Eigen::Index pad = window / 2;
  const Eigen::Index n_frames = frame_count(len, hop);
  const Eigen::Index n_bins = window / 2 + 1;

  Eigen::VectorXd hann(window);
  for (int n = 0; n < window; ++n) hann(n) = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / window);

  Spectrogram spec;
  spec.sample_rate = sample_rate;
  spec.window = window;
  spec.hop = hop;
  spec.values.resize(n_bins, n_frames);
  spec.bin_freqs = Eigen::VectorXd::LinSpaced(n_bins, 0.0, static_cast<double>(n_bins - 1)) *
                   (static_cast<double>(sample_rate) / window);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(window);
  std::vector<std::complex<double>> bins;
  for (Eigen::Index f = 0; f < n_frames; ++f) {
    const Eigen::Index start = f * hop - pad;
    for (int n = 0; n < window; ++n) {
      frame[n] = hann(n) * samples(reflect_index(start + n, len));
    }
    fft.fwd(bins, frame);
    for (Eigen::Index k = 0; k < n_bins; ++k) spec.values(k, f) = std::abs(bins[k]);
  }
  return spec;
}

Spectrogram trim_frequencies(const Spectrogram& spec, double low_cut, double high_cut) {
  if (low_cut < 0.0 || high_cut < 0.0) throw InvalidInputError("trim: cuts must be >= 0");
  const double upper = spec.sample_rate / 2.0 - high_cut;
  Eigen::Index first = 0;
  while (first < spec.bins() && spec.bin_freqs(first) < low_cut) ++first;
  Eigen::Index last = first;
  while (last < spec.bins() && spec.bin_freqs(last) <= upper) ++last;
  if (last == first) throw InvalidInputError("trim: no frequency bins survive");

  Spectrogram out = spec;
  out.values = spec.values.middleRows(first, last - first);
  out.bin_freqs = spec.bin_freqs.segment(first, last - first);
  return out;
}

Eigen::MatrixXd mel_filterbank(int n_mels, const Eigen::Ref<const Eigen::VectorXd>& bin_freqs,
                               double f_min, double f_max, bool area_normalize) {
  if (n_mels < 1) throw InvalidInputError("mel_filterbank: n_mels must be >= 1");
  if (!(f_min >= 0.0 && f_min < f_max)) throw InvalidInputError("mel_filterbank: need 0 <= f_min < f_max");

  const double m_lo = hz_to_mel(f_min);
  const double m_hi = hz_to_mel(f_max);
  Eigen::VectorXd edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges(i) = mel_to_hz(m_lo + (m_hi - m_lo) * i / (n_mels + 1));
  }

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, bin_freqs.size());
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges(m), center = edges(m + 1), hi = edges(m + 2);
    const double scale = area_normalize ? 2.0 / (hi - lo) : 1.0;
    for (Eigen::Index k = 0; k < bin_freqs.size(); ++k) {
      const double f = bin_freqs(k);
      const double rising = (f - lo) / (center - lo);
      const double falling = (hi - f) / (hi - center);
      fb(m, k) = scale * std::max(0.0, std::min(rising, falling));
    }
  }
  return fb;
}

LogMelFeature log_mel(const Spectrogram& spec, const Eigen::Ref<const Eigen::MatrixXd>& filterbank) {
  if (filterbank.cols() != spec.bins()) {
    throw InvalidInputError("log_mel: filterbank has " + std::to_string(filterbank.cols()) +
                            " columns but the spectrogram has " + std::to_string(spec.bins()) +
                            " rows");
  }
  const Eigen::MatrixXd power = filterbank * spec.values.array().square().matrix();
  LogMelFeature out;
  out.values = (10.0 * power.array().max(kPowerFloor).log10()).cast<float>();
  out.real_frames = out.values.cols();
  return out;
}

Eigen::MatrixXf pad_or_crop(const Eigen::Ref<const Eigen::MatrixXf>& values, Eigen::Index frames) {
  Eigen::MatrixXf out = Eigen::MatrixXf::Constant(values.rows(), frames, static_cast<float>(kFloorDb));
  const Eigen::Index keep = std::min(frames, values.cols());
  out.leftCols(keep) = values.leftCols(keep);
  return out;
}

FeatureExtractor::FeatureExtractor(FeatureConfig config) : config_(config) {
  if (config_.frames < 1) throw InvalidInputError("feature config: frames must be >= 1");
  // The trimmed bin grid depends only on the config, so build it from a
  // metadata-only spectrogram.
  Spectrogram grid;
  grid.sample_rate = config_.sample_rate;
  grid.window = config_.window;
  grid.hop = config_.hop;
  const Eigen::Index n_bins = config_.window / 2 + 1;
  grid.values = Eigen::MatrixXd::Zero(n_bins, 1);
  grid.bin_freqs = Eigen::VectorXd::LinSpaced(n_bins, 0.0, static_cast<double>(n_bins - 1)) *
                   (static_cast<double>(config_.sample_rate) / config_.window);
  const Spectrogram trimmed = trim_frequencies(grid, config_.low_cut, config_.high_cut);
  filterbank_ = mel_filterbank(config_.n_mels, trimmed.bin_freqs, config_.low_cut,
                               config_.nyquist() - config_.high_cut, config_.mel_area_normalize);
}

Spectrogram FeatureExtractor::spectrogram(const audio::AudioClip& clip,
                                          const std::optional<augment::StretchParams>& stretch) const {
  audio::validate(clip);
  if (clip.sample_rate != config_.sample_rate) {
    throw InvalidInputError("featurize: clip rate " + std::to_string(clip.sample_rate) +
                            " differs from pipeline rate " + std::to_string(config_.sample_rate));
  }
  if (!stretch) {
    const audio::AudioClip mono = audio::average_channels(clip);
    return stft(mono.samples.row(0).transpose(), config_.sample_rate, config_.window, config_.hop);
  }
  Spectrogram sum;
  for (Eigen::Index c = 0; c < clip.channels(); ++c) {
    Spectrogram ch = augment::apply_stretch(
        stft(clip.samples.row(c).transpose(), config_.sample_rate, config_.window, config_.hop), *stretch);
    if (c == 0) {
      sum = std::move(ch);
    } else {
      sum.values += ch.values;
    }
  }
  sum.values /= static_cast<double>(clip.channels());
  return sum;
}

LogMelFeature FeatureExtractor::finish(const Spectrogram& spec) const {
  LogMelFeature feature = log_mel(trim_frequencies(spec, config_.low_cut, config_.high_cut), filterbank_);
  feature.real_frames = std::min<Eigen::Index>(feature.real_frames, config_.frames);
  feature.values = pad_or_crop(feature.values, config_.frames);
  return feature;
}

LogMelFeature FeatureExtractor::operator()(const audio::AudioClip& clip,
                                           const std::optional<augment::StretchParams>& stretch) const {
  LogMelFeature feature;
  if (clip.length() == 0) {
    // A drop draw may remove the whole recording.
    feature.values = Eigen::MatrixXf::Constant(config_.n_mels, config_.frames, static_cast<float>(kFloorDb));
    feature.real_frames = 0;
  } else {
    feature = finish(spectrogram(clip, stretch));
  }
  feature.source_id = clip.source_id;
  return feature;
}

LogMelFeature featurize(const audio::AudioClip& clip, const FeatureConfig& config,
                        const std::optional<augment::StretchParams>& stretch) {
  return FeatureExtractor(config)(clip, stretch);
}

nlohmann::json lineage_json(const LogMelFeature& feature) {
  return nlohmann::json{{"source_id", feature.source_id},
                        {"real_frames", feature.real_frames},
                        {"lineage", feature.lineage}};
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DecodeError(path.string() + ": truncated");
  return v;
}

}  // namespace

void write_feature(const std::filesystem::path& path, const LogMelFeature& feature) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("GTF1", 4);
  put_u32(out, static_cast<std::uint32_t>(feature.values.rows()));
  put_u32(out, static_cast<std::uint32_t>(feature.values.cols()));
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = feature.values;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * sizeof(float)));
  const std::string blob = lineage_json(feature).dump();
  put_u32(out, static_cast<std::uint32_t>(blob.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("failed writing " + path.string());
}

LogMelFeature read_feature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "GTF1", 4) != 0) {
    throw DecodeError(path.string() + ": bad feature magic");
  }
  const std::uint32_t rows = get_u32(in, path);
  const std::uint32_t cols = get_u32(in, path);
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  if (!in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(float)))) {
    throw DecodeError(path.string() + ": truncated feature matrix");
  }
  const std::uint32_t blob_len = get_u32(in, path);
  std::string blob(blob_len, '\0');
  if (!in.read(blob.data(), blob_len)) throw DecodeError(path.string() + ": truncated lineage");

  LogMelFeature feature;
  feature.values = rm;
  const auto j = nlohmann::json::parse(blob);
  feature.source_id = j.value("source_id", std::string{});
  feature.real_frames = j.value("real_frames", Eigen::Index{0});
  feature.lineage = j.value("lineage", std::vector<augment::AugmentationSpec>{});
  return feature;
}

}  // namespace geotag::features
