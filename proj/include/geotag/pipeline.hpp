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

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geotag/augmentation.hpp"
#include "geotag/features.hpp"
#include "geotag/labels.hpp"
#include "geotag/nn/training.hpp"

namespace geotag::pipeline {

enum class Split { Train, Validation, Test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct ManifestEntry {
  std::string file;  // path relative to the manifest's base directory
  int city = 0;
  int scene = 0;
  Split split = Split::Train;
  std::vector<augment::AugmentationSpec> lineage;  // empty for original recordings

  bool is_original() const { return lineage.empty(); }
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;

  std::size_t count(Split split) const;
  std::vector<ManifestEntry> select(Split split) const;
};

struct ParseOptions {
  // Used when the file has no split column (DCASE fold lists).
  std::optional<Split> default_split;
  // Warn about entries whose audio file does not exist under base_dir.
  bool check_files = true;
};

/// Parses a TSV manifest. The header names the columns; `filename` and
/// `scene_label` are required. The city comes from `city_label`, else from
/// the prefix of `identifier`, else from the DCASE file name pattern
/// "<scene>-<city>-...". A headerless file whose first row reads
/// (filename, scene, city, split, ...) uses that column order; any other
/// headerless file is a DCASE fold list (filename, scene_label, ...). Throws ValidationError naming the line on
/// unknown labels or duplicate entries.
DatasetManifest parse_manifest(const std::filesystem::path& path, const ParseOptions& options = {});

/// Writes the normalized TSV form (filename, scene_label, city_label, split,
/// lineage-as-JSON).
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads DCASE 2018 evaluation_setup fold 1: the train list becomes the train
/// split and the evaluate list the validation split.
DatasetManifest load_dcase_setup(const std::filesystem::path& dataset_root);

std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& file, augment::Kind kind,
                          std::uint64_t ordinal);

/// Outputs per original train recording for each augmentation kind.
int outputs_per_input(augment::Kind kind);

struct ExpansionReport {
  std::size_t originals = 0;
  std::map<std::string, std::size_t> added_per_kind;
  std::size_t total = 0;  // train entries after expansion
};

nlohmann::json to_json(const ExpansionReport& report);

/// Adds cyclic (1), drop (2) and stretch (4) entries per original train
/// entry. Validation and test entries pass through untouched.
DatasetManifest expand_dataset(const DatasetManifest& manifest, const std::set<augment::Kind>& augments,
                               std::uint64_t master_seed, ExpansionReport* report = nullptr);

/// Directory of "GTF1" records plus index.json mapping cache keys to files.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  bool contains(const std::string& key) const;
  features::LogMelFeature load(const std::string& key) const;
  /// Writes to a temporary file and renames it into place before indexing.
  void store(const std::string& key, const features::LogMelFeature& feature);
  void flush() const;
  std::size_t size() const { return index_.size(); }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> index_;
};

/// Content hash of (file, lineage, feature config).
std::string cache_key(const ManifestEntry& entry, const features::FeatureConfig& config);

/// load -> resample -> waveform augments -> (channel average | per-channel
/// stretch) -> trim -> log-mel -> pad. Drop and stretch draws are resolved
/// from the entry's seeds and recorded in the returned lineage.
features::LogMelFeature compute_feature(const DatasetManifest& manifest, const ManifestEntry& entry,
                                        const features::FeatureExtractor& extractor);

struct MaterializeReport {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::vector<std::string> failures;
};

/// Computes and caches every entry's feature; existing keys are skipped and
/// per-file failures are collected rather than thrown. threads <= 1 runs
/// sequentially.
MaterializeReport materialize_features(const DatasetManifest& manifest, FeatureCache& cache,
                                       const features::FeatureConfig& config, int threads = 1);

/// Loads cached features for the given entries as training examples.
std::vector<nn::Example> load_examples(const std::vector<ManifestEntry>& entries, const FeatureCache& cache,
                                       const features::FeatureConfig& config);

struct SyntheticSpec {
  std::array<double, kNumCities> city_hz{220.0, 330.0, 495.0, 742.5, 1113.75, 1670.625};
  std::array<double, kNumScenes> scene_am_hz{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double seconds = 2.0;
  int sample_rate = 48000;
  double amplitude = 0.5;
  double noise_db = -20.0;  // relative to the tone RMS
};

/// Writes n_per_pair stereo clips for every (city, scene) pair into
/// out_dir/audio and returns the manifest (70/15/15 split, seeded).
DatasetManifest generate_synthetic_dataset(const std::filesystem::path& out_dir, int n_per_pair,
                                           std::uint64_t seed, const SyntheticSpec& spec = {});

}  // namespace geotag::pipeline
