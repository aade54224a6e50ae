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

#include "geotag/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "geotag/errors.hpp"
#include "geotag/rng.hpp"

namespace geotag::pipeline {

namespace fs = std::filesystem;
using augment::AugmentationSpec;
using augment::Kind;

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "validation" || name == "val" || name == "evaluate") return Split::Validation;
  if (name == "test") return Split::Test;
  throw ValidationError("unknown split '" + name + "'");
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.split == split; }));
}

std::vector<ManifestEntry> DatasetManifest::select(Split split) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const ManifestEntry& e) { return e.split == split; });
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) fields.push_back(field);
  if (!line.empty() && line.back() == '\t') fields.emplace_back();
  return fields;
}

std::string strip_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

// "audio/airport-barcelona-0-0-a.wav" -> "barcelona"
std::optional<std::string> city_from_filename(const std::string& file) {
  const std::string stem = fs::path(file).stem().string();
  const auto first = stem.find('-');
  if (first == std::string::npos) return std::nullopt;
  const auto second = stem.find('-', first + 1);
  return stem.substr(first + 1, second == std::string::npos ? std::string::npos : second - first - 1);
}

std::string lineage_string(const std::vector<AugmentationSpec>& lineage) {
  return nlohmann::json(lineage).dump();
}

}  // namespace

DatasetManifest parse_manifest(const fs::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());

  DatasetManifest manifest;
  manifest.base_dir = fs::absolute(path).parent_path();

  std::map<std::string, std::size_t> column;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::unordered_set<std::string> seen;

  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";

    if (!header_seen) {
      header_seen = true;
      if (fields.front() == "filename") {
        for (std::size_t i = 0; i < fields.size(); ++i) column[fields[i]] = i;
        if (!column.count("scene_label")) throw ValidationError(where + "header lacks a scene_label column");
        continue;
      }
      bool canonical = false;
      if (fields.size() >= 4 && city_index(fields[2])) {
        try {
          split_from_string(fields[3]);
          canonical = true;
        } catch (const ValidationError&) {
        }
      }
      if (canonical) {
        column = {{"filename", 0}, {"scene_label", 1}, {"city_label", 2}, {"split", 3}, {"lineage", 4}};
      } else {
        column = {{"filename", 0}, {"scene_label", 1}};
        if (fields.size() > 2) column["identifier"] = 2;
      }
    }

    const auto get = [&](const std::string& name) -> std::optional<std::string> {
      const auto it = column.find(name);
      if (it == column.end() || it->second >= fields.size()) return std::nullopt;
      return fields[it->second];
    };

    ManifestEntry entry;
    entry.file = *get("filename");
    if (entry.file.empty()) throw ValidationError(where + "empty filename");

    const auto scene = get("scene_label");
    if (!scene) throw ValidationError(where + "missing scene_label field");
    const auto scene_idx = scene_index(*scene);
    if (!scene_idx) throw ValidationError(where + "unknown scene label '" + *scene + "'");
    entry.scene = *scene_idx;

    std::optional<std::string> city = get("city_label");
    if (!city || city->empty()) {
      if (const auto id = get("identifier"); id && !id->empty()) {
        city = id->substr(0, id->find('-'));
      } else {
        city = city_from_filename(entry.file);
      }
    }
    if (!city) throw ValidationError(where + "cannot determine the city of '" + entry.file + "'");
    const auto city_idx = city_index(*city);
    if (!city_idx) throw ValidationError(where + "unknown city label '" + *city + "'");
    entry.city = *city_idx;

    if (const auto split = get("split"); split && !split->empty()) {
      try {
        entry.split = split_from_string(*split);
      } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
      }
    } else if (options.default_split) {
      entry.split = *options.default_split;
    } else {
      throw ValidationError(where + "missing split");
    }

    if (const auto lineage = get("lineage"); lineage && !lineage->empty()) {
      try {
        entry.lineage = nlohmann::json::parse(*lineage).get<std::vector<AugmentationSpec>>();
      } catch (const std::exception& e) {
        throw ValidationError(where + "bad lineage: " + e.what());
      }
    }
    if (!entry.is_original() && entry.split != Split::Train) {
      throw ValidationError(where + "augmented entries are only allowed in the train split");
    }

    const std::string key = entry.file + "|" + lineage_string(entry.lineage);
    if (!seen.insert(key).second) throw ValidationError(where + "duplicate entry '" + entry.file + "'");

    if (options.check_files && entry.is_original() && !fs::exists(manifest.base_dir / entry.file)) {
      manifest.warnings.push_back(where + "missing audio file " + entry.file);
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "filename\tscene_label\tcity_label\tsplit\tlineage\n";
  for (const ManifestEntry& e : manifest.entries) {
    out << e.file << '\t' << kSceneNames[e.scene] << '\t' << kCityNames[e.city] << '\t' << to_string(e.split)
        << '\t' << (e.is_original() ? "" : lineage_string(e.lineage)) << '\n';
  }
}

DatasetManifest load_dcase_setup(const fs::path& dataset_root) {
  const fs::path setup = dataset_root / "evaluation_setup";
  const auto find = [&](const std::string& stem) {
    for (const char* ext : {".txt", ".csv"}) {
      const fs::path p = setup / (stem + ext);
      if (fs::exists(p)) return p;
    }
    throw ValidationError("missing " + (setup / (stem + ".txt")).string());
  };
  DatasetManifest train = parse_manifest(find("fold1_train"), {Split::Train, true});
  DatasetManifest val = parse_manifest(find("fold1_evaluate"), {Split::Validation, true});

  DatasetManifest out;
  out.base_dir = dataset_root;
  out.entries = std::move(train.entries);
  out.entries.insert(out.entries.end(), val.entries.begin(), val.entries.end());
  out.warnings = std::move(train.warnings);
  out.warnings.insert(out.warnings.end(), val.warnings.begin(), val.warnings.end());
  return out;
}

std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& file, Kind kind, std::uint64_t ordinal) {
  std::uint64_t h = hash_combine(master_seed, fnv1a64(file));
  h = hash_combine(h, fnv1a64(augment::to_string(kind)));
  return hash_combine(h, ordinal);
}

int outputs_per_input(Kind kind) {
  switch (kind) {
    case Kind::Cyclic: return 1;
    case Kind::Drop: return 2;
    case Kind::Stretch: return 4;
  }
  return 0;
}

nlohmann::json to_json(const ExpansionReport& report) {
  return nlohmann::json{{"originals", report.originals},
                        {"added_per_kind", report.added_per_kind},
                        {"total", report.total}};
}

DatasetManifest expand_dataset(const DatasetManifest& manifest, const std::set<Kind>& augments,
                               std::uint64_t master_seed, ExpansionReport* report) {
  DatasetManifest out;
  out.base_dir = manifest.base_dir;
  out.warnings = manifest.warnings;
  ExpansionReport rep;
  for (Kind k : augments) rep.added_per_kind[augment::to_string(k)] = 0;

  std::unordered_set<std::uint64_t> seeds;
  std::vector<ManifestEntry> added;
  for (const ManifestEntry& e : manifest.entries) {
    out.entries.push_back(e);
    if (e.split != Split::Train || !e.is_original()) continue;
    ++rep.originals;
    for (Kind kind : augments) {
      for (int ordinal = 0; ordinal < outputs_per_input(kind); ++ordinal) {
        AugmentationSpec spec;
        spec.kind = kind;
        spec.stream = static_cast<std::uint64_t>(ordinal);
        spec.seed = derive_seed(master_seed, e.file, kind, spec.stream);
        if (kind == Kind::Cyclic) spec.params = augment::CyclicParams{0.5};
        if (!seeds.insert(spec.seed).second) {
          throw Error("augmentation seed collision for '" + e.file + "'; choose another master seed");
        }
        ManifestEntry aug = e;
        aug.lineage = {spec};
        added.push_back(std::move(aug));
        ++rep.added_per_kind[augment::to_string(kind)];
      }
    }
  }
  out.entries.insert(out.entries.end(), std::make_move_iterator(added.begin()),
                     std::make_move_iterator(added.end()));
  rep.total = out.count(Split::Train);
  if (report) *report = rep;
  return out;
}

FeatureCache::FeatureCache(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  const fs::path index = dir_ / "index.json";
  if (fs::exists(index)) {
    std::ifstream in(index);
    index_ = nlohmann::json::parse(in).get<std::map<std::string, std::string>>();
  }
}

bool FeatureCache::contains(const std::string& key) const {
  const auto it = index_.find(key);
  return it != index_.end() && fs::exists(dir_ / it->second);
}

features::LogMelFeature FeatureCache::load(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw InvalidStateError("feature cache miss for key " + key);
  return features::read_feature(dir_ / it->second);
}

void FeatureCache::store(const std::string& key, const features::LogMelFeature& feature) {
  const std::string name = key + ".gtf";
  const fs::path tmp = dir_ / (name + ".tmp");
  features::write_feature(tmp, feature);
  fs::rename(tmp, dir_ / name);
  index_[key] = name;
}

void FeatureCache::flush() const {
  const fs::path tmp = dir_ / "index.json.tmp";
  {
    std::ofstream out(tmp);
    out << nlohmann::json(index_).dump(1) << '\n';
  }
  fs::rename(tmp, dir_ / "index.json");
}

std::string cache_key(const ManifestEntry& entry, const features::FeatureConfig& config) {
  const std::string content =
      entry.file + "\n" + lineage_string(entry.lineage) + "\n" + nlohmann::json(config).dump();
  std::ostringstream key;
  key << std::hex << std::setfill('0') << std::setw(16) << fnv1a64(content) << std::setw(16)
      << mix64(fnv1a64(content) ^ fnv1a64(std::string(content.rbegin(), content.rend())));
  return key.str();
}

features::LogMelFeature compute_feature(const DatasetManifest& manifest, const ManifestEntry& entry,
                                        const features::FeatureExtractor& extractor) {
  const features::FeatureConfig& config = extractor.config();
  audio::AudioClip clip = audio::resample(audio::load_wav(manifest.base_dir / entry.file), config.sample_rate);
  clip.source_id = entry.file;
  clip.labels = ClipLabels{entry.city, entry.scene};

  std::vector<AugmentationSpec> resolved;
  std::optional<augment::StretchParams> stretch;
  for (AugmentationSpec spec : entry.lineage) {
    switch (spec.kind) {
      case Kind::Cyclic: {
        if (!std::holds_alternative<augment::CyclicParams>(spec.params)) spec.params = augment::CyclicParams{};
        clip = augment::cyclic_shift(clip, std::get<augment::CyclicParams>(spec.params).fraction);
        break;
      }
      case Kind::Drop: {
        if (!std::holds_alternative<augment::DropParams>(spec.params)) {
          spec.params = augment::draw_drop_params(clip.length(), spec.seed, spec.stream);
        }
        clip = augment::drop_interval(clip, std::get<augment::DropParams>(spec.params));
        break;
      }
      case Kind::Stretch: {
        if (!std::holds_alternative<augment::StretchParams>(spec.params)) {
          spec.params = augment::draw_stretch_params(config.window / 2 + 1,
                                                     features::frame_count(clip.length(), config.hop),
                                                     spec.seed, spec.stream);
        }
        stretch = std::get<augment::StretchParams>(spec.params);
        break;
      }
    }
    resolved.push_back(spec);
  }

  features::LogMelFeature feature = extractor(clip, stretch);
  feature.source_id = entry.file;
  feature.lineage = std::move(resolved);
  return feature;
}

MaterializeReport materialize_features(const DatasetManifest& manifest, FeatureCache& cache,
                                       const features::FeatureConfig& config, int threads) {
  const features::FeatureExtractor extractor(config);
  MaterializeReport report;
  std::mutex lock;

  std::vector<std::pair<const ManifestEntry*, std::string>> todo;
  for (const ManifestEntry& e : manifest.entries) {
    std::string key = cache_key(e, config);
    if (cache.contains(key)) {
      ++report.skipped;
    } else {
      todo.emplace_back(&e, std::move(key));
    }
  }
  // Two entries may share a key (identical lineage); compute each key once.
  std::sort(todo.begin(), todo.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  todo.erase(std::unique(todo.begin(), todo.end(), [](const auto& a, const auto& b) { return a.second == b.second; }),
             todo.end());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const auto& [entry, key] = todo[i];
      try {
        features::LogMelFeature f = compute_feature(manifest, *entry, extractor);
        std::lock_guard<std::mutex> guard(lock);
        cache.store(key, f);
        ++report.written;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> guard(lock);
        report.failures.push_back(entry->file + ": " + e.what());
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::sort(report.failures.begin(), report.failures.end());
  cache.flush();
  return report;
}

std::vector<nn::Example> load_examples(const std::vector<ManifestEntry>& entries, const FeatureCache& cache,
                                       const features::FeatureConfig& config) {
  std::vector<nn::Example> out;
  out.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    const std::string key = cache_key(e, config);
    if (!cache.contains(key)) throw InvalidStateError("no cached feature for " + e.file);
    out.push_back({cache.load(key).values, e.city, e.scene});
  }
  return out;
}

DatasetManifest generate_synthetic_dataset(const fs::path& out_dir, int n_per_pair, std::uint64_t seed,
                                           const SyntheticSpec& spec) {
  if (n_per_pair < 1) throw InvalidInputError("synthetic dataset: n_per_pair must be >= 1");
  fs::create_directories(out_dir / "audio");

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  const auto length = static_cast<Eigen::Index>(std::lround(spec.seconds * spec.sample_rate));
  const double noise_sd = spec.amplitude / std::sqrt(2.0) * std::pow(10.0, spec.noise_db / 20.0);

  std::uint64_t clip_no = 0;
  for (int city = 0; city < kNumCities; ++city) {
    for (int scene = 0; scene < kNumScenes; ++scene) {
      for (int i = 0; i < n_per_pair; ++i, ++clip_no) {
        CounterRng rng(seed, clip_no);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double am_phase = rng.uniform(0.0, 2.0 * M_PI);
        audio::AudioClip clip;
        clip.sample_rate = spec.sample_rate;
        clip.samples.resize(2, length);
        for (Eigen::Index n = 0; n < length; ++n) {
          const double t = static_cast<double>(n) / spec.sample_rate;
          const double envelope = 0.5 + 0.5 * std::sin(2.0 * M_PI * spec.scene_am_hz[scene] * t + am_phase);
          const double tone = spec.amplitude * envelope * std::sin(2.0 * M_PI * spec.city_hz[city] * t + phase);
          for (int c = 0; c < 2; ++c) clip.samples(c, n) = std::clamp(tone + noise_sd * rng.normal(), -1.0, 1.0);
        }
        std::string city_name(kCityNames[city]);
        std::transform(city_name.begin(), city_name.end(), city_name.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        const std::string file = "audio/" + std::string(kSceneNames[scene]) + "-" + city_name + "-" +
                                 std::to_string(i) + "-synthetic.wav";
        audio::write_wav(out_dir / file, clip);
        manifest.entries.push_back({file, city, scene, Split::Train, {}});
      }
    }
  }

  std::vector<std::size_t> order(manifest.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng shuffle(seed, 0x5b117);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[shuffle.uniform_int(0, i)]);
  const auto n = order.size();
  const auto n_train = static_cast<std::size_t>(std::lround(0.70 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n)));
  for (std::size_t r = 0; r < n; ++r) {
    manifest.entries[order[r]].split = r < n_train ? Split::Train : r < n_train + n_val ? Split::Validation : Split::Test;
  }
  return manifest;
}

}  // namespace geotag::pipeline
