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
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geotag/labels.hpp"
#include "geotag/nn/training.hpp"
#include "geotag/pipeline.hpp"

namespace geotag::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

struct SceneAccuracy {
  std::string scene;
  double city_accuracy = 0.0;  // percent; 0 when the scene has no files
  std::size_t files = 0;
};

struct EvalReport {
  std::string split;
  std::size_t total = 0;
  std::map<std::string, double> overall_accuracy;  // percent per head
  std::vector<SceneAccuracy> per_scene;            // one row per scene label
  Eigen::Matrix<long long, kNumCities, kNumCities> confusion =
      Eigen::Matrix<long long, kNumCities, kNumCities>::Zero();  // rows true, cols predicted
  std::vector<double> loss_history;
  nlohmann::json config_snapshot;
};

/// Builds the report from per-file labels and predictions. `pred_scene` is
/// absent for single-task models.
EvalReport build_report(const std::vector<int>& true_city, const std::vector<int>& pred_city,
                        const std::vector<int>& true_scene,
                        const std::optional<std::vector<int>>& pred_scene = std::nullopt);

nlohmann::json to_json(const EvalReport& report);
/// Header "B,H,L,P,S,V", then one row of counts per true city.
std::string confusion_csv(const EvalReport& report);
/// Header "scene,city_accuracy,test_files", then one row per scene.
std::string per_scene_csv(const EvalReport& report);

/// GEOTAG_CACHE_DIR if set, else <manifest dir>/.geotag_cache.
std::filesystem::path default_cache_dir(const std::filesystem::path& manifest_path);

struct PrepareOptions {
  std::optional<std::filesystem::path> manifest;
  std::optional<int> synthetic;
  std::optional<std::filesystem::path> dcase_root;
  std::uint64_t seed = 0;
  std::filesystem::path out;  // normalized manifest path
};

/// Returns the split report {"train": n, "validation": n, "test": n, ...}.
nlohmann::json cmd_prepare(const PrepareOptions& options);

struct AugmentOptions {
  std::filesystem::path manifest;
  std::set<augment::Kind> augments;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::optional<std::filesystem::path> report;
};

nlohmann::json cmd_augment(const AugmentOptions& options);

struct ExtractOptions {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> cache_dir;
  features::FeatureConfig features;
  int threads = 1;
};

nlohmann::json cmd_extract(const ExtractOptions& options);

struct TrainCommandOptions {
  std::filesystem::path manifest;
  std::string arch = "multitask";
  std::optional<std::filesystem::path> model_config;
  int epochs = 200;
  int batch = 32;
  int patience = 20;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  bool normalize = true;
  std::optional<double> target_accuracy;
  int min_epochs = 0;
  std::optional<std::filesystem::path> cache_dir;
  features::FeatureConfig features;
  int threads = 1;
  std::filesystem::path out;  // checkpoint
  std::optional<std::filesystem::path> history;
  bool quiet = false;
};

struct TrainSummary {
  nn::TrainResult result;
  std::filesystem::path checkpoint;
  std::filesystem::path history;
};

TrainSummary cmd_train(const TrainCommandOptions& options);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::string split = "test";
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> out_dir;
  int threads = 1;
};

EvalReport cmd_evaluate(const EvaluateOptions& options);

/// The augmentation-ablation matrix: every condition (cyclic, drop, stretch,
/// cyclic+stretch, all) for the multi-task and single-task networks, each
/// evaluated on the train, validation and test splits. Writes grid.csv and
/// grid.json into out_dir.
nlohmann::json run_grid(const TrainCommandOptions& base, const std::filesystem::path& out_dir);

/// Entry point of the `geotag` binary; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace geotag::harness
