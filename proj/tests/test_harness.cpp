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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "geotag/errors.hpp"
#include "geotag/harness.hpp"
#include "geotag/nn/checkpoint.hpp"
#include "geotag/rng.hpp"

using namespace geotag;
using namespace geotag::harness;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("geotag_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "geotag");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Small backbone so the command tests stay fast on a full-size feature.
fs::path small_model_config(const fs::path& dir) {
  nn::ModelConfig c = nn::multitask_config(87);
  c.backbone = {nn::LayerSpec::conv(8, 5), nn::LayerSpec::batchnorm(), nn::LayerSpec::maxpool(4, 4),
                nn::LayerSpec::dropout(0.3), nn::LayerSpec::conv(16, 3), nn::LayerSpec::batchnorm(),
                nn::LayerSpec::maxpool(2, 2), nn::LayerSpec::dropout(0.3)};
  const fs::path path = dir / "small_model.json";
  write_text(path, nlohmann::json(c).dump(2));
  return path;
}

}  // namespace

TEST_CASE("report: all-correct split gives 100% and a diagonal confusion") {
  const std::vector<int> city = {0, 1, 2, 3, 4, 5, 5};
  const std::vector<int> scene = {0, 1, 2, 3, 4, 5, 9};
  const EvalReport r = build_report(city, city, scene, scene);
  CHECK(r.overall_accuracy.at("city") == 100.0);
  CHECK(r.overall_accuracy.at("scene") == 100.0);
  CHECK(r.confusion.trace() == 7);
  CHECK(r.confusion(5, 5) == 2);
  CHECK(r.confusion.sum() == 7);
}

TEST_CASE("report: row sums, trace and per-scene counts agree with the labels") {
  CounterRng rng(4, 0);
  std::vector<int> tc, pc, ts;
  for (int i = 0; i < 500; ++i) {
    tc.push_back(static_cast<int>(rng.uniform_int(0, 5)));
    pc.push_back(rng.uniform() < 0.6 ? tc.back() : static_cast<int>(rng.uniform_int(0, 5)));
    ts.push_back(static_cast<int>(rng.uniform_int(0, 9)));
  }
  const EvalReport r = build_report(tc, pc, ts);
  CHECK(r.overall_accuracy.count("scene") == 0);
  for (int c = 0; c < kNumCities; ++c) {
    CHECK(r.confusion.row(c).sum() == std::count(tc.begin(), tc.end(), c));
  }
  std::size_t correct = 0, files = 0;
  for (int i = 0; i < 500; ++i) correct += tc[static_cast<std::size_t>(i)] == pc[static_cast<std::size_t>(i)];
  CHECK(r.overall_accuracy.at("city") == doctest::Approx(100.0 * static_cast<double>(r.confusion.trace()) / 500.0));
  CHECK(static_cast<std::size_t>(r.confusion.trace()) == correct);
  for (const auto& row : r.per_scene) files += row.files;
  CHECK(files == 500);
  CHECK(r.per_scene.size() == 10);
  CHECK_THROWS_AS(build_report({0}, {6}, {0}), InvalidInputError);
}

TEST_CASE("report: CSV layouts") {
  const EvalReport r = build_report({0, 1}, {0, 0}, {3, 3});
  const std::string confusion = confusion_csv(r);
  CHECK(confusion.rfind("B,H,L,P,S,V\n", 0) == 0);
  CHECK(confusion.find("1,0,0,0,0,0\n1,0,0,0,0,0\n") != std::string::npos);
  const std::string scenes = per_scene_csv(r);
  CHECK(scenes.rfind("scene,city_accuracy,test_files\n", 0) == 0);
  CHECK(scenes.find("metro_station,50.00,2\n") != std::string::npos);
  CHECK(to_json(r)["confusion"]["labels"].size() == 6);
}

TEST_CASE("cli: prepare synthetic, malformed manifests, usage errors") {
  TempDir dir("prepare");
  CHECK(cli({"prepare", "--synthetic", "1", "--seed", "7", "--out", (dir.path / "m.tsv").string()}) == 0);
  const auto m = pipeline::parse_manifest(dir.path / "m.tsv");
  CHECK(m.entries.size() == 60);
  CHECK(m.warnings.empty());

  write_text(dir.path / "bad.tsv", "filename\tscene_label\tcity_label\tsplit\nx.wav\tpark\tBerlin\ttrain\n");
  CHECK(cli({"prepare", "--manifest", (dir.path / "bad.tsv").string(), "--out", (dir.path / "o.tsv").string()}) == 2);
  write_text(dir.path / "bad2.tsv", "filename\tcity_label\nx.wav\tParis\n");
  CHECK(cli({"prepare", "--manifest", (dir.path / "bad2.tsv").string(), "--out", (dir.path / "o.tsv").string()}) == 2);
  CHECK(cli({"prepare", "--out", (dir.path / "o.tsv").string()}) == 2);
  CHECK(cli({"frobnicate"}) == 2);
  CHECK(cli({"evaluate", "--checkpoint", (dir.path / "missing.gtm").string(), "--manifest",
             (dir.path / "m.tsv").string()}) == 2);
}

TEST_CASE("cli: prepare from DCASE metadata reports the fold-1 split") {
  TempDir dir("dcase");
  fs::create_directories(dir.path / "evaluation_setup");
  std::ostringstream train, eval;
  for (int i = 0; i < 6122; ++i) train << "audio/park-london-" << i << "-0-a.wav\tpark\n";
  for (int i = 0; i < 2518; ++i) eval << "audio/tram-helsinki-" << i << "-0-a.wav\ttram\n";
  write_text(dir.path / "evaluation_setup" / "fold1_train.txt", train.str());
  write_text(dir.path / "evaluation_setup" / "fold1_evaluate.txt", eval.str());
  PrepareOptions o;
  o.dcase_root = dir.path;
  o.out = dir.path / "manifest.tsv";
  const auto report = cmd_prepare(o);
  CHECK(report["train"] == 6122);
  CHECK(report["validation"] == 2518);
}

TEST_CASE("cli: augment counts and the identity condition") {
  TempDir dir("augment");
  REQUIRE(cli({"prepare", "--synthetic", "1", "--seed", "2", "--out", (dir.path / "m.tsv").string()}) == 0);
  AugmentOptions o;
  o.manifest = dir.path / "m.tsv";
  o.augments = {augment::Kind::Cyclic, augment::Kind::Stretch};
  o.out = dir.path / "cs.tsv";
  CHECK(cmd_augment(o)["total"] == 42 * 6);
  o.augments.clear();
  o.out = dir.path / "none.tsv";
  CHECK(cmd_augment(o)["total"] == 42);
  CHECK(pipeline::parse_manifest(o.out).entries.size() == 60);
}

TEST_CASE("cli: train, evaluate, determinism and exit codes") {
  TempDir dir("train");
  const fs::path manifest = dir.path / "m.tsv";
  REQUIRE(cli({"prepare", "--synthetic", "1", "--seed", "3", "--out", manifest.string()}) == 0);
  const fs::path model_json = small_model_config(dir.path);

  TrainCommandOptions o;
  o.manifest = manifest;
  o.model_config = model_json;
  o.features.frames = 87;
  o.epochs = 2;
  o.batch = 8;
  o.seed = 5;
  o.lr = 1e-3;
  o.quiet = true;
  o.out = dir.path / "a.gtm";
  const auto first = cmd_train(o);
  o.out = dir.path / "b.gtm";
  const auto second = cmd_train(o);
  CHECK(read_text(first.checkpoint) == read_text(second.checkpoint));
  CHECK(read_text(first.history) == read_text(second.history));

  // Target 0 stops after the first eval-mode pass over the training split.
  o.epochs = 3;
  o.target_accuracy = 0.0;
  o.out = dir.path / "t.gtm";
  const auto stopped = cmd_train(o);
  REQUIRE(stopped.result.history.size() == 1);
  REQUIRE(stopped.result.history[0].eval_city_accuracy);
  EvaluateOptions e;
  e.checkpoint = o.out;
  e.manifest = manifest;
  e.split = "train";
  e.out_dir = dir.path / "eval";
  const EvalReport report = cmd_evaluate(e);
  CHECK(report.total == 42);
  CHECK(std::abs(report.overall_accuracy.at("city") - 100.0 * *stopped.result.history[0].eval_city_accuracy) < 0.1);
  CHECK(fs::exists(dir.path / "eval" / "report.json"));
  CHECK(read_text(dir.path / "eval" / "confusion.csv").rfind("B,H,L,P,S,V", 0) == 0);
  CHECK(fs::exists(dir.path / "eval" / "per_scene.csv"));

  CHECK(cli({"train", "--manifest", manifest.string(), "--arch", "singletask", "--model-config", model_json.string(),
             "--frames", "87", "--epochs", "1", "--batch", "16", "--quiet", "--out", (dir.path / "s.gtm").string()}) == 0);
  const auto single = nn::load_checkpoint(dir.path / "s.gtm");
  REQUIRE(single.model.head_count() == 1);
  CHECK(single.model.head(0).dense.units() == 6);
  CHECK(cli({"evaluate", "--checkpoint", (dir.path / "s.gtm").string(), "--manifest", manifest.string(),
             "--split", "test"}) == 0);

  write_text(dir.path / "cfg.json", nlohmann::json{{"epochs", 1}, {"batch", 16}, {"frames", 87}, {"quiet", true},
                                                   {"lr", 1e38}, {"model-config", model_json.string()}}
                                        .dump());
  CHECK(cli({"train", "--config", (dir.path / "cfg.json").string(), "--manifest", manifest.string(), "--out",
             (dir.path / "n.gtm").string()}) == 3);
  CHECK(cli({"train", "--config", (dir.path / "cfg.json").string(), "--lr", "1e-3", "--manifest", manifest.string(),
             "--out", (dir.path / "ok.gtm").string()}) == 0);
  CHECK(cli({"train", "--manifest", manifest.string(), "--arch", "threetask", "--out",
             (dir.path / "x.gtm").string()}) == 2);
}
