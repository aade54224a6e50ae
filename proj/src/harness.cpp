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

#include "geotag/harness.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "geotag/errors.hpp"
#include "geotag/nn/checkpoint.hpp"

namespace geotag::harness {

namespace fs = std::filesystem;
using pipeline::DatasetManifest;
using pipeline::Split;

EvalReport build_report(const std::vector<int>& true_city, const std::vector<int>& pred_city,
                        const std::vector<int>& true_scene, const std::optional<std::vector<int>>& pred_scene) {
  const std::size_t n = true_city.size();
  if (pred_city.size() != n || true_scene.size() != n || (pred_scene && pred_scene->size() != n)) {
    throw InvalidInputError("report: label and prediction counts differ");
  }
  EvalReport report;
  report.total = n;

  std::array<std::size_t, kNumScenes> scene_files{}, scene_correct{};
  std::size_t city_correct = 0, scene_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (true_city[i] < 0 || true_city[i] >= kNumCities || pred_city[i] < 0 || pred_city[i] >= kNumCities ||
        true_scene[i] < 0 || true_scene[i] >= kNumScenes) {
      throw InvalidInputError("report: label out of range");
    }
    ++report.confusion(true_city[i], pred_city[i]);
    const bool hit = true_city[i] == pred_city[i];
    city_correct += hit;
    ++scene_files[true_scene[i]];
    scene_correct[true_scene[i]] += hit;
    if (pred_scene) scene_hits += (*pred_scene)[i] == true_scene[i];
  }
  const auto percent = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : 100.0 * static_cast<double>(a) / static_cast<double>(b);
  };
  report.overall_accuracy["city"] = percent(city_correct, n);
  if (pred_scene) report.overall_accuracy["scene"] = percent(scene_hits, n);
  for (int s = 0; s < kNumScenes; ++s) {
    report.per_scene.push_back({std::string(kSceneNames[s]), percent(scene_correct[s], scene_files[s]), scene_files[s]});
  }
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json per_scene = nlohmann::json::array();
  for (const auto& row : report.per_scene) {
    per_scene.push_back({{"scene", row.scene}, {"city_accuracy", row.city_accuracy}, {"files", row.files}});
  }
  nlohmann::json labels = nlohmann::json::array();
  nlohmann::json matrix = nlohmann::json::array();
  for (int r = 0; r < kNumCities; ++r) {
    labels.push_back(std::string(1, city_initial(r)));
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < kNumCities; ++c) row.push_back(report.confusion(r, c));
    matrix.push_back(row);
  }
  return nlohmann::json{{"split", report.split},
                        {"total", report.total},
                        {"overall_accuracy", report.overall_accuracy},
                        {"per_scene_city_accuracy", per_scene},
                        {"confusion", {{"labels", labels}, {"rows_true_cols_predicted", matrix}}},
                        {"loss_history", report.loss_history},
                        {"config", report.config_snapshot}};
}

std::string confusion_csv(const EvalReport& report) {
  std::ostringstream out;
  for (int c = 0; c < kNumCities; ++c) out << (c ? "," : "") << city_initial(c);
  out << '\n';
  for (int r = 0; r < kNumCities; ++r) {
    for (int c = 0; c < kNumCities; ++c) out << (c ? "," : "") << report.confusion(r, c);
    out << '\n';
  }
  return out.str();
}

std::string per_scene_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "scene,city_accuracy,test_files\n" << std::fixed << std::setprecision(2);
  for (const auto& row : report.per_scene) out << row.scene << ',' << row.city_accuracy << ',' << row.files << '\n';
  return out.str();
}

fs::path default_cache_dir(const fs::path& manifest_path) {
  if (const char* env = std::getenv("GEOTAG_CACHE_DIR"); env && *env) return env;
  return std::filesystem::absolute(manifest_path).parent_path() / ".geotag_cache";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// Re-expresses file paths relative to the directory the manifest will live in.
DatasetManifest rebase(DatasetManifest manifest, const fs::path& manifest_path) {
  const fs::path target = fs::absolute(manifest_path).parent_path();
  const fs::path source = fs::absolute(manifest.base_dir);
  if (fs::weakly_canonical(target) != fs::weakly_canonical(source)) {
    for (auto& e : manifest.entries) e.file = fs::proximate(source / e.file, target).generic_string();
  }
  manifest.base_dir = target;
  return manifest;
}

nlohmann::json split_report(const DatasetManifest& m) {
  return nlohmann::json{{"entries", m.entries.size()},
                        {"train", m.count(Split::Train)},
                        {"validation", m.count(Split::Validation)},
                        {"test", m.count(Split::Test)},
                        {"warnings", m.warnings.size()}};
}

DatasetManifest subset(const DatasetManifest& m, std::initializer_list<Split> splits) {
  DatasetManifest out;
  out.base_dir = m.base_dir;
  for (const auto& e : m.entries) {
    if (std::find(splits.begin(), splits.end(), e.split) != splits.end()) out.entries.push_back(e);
  }
  return out;
}

void warn_failures(const pipeline::MaterializeReport& report) {
  for (std::size_t i = 0; i < report.failures.size() && i < 10; ++i) {
    std::cerr << "warning: " << report.failures[i] << '\n';
  }
  if (report.failures.size() > 10) std::cerr << "warning: ... " << report.failures.size() - 10 << " more\n";
}

// Cached examples of `entries`, skipping the ones whose features failed.
std::vector<nn::Example> examples_for(const std::vector<pipeline::ManifestEntry>& entries,
                                      const pipeline::FeatureCache& cache, const features::FeatureConfig& config) {
  std::vector<pipeline::ManifestEntry> present;
  for (const auto& e : entries) {
    if (cache.contains(pipeline::cache_key(e, config))) present.push_back(e);
  }
  return pipeline::load_examples(present, cache, config);
}

nn::ModelConfig model_config_for(const TrainCommandOptions& o) {
  nn::ModelConfig mc;
  if (o.model_config) {
    std::ifstream in(*o.model_config);
    if (!in) throw ValidationError("cannot open model config " + o.model_config->string());
    try {
      mc = nlohmann::json::parse(in).get<nn::ModelConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("model config " + o.model_config->string() + ": " + e.what());
    }
  } else {
    mc = nn::multitask_config(o.features.frames);
  }
  if (o.arch == "multitask") {
    mc.heads = {{"scene", 10, 0.001}, {"city", 6, 0.001}};
  } else if (o.arch == "singletask") {
    mc.heads = {{"city", 6, 0.001}};
  } else {
    throw ValidationError("unknown architecture '" + o.arch + "' (expected multitask or singletask)");
  }
  mc.architecture = o.arch;
  mc.input_height = o.features.n_mels;
  mc.input_width = o.features.frames;
  mc.adam.lr = o.lr;
  return mc;
}

}  // namespace

nlohmann::json cmd_prepare(const PrepareOptions& o) {
  const int sources = (o.manifest ? 1 : 0) + (o.synthetic ? 1 : 0) + (o.dcase_root ? 1 : 0);
  if (sources != 1) throw ValidationError("prepare: give exactly one of --manifest, --synthetic, --dcase");
  DatasetManifest manifest;
  if (o.synthetic) {
    manifest = pipeline::generate_synthetic_dataset(fs::absolute(o.out).parent_path(), *o.synthetic, o.seed);
  } else if (o.dcase_root) {
    manifest = pipeline::load_dcase_setup(*o.dcase_root);
  } else {
    manifest = pipeline::parse_manifest(*o.manifest);
  }
  for (std::size_t i = 0; i < manifest.warnings.size() && i < 10; ++i) {
    std::cerr << "warning: " << manifest.warnings[i] << '\n';
  }
  manifest = rebase(std::move(manifest), o.out);
  pipeline::write_manifest(o.out, manifest);
  return split_report(manifest);
}

nlohmann::json cmd_augment(const AugmentOptions& o) {
  const DatasetManifest manifest = pipeline::parse_manifest(o.manifest, {std::nullopt, false});
  pipeline::ExpansionReport report;
  DatasetManifest expanded = pipeline::expand_dataset(manifest, o.augments, o.seed, &report);
  pipeline::write_manifest(o.out, rebase(std::move(expanded), o.out));
  const nlohmann::json j = pipeline::to_json(report);
  if (o.report) write_text(*o.report, j.dump(2) + "\n");
  return j;
}

nlohmann::json cmd_extract(const ExtractOptions& o) {
  const DatasetManifest manifest = pipeline::parse_manifest(o.manifest, {std::nullopt, false});
  pipeline::FeatureCache cache(o.cache_dir.value_or(default_cache_dir(o.manifest)));
  const auto report = pipeline::materialize_features(manifest, cache, o.features, o.threads);
  warn_failures(report);
  return nlohmann::json{{"written", report.written}, {"skipped", report.skipped},
                        {"failures", report.failures}, {"cache_dir", cache.dir().string()}};
}

TrainSummary cmd_train(const TrainCommandOptions& o) {
  const DatasetManifest manifest = pipeline::parse_manifest(o.manifest, {std::nullopt, false});
  pipeline::FeatureCache cache(o.cache_dir.value_or(default_cache_dir(o.manifest)));
  warn_failures(pipeline::materialize_features(subset(manifest, {Split::Train, Split::Validation}), cache,
                                               o.features, o.threads));

  const auto train_set = examples_for(manifest.select(Split::Train), cache, o.features);
  const auto val_set = examples_for(manifest.select(Split::Validation), cache, o.features);
  if (train_set.empty()) throw ValidationError("train: no usable training entries in " + o.manifest.string());

  nn::ModelConfig mc = model_config_for(o);
  if (o.normalize) mc.norm = nn::compute_feature_norm(train_set);
  nn::Model<float> model(mc, hash_combine(o.seed, 0x1417));
  nn::AdamState<float> adam;
  adam.config = mc.adam;

  nn::TrainOptions topts;
  topts.epochs = o.epochs;
  topts.batch_size = o.batch;
  topts.seed = o.seed;
  topts.patience = o.patience;
  topts.target_city_accuracy = o.target_accuracy;
  topts.min_epochs = o.min_epochs;
  if (!o.quiet) {
    topts.on_epoch = [](const nn::EpochRecord& r) { std::cerr << nn::to_json(r).dump() << std::endl; };
  }

  TrainSummary summary;
  summary.result = nn::train(model, adam, train_set, val_set, topts);
  summary.checkpoint = o.out;
  summary.history = o.history.value_or(fs::path(o.out.string() + ".history.json"));

  nlohmann::json history = nlohmann::json::array();
  std::vector<double> losses;
  for (const auto& r : summary.result.history) {
    history.push_back(nn::to_json(r));
    losses.push_back(r.loss);
  }
  const nlohmann::json extras{{"features", o.features},
                              {"loss_history", losses},
                              {"stop_reason", summary.result.stop_reason},
                              {"train", {{"epochs", o.epochs}, {"batch", o.batch}, {"seed", o.seed},
                                         {"patience", o.patience}, {"train_entries", train_set.size()},
                                         {"validation_entries", val_set.size()}}}};
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  nn::save_checkpoint(o.out, model, adam, extras);
  write_text(summary.history,
             nlohmann::json{{"history", history}, {"stop_reason", summary.result.stop_reason}}.dump(2) + "\n");
  return summary;
}

EvalReport cmd_evaluate(const EvaluateOptions& o) {
  nn::Checkpoint ck = nn::load_checkpoint(o.checkpoint);
  const auto fconfig = ck.extras.value("features", nlohmann::json::object()).get<features::FeatureConfig>();
  const Split split = pipeline::split_from_string(o.split);

  const DatasetManifest manifest = pipeline::parse_manifest(o.manifest, {std::nullopt, false});
  pipeline::FeatureCache cache(o.cache_dir.value_or(default_cache_dir(o.manifest)));
  const DatasetManifest part = subset(manifest, {split});
  warn_failures(pipeline::materialize_features(part, cache, fconfig, o.threads));
  const auto examples = examples_for(part.entries, cache, fconfig);
  if (examples.empty()) throw ValidationError("evaluate: no usable entries in split '" + o.split + "'");

  const auto probs = nn::predict(ck.model, examples);
  std::vector<int> true_city, true_scene;
  for (const auto& e : examples) {
    true_city.push_back(e.city);
    true_scene.push_back(e.scene);
  }
  const auto city_head = ck.model.head_index("city");
  if (!city_head) throw ValidationError("evaluate: checkpoint has no city head");
  std::optional<std::vector<int>> pred_scene;
  if (const auto scene_head = ck.model.head_index("scene")) pred_scene = nn::argmax_rows(probs[*scene_head]);

  EvalReport report = build_report(true_city, nn::argmax_rows(probs[*city_head]), true_scene, pred_scene);
  report.split = o.split;
  report.loss_history = ck.extras.value("loss_history", std::vector<double>{});
  report.config_snapshot = {{"model", nlohmann::json(ck.model.config())}, {"features", fconfig},
                            {"checkpoint", o.checkpoint.string()}};

  if (o.out_dir) {
    fs::create_directories(*o.out_dir);
    write_text(*o.out_dir / "report.json", to_json(report).dump(2) + "\n");
    write_text(*o.out_dir / "confusion.csv", confusion_csv(report));
    write_text(*o.out_dir / "per_scene.csv", per_scene_csv(report));
  }
  return report;
}

nlohmann::json run_grid(const TrainCommandOptions& base, const fs::path& out_dir) {
  using augment::Kind;
  const std::vector<std::pair<std::string, std::set<Kind>>> conditions = {
      {"cyclic", {Kind::Cyclic}},
      {"drop", {Kind::Drop}},
      {"stretch", {Kind::Stretch}},
      {"cyclic+stretch", {Kind::Cyclic, Kind::Stretch}},
      {"all", {Kind::Cyclic, Kind::Drop, Kind::Stretch}}};
  const std::vector<std::string> archs = {"multitask", "singletask"};
  const std::vector<std::string> splits = {"train", "validation", "test"};

  fs::create_directories(out_dir);
  const fs::path cache_dir = base.cache_dir.value_or(default_cache_dir(base.manifest));
  const DatasetManifest originals = pipeline::parse_manifest(base.manifest, {std::nullopt, false});

  nlohmann::json results = nlohmann::json::object();
  for (const auto& arch : archs) {
    for (const auto& [name, kinds] : conditions) {
      const fs::path run_dir = out_dir / (arch + "-" + name);
      fs::create_directories(run_dir);
      const fs::path manifest_path = run_dir / "manifest.tsv";
      pipeline::write_manifest(manifest_path,
                               rebase(pipeline::expand_dataset(originals, kinds, base.seed), manifest_path));

      TrainCommandOptions o = base;
      o.arch = arch;
      o.manifest = manifest_path;
      o.cache_dir = cache_dir;
      o.out = run_dir / "model.gtm";
      o.history.reset();
      cmd_train(o);
      for (const auto& split : splits) {
        EvaluateOptions e;
        e.checkpoint = o.out;
        e.manifest = manifest_path;
        e.split = split;
        e.cache_dir = cache_dir;
        e.threads = base.threads;
        try {
          const EvalReport r = cmd_evaluate(e);
          for (const auto& [head, acc] : r.overall_accuracy) results[arch][head][split][name] = acc;
        } catch (const ValidationError&) {
          // Split absent from the manifest.
        }
      }
    }
  }

  std::ostringstream csv;
  csv << "architecture,head,split";
  for (const auto& c : conditions) csv << ',' << c.first;
  csv << '\n' << std::fixed << std::setprecision(2);
  for (const auto& arch : archs) {
    for (const char* head : {"scene", "city"}) {
      if (!results[arch].contains(head)) continue;
      for (const auto& split : splits) {
        if (!results[arch][head].contains(split)) continue;
        csv << arch << ',' << head << ',' << split;
        for (const auto& c : conditions) {
          const auto& row = results[arch][head][split];
          csv << ',';
          if (row.contains(c.first)) csv << row[c.first].get<double>();
        }
        csv << '\n';
      }
    }
  }
  write_text(out_dir / "grid.csv", csv.str());
  write_text(out_dir / "grid.json", results.dump(2) + "\n");
  return results;
}

namespace {

// Expands "--config file.json" into ordinary flags placed right after the
// subcommand, so flags given explicitly on the command line still win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> injected;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      std::ifstream in(args[i + 1]);
      if (!in) throw ValidationError("cannot open config " + args[i + 1]);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + args[i + 1] + ": " + e.what());
      }
      for (const auto& [key, value] : j.items()) {
        if (value.is_boolean()) {
          if (value.get<bool>()) injected.push_back("--" + key);
        } else if (value.is_array()) {
          std::string joined;
          for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
          injected.push_back("--" + key);
          injected.push_back(joined);
        } else {
          injected.push_back("--" + key);
          injected.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
      }
      ++i;
    } else {
      out.push_back(args[i]);
    }
  }
  if (!injected.empty() && !out.empty()) out.insert(out.begin() + 1, injected.begin(), injected.end());
  return out;
}

std::set<augment::Kind> parse_augments(const std::string& list) {
  std::set<augment::Kind> kinds;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) kinds.insert(augment::kind_from_string(item));
  }
  return kinds;
}

void add_feature_flags(CLI::App* cmd, features::FeatureConfig& f) {
  cmd->add_option("--frames", f.frames, "Feature width after pad/crop")->capture_default_str();
  cmd->add_option("--hop", f.hop, "STFT hop in samples")->capture_default_str();
  cmd->add_option("--n-mels", f.n_mels, "Mel bands")->capture_default_str();
  cmd->add_flag("--mel-area-normalize", f.mel_area_normalize, "Area-normalize mel triangles");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);

  CLI::App app{"geotag: sound scene geotagging toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.footer("Any subcommand accepts --config FILE.json; its keys preset flags, explicit flags win.");

  PrepareOptions prep;
  std::string prep_manifest, prep_dcase;
  int prep_synthetic = 0;
  auto* prepare = app.add_subcommand("prepare", "Normalize a manifest, load DCASE fold 1, or generate synthetic data");
  prepare->add_option("--manifest", prep_manifest, "Input TSV manifest");
  prepare->add_option("--synthetic", prep_synthetic, "Clips per (city, scene) pair of a synthetic dataset");
  prepare->add_option("--dcase", prep_dcase, "DCASE 2018 task 1A development root");
  prepare->add_option("--seed", prep.seed)->capture_default_str();
  prepare->add_option("--out", prep.out, "Output manifest path")->required();

  AugmentOptions aug;
  std::string aug_list, aug_report;
  auto* augment_cmd = app.add_subcommand("augment", "Expand the train split with augmented entries");
  augment_cmd->add_option("--manifest", aug.manifest)->required();
  augment_cmd->add_option("--augments", aug_list, "Comma list of cyclic,drop,stretch");
  augment_cmd->add_option("--seed", aug.seed)->capture_default_str();
  augment_cmd->add_option("--out", aug.out)->required();
  augment_cmd->add_option("--report", aug_report, "Expansion report JSON path");

  ExtractOptions ext;
  std::string ext_cache;
  auto* extract = app.add_subcommand("extract", "Materialize log-mel features into the cache");
  extract->add_option("--manifest", ext.manifest)->required();
  extract->add_option("--cache-dir", ext_cache);
  extract->add_option("--threads", ext.threads)->capture_default_str();
  add_feature_flags(extract, ext.features);

  TrainCommandOptions tr;
  std::string tr_model_config, tr_cache, tr_history, tr_grid_dir;
  double tr_target = -1.0;
  bool tr_no_norm = false, tr_deterministic = false, tr_grid = false;
  auto* train = app.add_subcommand("train", "Train a multi-task or single-task model");
  train->add_option("--manifest", tr.manifest)->required();
  train->add_option("--arch", tr.arch, "multitask | singletask")->capture_default_str();
  train->add_option("--model-config", tr_model_config, "JSON model config (backbone override)");
  train->add_option("--epochs", tr.epochs)->capture_default_str();
  train->add_option("--batch", tr.batch)->capture_default_str();
  train->add_option("--patience", tr.patience, "Early-stop patience on validation loss (0 = off)")->capture_default_str();
  train->add_option("--lr", tr.lr)->capture_default_str();
  train->add_option("--seed", tr.seed)->capture_default_str();
  train->add_option("--target-accuracy", tr_target, "Stop once train city accuracy reaches this fraction");
  train->add_option("--min-epochs", tr.min_epochs, "No early or target stop before this epoch")->capture_default_str();
  train->add_flag("--no-norm", tr_no_norm, "Disable per-band feature standardization");
  train->add_flag("--deterministic", tr_deterministic, "Force sequential feature extraction");
  train->add_option("--threads", tr.threads)->capture_default_str();
  train->add_option("--cache-dir", tr_cache);
  train->add_option("--out", tr.out, "Checkpoint path (or output directory with --grid)");
  train->add_option("--history", tr_history, "Loss history JSON path");
  train->add_flag("--grid", tr_grid, "Run the augmentation x architecture ablation matrix");
  train->add_flag("--quiet", tr.quiet);
  add_feature_flags(train, tr.features);

  EvaluateOptions ev;
  std::string ev_cache, ev_out;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on one split");
  evaluate->add_option("--checkpoint", ev.checkpoint)->required();
  evaluate->add_option("--manifest", ev.manifest)->required();
  evaluate->add_option("--split", ev.split, "train | validation | test")->capture_default_str();
  evaluate->add_option("--cache-dir", ev_cache);
  evaluate->add_option("--out-dir", ev_out, "Directory for report.json, confusion.csv, per_scene.csv");
  evaluate->add_option("--threads", ev.threads)->capture_default_str();

  try {
    args = expand_config(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    if (prepare->parsed()) {
      if (!prep_manifest.empty()) prep.manifest = prep_manifest;
      if (!prep_dcase.empty()) prep.dcase_root = prep_dcase;
      if (prep_synthetic != 0) prep.synthetic = prep_synthetic;
      std::cout << cmd_prepare(prep).dump(2) << '\n';
    } else if (augment_cmd->parsed()) {
      aug.augments = parse_augments(aug_list);
      if (!aug_report.empty()) aug.report = aug_report;
      std::cout << cmd_augment(aug).dump(2) << '\n';
    } else if (extract->parsed()) {
      if (!ext_cache.empty()) ext.cache_dir = ext_cache;
      std::cout << cmd_extract(ext).dump(2) << '\n';
    } else if (train->parsed()) {
      if (!tr_model_config.empty()) tr.model_config = tr_model_config;
      if (!tr_cache.empty()) tr.cache_dir = tr_cache;
      if (!tr_history.empty()) tr.history = tr_history;
      if (tr_target >= 0.0) tr.target_accuracy = tr_target;
      tr.normalize = !tr_no_norm;
      if (tr_deterministic) tr.threads = 1;
      if (tr.out.empty()) throw ValidationError("train: --out is required");
      if (tr_grid) {
        std::cout << run_grid(tr, tr.out).dump(2) << '\n';
      } else {
        const TrainSummary s = cmd_train(tr);
        std::cout << nlohmann::json{{"checkpoint", s.checkpoint.string()},
                                    {"history", s.history.string()},
                                    {"epochs", s.result.history.size()},
                                    {"stop_reason", s.result.stop_reason}}
                         .dump(2)
                  << '\n';
      }
    } else if (evaluate->parsed()) {
      if (!ev_cache.empty()) ev.cache_dir = ev_cache;
      if (!ev_out.empty()) ev.out_dir = ev_out;
      const EvalReport r = cmd_evaluate(ev);
      nlohmann::json summary = to_json(r);
      summary.erase("config");
      std::cout << summary.dump(2) << '\n';
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DecodeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const UnsupportedFormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace geotag::harness
