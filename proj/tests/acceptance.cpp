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

// Acceptance suite: one PASS/FAIL line per primary criterion.
// Usage: geotag_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "geotag/augmentation.hpp"
#include "geotag/errors.hpp"
#include "geotag/features.hpp"
#include "geotag/harness.hpp"
#include "geotag/nn/adam.hpp"
#include "geotag/nn/model.hpp"
#include "geotag/pipeline.hpp"
#include "gradcheck.hpp"

using namespace geotag;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("geotag_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

audio::AudioClip ramp(Eigen::Index channels, Eigen::Index length) {
  audio::AudioClip clip;
  clip.sample_rate = 22050;
  clip.samples.resize(channels, length);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index i = 0; i < length; ++i) clip.samples(c, i) = std::sin(0.37 * static_cast<double>(i + 11 * c));
  }
  return clip;
}

void gradient_suite(Outcome& out) {
  const auto start = Clock::now();
  double worst = 0.0;
  long checked = 0;
  for (const auto& [name, r] : gradcheck::full_suite()) {
    out.require(r.max_rel < 1e-4, name + " rel err " + std::to_string(r.max_rel) + " at " + r.where);
    worst = std::max(worst, r.max_rel);
    checked += r.checked;
  }
  const double elapsed = seconds_since(start);
  out.require(elapsed < 60.0, "runtime");
  out.detail << checked << " partials, max rel err " << std::scientific << std::setprecision(2) << worst
             << std::fixed << ", " << elapsed << " s";
}

void augmentation_invariants(Outcome& out) {
  for (Eigen::Index len : {2, 9, 100, 513}) {
    const auto clip = ramp(2, len);
    const auto shifted = augment::cyclic_shift(clip);
    for (Eigen::Index c = 0; c < 2; ++c) {
      std::vector<double> a(clip.samples.row(c).begin(), clip.samples.row(c).end());
      std::vector<double> b(shifted.samples.row(c).begin(), shifted.samples.row(c).end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      out.require(a == b, "cyclic multiset");
    }
    if (len % 2 == 0) out.require(augment::cyclic_shift(shifted).samples == clip.samples, "cyclic involution");

    if (len >= 2) {
      const auto drops = augment::drop_intervals(clip, 1234);
      const auto again = augment::drop_intervals(clip, 1234);
      for (std::uint64_t s = 0; s < 2; ++s) {
        const auto p = augment::draw_drop_params(len, 1234, s);
        const Eigen::Index removed = std::min(p.count, len - p.index);
        out.require(drops[s].length() == len - removed, "drop length");
        out.require(drops[s].samples == again[s].samples, "drop reproducibility");
      }
    }
  }
  out.require(augment::drop_interval(ramp(1, 10), {3, 4}).length() == 7, "drop example 10/3/4");
  out.require(augment::drop_interval(ramp(1, 10), {8, 5}).length() == 5, "drop truncation example");

  Spectrogram spec;
  spec.values = Eigen::MatrixXd::Random(96, 71).cwiseAbs();
  spec.bin_freqs = Eigen::VectorXd::LinSpaced(96, 0.0, 95.0);
  for (const auto& s : augment::stretch_spectrogram(spec, 99)) {
    out.require(s.values.rows() == 96 && s.values.cols() == 71, "stretch shape");
  }
  double unit_err = 0.0;
  for (std::uint64_t stream = 0; stream < 16; ++stream) {
    auto p = augment::draw_stretch_params(96, 71, 5, stream);
    p.factor = 1.0;
    unit_err = std::max(unit_err, (augment::apply_stretch(spec.values, p) - spec.values).cwiseAbs().maxCoeff());
  }
  out.require(unit_err < 1e-6, "stretch factor 1.0");

  Eigen::MatrixXd in(2, 2), expected(3, 3);
  in << 0, 2, 4, 6;
  expected << 0, 1, 2, 2, 3, 4, 4, 5, 6;
  out.require(augment::bilinear_resize(in, 3, 3) == expected, "bilinear oracle");
  out.detail << "unit-factor stretch max err " << std::scientific << std::setprecision(2) << unit_err;
}

void expansion_counts(Outcome& out) {
  const auto start = Clock::now();
  pipeline::DatasetManifest m;
  for (int i = 0; i < 6122; ++i) {
    m.entries.push_back({"audio/dummy-" + std::to_string(i) + ".wav", i % 6, i % 10, pipeline::Split::Train, {}});
  }
  pipeline::ExpansionReport report;
  const auto expanded = pipeline::expand_dataset(
      m, {augment::Kind::Cyclic, augment::Kind::Drop, augment::Kind::Stretch}, 2019, &report);
  const double elapsed = seconds_since(start);
  out.require(report.originals == 6122, "originals");
  out.require(report.added_per_kind["cyclic"] == 6122, "cyclic");
  out.require(report.added_per_kind["drop"] == 12244, "drop");
  out.require(report.added_per_kind["stretch"] == 24488, "stretch");
  out.require(report.total == 48976 && expanded.count(pipeline::Split::Train) == 48976, "total");
  out.require(elapsed < 5.0, "runtime");
  out.detail << "6122 + " << report.added_per_kind["cyclic"] << " + " << report.added_per_kind["drop"] << " + "
             << report.added_per_kind["stretch"] << " = " << report.total << " in " << std::fixed
             << std::setprecision(2) << elapsed << " s";
}

void shape_trace(Outcome& out) {
  const nn::Model<float> multi(nn::multitask_config(431), 1);
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> dims = {{122, 425}, {61, 213}, {55, 207}, {28, 104},
                                                                   {24, 100},  {12, 50},  {10, 48},  {5, 24}};
  const auto& t = multi.trace();
  out.require(t.size() == 20, "20 layers");
  for (std::size_t b = 0; b < 4 && t.size() == 20; ++b) {
    out.require(t[4 * b].output.h == dims[2 * b].first && t[4 * b].output.w == dims[2 * b].second,
                "conv block " + std::to_string(b + 1));
    out.require(t[4 * b + 2].output.h == dims[2 * b + 1].first && t[4 * b + 2].output.w == dims[2 * b + 1].second,
                "pool block " + std::to_string(b + 1));
  }
  out.require(multi.head_count() == 2 && multi.head(0).dense.units() == 10 && multi.head(1).dense.units() == 6,
              "multi-task heads");
  const nn::Model<float> single(nn::singletask_config(431), 1);
  out.require(single.head_count() == 1 && single.head(0).dense.units() == 6, "single-task head");
  out.detail << "backbone output " << t[15].output.str() << ", heads 10/6, single-task head 6";
}

void optimization_smoke(Outcome& out) {
  const auto start = Clock::now();
  const fs::path dir = scratch("overfit");
  auto manifest = pipeline::generate_synthetic_dataset(dir, 5, 2020);
  for (auto& e : manifest.entries) e.split = pipeline::Split::Train;
  pipeline::write_manifest(dir / "train_all.tsv", manifest);

  harness::TrainCommandOptions o;
  o.manifest = dir / "train_all.tsv";
  o.arch = "multitask";
  o.features.frames = 87;  // natural width of the 2 s synthetic clips
  o.epochs = 200;
  o.batch = 16;
  o.seed = 1;
  o.patience = 0;
  o.target_accuracy = 0.95;
  o.min_epochs = 10;
  o.quiet = true;
  o.out = dir / "model.gtm";
  const auto summary = harness::cmd_train(o);
  const double elapsed = seconds_since(start);

  const auto& h = summary.result.history;
  out.require(manifest.entries.size() == 300, "300 clips");
  out.require(h.size() >= 10, "at least 10 epochs");
  bool decreasing = true;
  for (std::size_t i = 1; i < std::min<std::size_t>(10, h.size()); ++i) decreasing = decreasing && h[i].loss < h[i - 1].loss;
  out.require(decreasing, "loss strictly decreasing over the first 10 epochs");
  const double eval_acc = h.empty() || !h.back().eval_city_accuracy ? 0.0 : *h.back().eval_city_accuracy;
  out.require(eval_acc >= 0.95, "train city accuracy >= 95%");
  out.require(h.size() <= 200, "within 200 epochs");
  out.require(elapsed < 1800.0, "under 30 min");
  out.detail << std::fixed << std::setprecision(1) << 100.0 * eval_acc << "% train city accuracy (eval mode) after "
             << h.size() << " epochs, " << elapsed << " s";
  fs::remove_all(dir);
}

void determinism(Outcome& out) {
  const fs::path dir = scratch("determinism");
  harness::PrepareOptions p;
  p.synthetic = 1;
  p.seed = 11;
  p.out = dir / "m.tsv";
  harness::cmd_prepare(p);

  const auto run = [&](const std::string& tag) {
    harness::TrainCommandOptions o;
    o.manifest = dir / "m.tsv";
    o.features.frames = 87;
    o.epochs = 2;
    o.batch = 16;
    o.seed = 77;
    o.threads = 1;
    o.quiet = true;
    o.cache_dir = dir / ("cache_" + tag);
    o.out = dir / (tag + ".gtm");
    return harness::cmd_train(o);
  };
  const auto a = run("a");
  const auto b = run("b");
  const std::string ca = read_bytes(a.checkpoint), cb = read_bytes(b.checkpoint);
  const std::string ha = read_bytes(a.history), hb = read_bytes(b.history);
  out.require(!ca.empty() && ca == cb, "checkpoint bytes");
  out.require(!ha.empty() && ha == hb, "loss history bytes");
  out.detail << "checkpoints " << ca.size() << " bytes and histories " << ha.size() << " bytes identical";
  fs::remove_all(dir);
}

void adam_closed_form(Outcome& out) {
  nn::Parameter<double> w("w", 1);
  w.value(0) = 1.0;
  w.grad(0) = 4.0;
  nn::AdamState<double> state;
  nn::adam_step<double>({&w}, state);
  const double expected = 1.0 - 1e-4 * (4.0 / (4.0 + 1e-7));
  const double err = std::abs(w.value(0) - expected);
  out.require(err <= 1e-12, "first step");

  nn::Parameter<double> z("z", 4);
  z.value << 0.5, -1.5, 2.0, 3.25;
  const nn::Vec<double> before = z.value;
  nn::AdamState<double> zero;
  nn::adam_step<double>({&z}, zero);
  out.require(z.value == before && zero.t == 1, "zero-gradient no-op");
  out.detail << "first-step error " << std::scientific << std::setprecision(2) << err;
}

void feature_pipeline(Outcome& out) {
  const int k = 93;
  Eigen::VectorXd tone(22050);
  for (Eigen::Index n = 0; n < tone.size(); ++n) tone(n) = std::sin(2.0 * M_PI * k * (22050.0 / 2048.0) * n / 22050.0);
  const auto s = features::stft(tone, 22050, 2048, 512);
  for (Eigen::Index f = 2; f * 512 + 1024 <= 22050; ++f) {
    Eigen::Index peak;
    s.values.col(f).maxCoeff(&peak);
    out.require(peak == k, "bin peak in frame " + std::to_string(f));
  }

  const auto trimmed = features::trim_frequencies(s, 100.0, 100.0);
  out.require(trimmed.bins() == 1005 && trimmed.values == s.values.middleRows(10, 1005), "trim bins 10..1014");

  Spectrogram unit;
  unit.values.resize(1, 3);
  unit.values << 1.0, std::sqrt(10.0), 0.0;
  unit.bin_freqs = Eigen::VectorXd::Constant(1, 1000.0);
  const auto db = features::log_mel(unit, Eigen::MatrixXd::Ones(1, 1)).values;
  out.require(std::abs(db(0, 0)) < 1e-6 && std::abs(db(0, 1) - 10.0f) < 1e-5 && db(0, 2) == -100.0f,
              "log-mel 0 dB / 10 dB / floor");

  audio::AudioClip ten;
  ten.sample_rate = 22050;
  ten.samples = Eigen::MatrixXd::Random(1, 220500) * 0.1;
  const auto feature = features::featurize(ten, features::FeatureConfig{});
  out.require(feature.values.rows() == 128 && feature.values.cols() == 431, "10 s -> 128x431");
  out.detail << "peak bin " << k << ", " << trimmed.bins() << " trimmed rows, feature " << feature.values.rows()
             << "x" << feature.values.cols();
}

void dcase_split(Outcome& out) {
  const fs::path dir = scratch("dcase");
  fs::create_directories(dir / "evaluation_setup");
  std::ofstream train(dir / "evaluation_setup" / "fold1_train.txt");
  for (int i = 0; i < 6122; ++i) {
    const auto scene = kSceneNames[static_cast<std::size_t>(i % kNumScenes)];
    train << "audio/" << scene << '-' << kCityNames[static_cast<std::size_t>(i % kNumCities)] << '-' << i
          << "-0-a.wav\t" << scene << '\n';
  }
  train.close();
  std::ofstream eval(dir / "evaluation_setup" / "fold1_evaluate.txt");
  for (int i = 0; i < 2518; ++i) {
    const auto scene = kSceneNames[static_cast<std::size_t>(i % kNumScenes)];
    eval << "audio/" << scene << '-' << kCityNames[static_cast<std::size_t>((i + 3) % kNumCities)] << "-e" << i
         << "-0-a.wav\t" << scene << '\n';
  }
  eval.close();

  harness::PrepareOptions p;
  p.dcase_root = dir;
  p.out = dir / "manifest.tsv";
  const auto report = harness::cmd_prepare(p);
  out.require(report["train"] == 6122, "train count");
  out.require(report["validation"] == 2518, "validation count");
  out.detail << "train " << report["train"] << ", validation " << report["validation"];
  fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"gradient suite", gradient_suite},
      {"augmentation invariants", augmentation_invariants},
      {"expansion counts", expansion_counts},
      {"shape trace", shape_trace},
      {"optimization smoke test", optimization_smoke},
      {"determinism", determinism},
      {"Adam closed form", adam_closed_form},
      {"feature pipeline", feature_pipeline},
      {"DCASE split", dcase_split}};

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome outcome;
    try {
      criteria[i].second(outcome);
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail << "[exception: " << e.what() << "]";
    }
    failures += outcome.pass ? 0 : 1;
    std::cout << "criterion " << number << " (" << criteria[i].first << "): " << (outcome.pass ? "PASS" : "FAIL")
              << " | " << outcome.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
