// Copyright 2026 The trajdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "trajdiff/cli/cli.h"

#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <memory>
#include <sstream>
#include <thread>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"
#include "trajdiff/data/ethucy.h"
#include "trajdiff/data/synthetic.h"
#include "trajdiff/errors.h"
#include "trajdiff/pipeline/bench.h"
#include "trajdiff/pipeline/inference.h"
#include "trajdiff/pipeline/model.h"
#include "trajdiff/pipeline/training.h"

namespace trajdiff::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using pipeline::Model;
using pipeline::Prediction;
using pipeline::SceneFeatures;

// Options shared by every subcommand.
struct Common {
  std::string config_file;
  std::string run_dir = "trajdiff_run";
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> keys;
};

std::string Dashed(std::string name) {
  std::replace(name.begin(), name.end(), '_', '-');
  return name;
}

void AddCommon(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_file,
                  "key = value file applied before flag overrides");
  app->add_option("--run-dir", common.run_dir,
                  "directory for checkpoints, logs and reports")
      ->capture_default_str();
  for (const data::ConfigKey& key : data::ConfigKeys()) {
    std::string flag = "--" + Dashed(key.name);
    if (key.name == "radius") flag += ",--radius-r";
    CLI::Option* opt =
        app->add_option(flag, common.values[key.name], key.help);
    common.keys.emplace_back(key.name, opt);
  }
}

data::RunConfig Resolve(const Common& common) {
  data::RunConfig config;
  if (!common.config_file.empty()) {
    data::ApplyConfigFile(config, common.config_file);
  }
  for (const auto& [name, opt] : common.keys) {
    if (opt->count() > 0) {
      data::SetConfigValue(config, name, common.values.at(name));
    }
  }
  data::ValidateConfig(config);
  return config;
}

fs::path PrepareRunDir(const Common& common, const data::RunConfig& config,
                       const std::string& command) {
  const fs::path dir(common.run_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw DataError("cannot create run directory " + dir.string() + ": " +
                    ec.message());
  }
  std::ofstream snapshot(dir / ("config." + command + ".txt"));
  snapshot << data::ConfigToText(config);
  if (!snapshot) throw DataError("cannot write config snapshot in " + dir.string());
  return dir;
}

// Appends one JSON record per line.
class JsonLog {
 public:
  explicit JsonLog(const fs::path& path) : out_(path, std::ios::app) {
    if (!out_) throw DataError("cannot open log " + path.string());
  }
  void Write(const json& record) { out_ << record.dump() << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

data::WindowOptions Windows(const data::RunConfig& config) {
  data::WindowOptions w;
  w.history_steps = config.history_steps;
  w.future_steps = config.future_steps;
  w.stride = config.stride;
  w.dt = config.dt;
  w.swap_xy = config.swap_xy;
  return w;
}

std::vector<data::Scene> LoadLocations(const data::RunConfig& config,
                                       const std::vector<std::string>& names) {
  std::vector<data::Scene> scenes;
  for (const std::string& name : names) {
    for (const std::string& file : data::SubsetFiles(config.data_root, name)) {
      std::vector<data::Scene> part = data::LoadEthUcy(file, Windows(config));
      scenes.insert(scenes.end(), std::make_move_iterator(part.begin()),
                    std::make_move_iterator(part.end()));
    }
  }
  if (scenes.empty()) {
    throw DataError("no scenes found under " + config.data_root);
  }
  return scenes;
}

std::vector<data::Scene> LoadScenes(const data::RunConfig& config,
                                    const std::string& file, bool train) {
  std::vector<data::Scene> scenes;
  if (!file.empty()) {
    scenes = data::ReadScenesFile(file);
  } else if (!config.data_root.empty() && !config.subset.empty()) {
    const data::Split split = data::LeaveOneOut(config.subset);
    scenes = LoadLocations(config, train ? split.train : split.test);
  } else {
    throw ConfigError(std::string("no ") + (train ? "training" : "test") +
                      " data: set " + (train ? "train_scenes" : "test_scenes") +
                      " or data_root and subset");
  }
  if (scenes.empty()) throw DataError("no scenes in " + file);
  return scenes;
}

std::string CheckpointPath(const fs::path& dir, const char* name) {
  return (dir / name).string();
}

void RequireFile(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw DataError("missing " + what + " checkpoint " + path +
                    "; run the earlier training stage first");
  }
}

bool NeedsScorer(const data::RunConfig& config) {
  return selection::ParseStrategy(config.select) == selection::Strategy::kNms;
}

// Loads stage one, and stage two when the selection strategy scores.
void LoadModel(Model& model, const fs::path& dir, bool need_scorer) {
  const std::string d = CheckpointPath(dir, pipeline::kDenoiserCheckpoint);
  RequireFile(d, "denoiser");
  model.LoadStage1(d);
  if (need_scorer) {
    const std::string s = CheckpointPath(dir, pipeline::kScorerCheckpoint);
    RequireFile(s, "scorer");
    model.LoadStage2(s);
  }
}

// Scene-level parallelism; each scene's sampler runs single-threaded.
std::vector<Prediction> PredictAll(const Model& model,
                                   const std::vector<SceneFeatures>& scenes,
                                   pipeline::InferenceOptions options,
                                   int threads) {
  std::vector<Prediction> out(scenes.size());
  if (threads > 1) options.sampler.threads = 1;
  const int workers =
      std::max(1, std::min<int>(threads, static_cast<int>(scenes.size())));
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]() {
    for (size_t i = next++; i < scenes.size(); i = next++) {
      try {
        out[i] = pipeline::PredictScene(model, scenes[i], options);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = scenes.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

int SynthData(const Common& common, const std::string& out_path,
              std::ostream& out) {
  const data::RunConfig config = Resolve(common);
  data::SyntheticSpec spec;
  spec.num_scenes = config.synth_scenes;
  spec.agents_per_scene = config.synth_agents;
  spec.mode_weights = data::ParseModeWeights(config.synth_modes);
  spec.speed_min = config.synth_speed_min;
  spec.speed_max = config.synth_speed_max;
  spec.noise = config.synth_noise;
  spec.seed = config.seed;
  spec.history_steps = config.history_steps;
  spec.future_steps = config.future_steps;
  spec.dt = config.dt;
  const std::vector<data::Scene> scenes = data::GenerateSynthetic(spec);
  data::WriteScenesFile(out_path, scenes);
  out << "wrote " << scenes.size() << " scenes to " << out_path << '\n';
  return kExitOk;
}

int TrainDenoiserCommand(const Common& common, bool resume, std::ostream& out,
                         std::ostream& err) {
  const data::RunConfig config = Resolve(common);
  const fs::path dir = PrepareRunDir(common, config, "train-denoiser");
  const std::vector<data::Scene> scenes =
      LoadScenes(config, config.train_scenes, true);
  Model model(config);
  const std::vector<SceneFeatures> features =
      pipeline::FeaturizeAll(model, scenes, true);
  const std::string ckpt = CheckpointPath(dir, pipeline::kDenoiserCheckpoint);
  int first_epoch = 0;
  if (resume) {
    RequireFile(ckpt, "denoiser");
    first_epoch = model.LoadStage1(ckpt).value("epoch", 0);
    err << "resuming after epoch " << first_epoch << '\n';
  }
  JsonLog log(dir / "train-denoiser.log.jsonl");
  err << "training denoiser on " << features.size() << " scenes, "
      << model.stage1().NumScalars() << " parameters\n";
  pipeline::TrainDenoiser(
      model, features, config, first_epoch, config.denoiser_epochs,
      [&](const pipeline::EpochLog& e) {
        log.Write(pipeline::ToJson(e));
        model.SaveStage1(ckpt, {{"epoch", e.epoch + 1},
                                {"config", data::ConfigToJson(config)}});
        err << "denoiser epoch " << e.epoch + 1 << "/" << config.denoiser_epochs
            << " loss " << e.loss << " (" << e.seconds << " s)\n";
      });
  if (first_epoch >= config.denoiser_epochs) {
    err << "nothing to do: checkpoint already has " << first_epoch
        << " epochs\n";
  }
  out << "denoiser checkpoint: " << ckpt << '\n';
  return kExitOk;
}

int TrainScorerCommand(const Common& common, std::ostream& out,
                       std::ostream& err) {
  const data::RunConfig config = Resolve(common);
  const fs::path dir = PrepareRunDir(common, config, "train-scorer");
  Model model(config);
  LoadModel(model, dir, false);
  const std::vector<data::Scene> scenes =
      LoadScenes(config, config.train_scenes, true);
  const std::vector<SceneFeatures> features =
      pipeline::FeaturizeAll(model, scenes, true);
  JsonLog log(dir / "train-scorer.log.jsonl");
  err << "training scorer on " << features.size() << " scenes with "
      << config.scorer_samples << " candidates each\n";
  const pipeline::ScorerTrainingReport report = pipeline::TrainScorer(
      model, features, config, [&](const pipeline::EpochLog& e) {
        log.Write(pipeline::ToJson(e));
        err << "scorer epoch " << e.epoch + 1 << "/" << config.scorer_epochs
            << " loss " << e.loss << " (" << e.seconds << " s)\n";
      });
  if (report.stage1_hash_before != report.stage1_hash_after) {
    throw std::logic_error("stage-one weights changed during scorer training");
  }
  const json summary = {{"record", "summary"},
                        {"stage1_hash", report.stage1_hash_after},
                        {"skipped_scenes", report.skipped_scenes}};
  log.Write(summary);
  const std::string ckpt = CheckpointPath(dir, pipeline::kScorerCheckpoint);
  model.SaveStage2(ckpt, {{"epoch", config.scorer_epochs},
                          {"stage1_hash", report.stage1_hash_after},
                          {"config", data::ConfigToJson(config)}});
  out << "stage-one hash unchanged: " << report.stage1_hash_after << '\n';
  out << "scorer checkpoint: " << ckpt << '\n';
  return kExitOk;
}

int PredictCommand(const Common& common, std::string out_path,
                   bool keep_candidates, std::ostream& out,
                   std::ostream& err) {
  const data::RunConfig config = Resolve(common);
  const fs::path dir = PrepareRunDir(common, config, "predict");
  Model model(config);
  LoadModel(model, dir, NeedsScorer(config));
  const std::vector<data::Scene> scenes =
      LoadScenes(config, config.test_scenes, false);
  const std::vector<SceneFeatures> features =
      pipeline::FeaturizeAll(model, scenes, false);
  pipeline::InferenceOptions options = pipeline::InferenceOptionsFrom(config);
  options.keep_candidates = keep_candidates;
  err << "predicting " << features.size() << " scenes\n";
  const std::vector<Prediction> preds =
      PredictAll(model, features, options, config.threads);
  if (out_path.empty()) out_path = (dir / "predictions.jsonl").string();
  pipeline::WritePredictionsFile(out_path, preds);

  double encode = 0, sample = 0, select = 0;
  int fills = 0, failed = 0;
  for (const Prediction& p : preds) {
    encode += p.encode_seconds;
    sample += p.sample_seconds;
    select += p.select_seconds;
    fills += p.filled;
    failed += p.failed;
  }
  const double n = static_cast<double>(preds.size());
  out << "wrote " << preds.size() << " predictions to " << out_path << '\n';
  out << "mean ms per scene: encode " << 1e3 * encode / n << ", sample "
      << 1e3 * sample / n << ", score+select " << 1e3 * select / n << '\n';
  out << "NMS fills: " << fills << ", failed samples: " << failed << '\n';
  return kExitOk;
}

int EvaluateCommand(const Common& common, std::string predictions,
                    bool ablation, std::ostream& out, std::ostream& err) {
  const data::RunConfig config = Resolve(common);
  const fs::path dir = PrepareRunDir(common, config, "evaluate");
  const std::vector<int> k_values = data::ParseKValues(config.k_values);
  const std::vector<data::Scene> scenes =
      LoadScenes(config, config.test_scenes, false);
  if (ablation) {
    Model model(config);
    LoadModel(model, dir, true);
    const std::vector<SceneFeatures> features =
        pipeline::FeaturizeAll(model, scenes, true);
    err << "selection ablation on " << features.size() << " scenes\n";
    const std::vector<selection::Strategy> strategies = {
        selection::Strategy::kRandom, selection::Strategy::kCoverage,
        selection::Strategy::kNms};
    const pipeline::AblationResult result = pipeline::RunSelectionAblation(
        model, features, pipeline::InferenceOptionsFrom(config), strategies,
        k_values, config.miss_threshold);
    out << pipeline::FormatAblation(result);
    json report = json::object();
    for (size_t s = 0; s < strategies.size(); ++s) {
      report[selection::StrategyName(strategies[s])] =
          metrics::AggregateRecord(result.reports[s]);
    }
    std::ofstream f(dir / "ablation.json");
    f << report.dump(2) << '\n';
    return kExitOk;
  }
  if (predictions.empty()) predictions = (dir / "predictions.jsonl").string();
  const metrics::EvalReport report = pipeline::EvaluatePredictions(
      pipeline::ReadPredictionsFile(predictions), scenes, k_values,
      config.miss_threshold);
  out << metrics::FormatTable(report);
  std::ofstream f(dir / "eval.jsonl");
  metrics::WriteJsonLines(report, f);
  if (!f) throw DataError("cannot write " + (dir / "eval.jsonl").string());
  return kExitOk;
}

struct BenchArgs {
  std::string steps_grid = "200,100,50,20,10";
  std::string samples_grid = "20,50,100";
  int steps_panel_samples = 20;
  int samples_panel_steps = 10;
  int warmup = 2;
  int repeats = 5;
  int scenes = 20;
};

std::vector<int> IntList(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad integer '" + item + "' in " + what);
    }
  }
  if (out.empty()) throw ConfigError(what + " must not be empty");
  return out;
}

int BenchCommand(const Common& common, const BenchArgs& args,
                 std::ostream& out, std::ostream& err) {
  const data::RunConfig config = Resolve(common);
  pipeline::BenchOptions options;
  options.steps_grid = IntList(args.steps_grid, "--steps-grid");
  options.samples_grid = IntList(args.samples_grid, "--samples-grid");
  options.steps_panel_samples = args.steps_panel_samples;
  options.samples_panel_steps = args.samples_panel_steps;
  options.warmup = args.warmup;
  options.repeats = args.repeats;
  pipeline::ValidateBenchOptions(options, config.diffusion_steps);
  if (args.scenes < 1) throw ConfigError("--bench-scenes must be positive");
  const int max_m =
      std::min(options.steps_panel_samples,
               *std::min_element(options.samples_grid.begin(),
                                 options.samples_grid.end()));
  if (max_m < config.k) {
    throw ConfigError("bench sample counts must be at least k = " +
                      std::to_string(config.k));
  }
  const fs::path dir = PrepareRunDir(common, config, "bench");
  Model model(config);
  LoadModel(model, dir, NeedsScorer(config));
  std::vector<data::Scene> scenes =
      LoadScenes(config, config.test_scenes, false);
  if (static_cast<int>(scenes.size()) > args.scenes) scenes.resize(args.scenes);
  const std::vector<SceneFeatures> features =
      pipeline::FeaturizeAll(model, scenes, true);
  JsonLog log(dir / "bench.log.jsonl");
  const std::vector<pipeline::BenchCell> cells = pipeline::RunBench(
      model, features, pipeline::InferenceOptionsFrom(config), options,
      [&](const pipeline::BenchCell& c) {
        log.Write(pipeline::ToJson(c));
        err << c.method << " steps " << c.steps << " M " << c.num_samples
            << ": " << c.latency_ms << " ms\n";
      });
  out << pipeline::FormatBench(cells, config.k);
  json all = json::array();
  for (const auto& c : cells) all.push_back(pipeline::ToJson(c));
  std::ofstream f(dir / "bench.json");
  f << all.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

std::vector<data::Scene> LoadTrainScenes(const data::RunConfig& config) {
  return LoadScenes(config, config.train_scenes, true);
}

std::vector<data::Scene> LoadTestScenes(const data::RunConfig& config) {
  return LoadScenes(config, config.test_scenes, false);
}

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app("Diffusion trajectory prediction with scoring and NMS "
               "selection",
               "trajdiff");
  app.require_subcommand(1);
  std::deque<Common> commons;
  auto command = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    commons.emplace_back();
    AddCommon(sub, commons.back());
    return std::make_pair(sub, &commons.back());
  };

  auto [synth, synth_common] =
      command("synth-data", "generate a synthetic scene file");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output scene file")->required();

  auto [train_d, train_d_common] =
      command("train-denoiser", "stage one: encoder and denoiser");
  bool resume = false;
  train_d->add_flag("--resume", resume,
                    "continue from the run directory's denoiser checkpoint");

  auto [train_s, train_s_common] =
      command("train-scorer", "stage two: scorer on frozen stage one");

  auto [predict, predict_common] =
      command("predict", "sample, score and select K futures per scene");
  std::string predict_out;
  bool keep_candidates = false;
  predict->add_option("--out", predict_out,
                      "prediction file (default <run-dir>/predictions.jsonl)");
  predict->add_flag("--keep-candidates", keep_candidates,
                    "also store every sampled candidate");

  auto [evaluate, evaluate_common] =
      command("evaluate", "metrics of a prediction file against test scenes");
  std::string predictions;
  bool ablation = false;
  evaluate->add_option("--predictions", predictions,
                       "prediction file (default <run-dir>/predictions.jsonl)");
  evaluate->add_flag("--selection-ablation", ablation,
                     "compare random, coverage and scoring+NMS selection on "
                     "shared candidates");

  auto [bench, bench_common] =
      command("bench", "latency and accuracy over steps and sample counts");
  BenchArgs bench_args;
  bench->add_option("--steps-grid", bench_args.steps_grid,
                    "denoising steps; H itself means DDPM")
      ->capture_default_str();
  bench->add_option("--samples-grid", bench_args.samples_grid,
                    "sample counts for the second panel")
      ->capture_default_str();
  bench->add_option("--steps-panel-samples", bench_args.steps_panel_samples,
                    "M used in the steps panel")
      ->capture_default_str();
  bench->add_option("--samples-panel-steps", bench_args.samples_panel_steps,
                    "steps used in the samples panel")
      ->capture_default_str();
  bench->add_option("--warmup", bench_args.warmup, "untimed warmup passes")
      ->capture_default_str();
  bench->add_option("--repeats", bench_args.repeats, "timed repeats")
      ->capture_default_str();
  bench->add_option("--bench-scenes", bench_args.scenes,
                    "number of test scenes to time")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) return SynthData(*synth_common, synth_out, out);
    if (train_d->parsed()) {
      return TrainDenoiserCommand(*train_d_common, resume, out, err);
    }
    if (train_s->parsed()) return TrainScorerCommand(*train_s_common, out, err);
    if (predict->parsed()) {
      return PredictCommand(*predict_common, predict_out, keep_candidates, out,
                            err);
    }
    if (evaluate->parsed()) {
      return EvaluateCommand(*evaluate_common, predictions, ablation, out, err);
    }
    if (bench->parsed()) return BenchCommand(*bench_common, bench_args, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace trajdiff::cli
