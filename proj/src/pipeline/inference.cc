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

#include "trajdiff/pipeline/inference.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "trajdiff/errors.h"

namespace trajdiff::pipeline {
namespace {

using nlohmann::json;

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       since)
      .count();
}

json TrajectoryToJson(const Trajectory& t) {
  json out = json::array();
  for (const auto& p : t) out.push_back({p.x(), p.y()});
  return out;
}

Trajectory TrajectoryFromJson(const json& j) {
  Trajectory t;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) {
      throw DataError("trajectory points must be [x, y] pairs");
    }
    t.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return t;
}

json TrajectoriesToJson(const std::vector<Trajectory>& ts) {
  json out = json::array();
  for (const auto& t : ts) out.push_back(TrajectoryToJson(t));
  return out;
}

std::vector<Trajectory> TrajectoriesFromJson(const json& j) {
  std::vector<Trajectory> out;
  for (const auto& t : j) out.push_back(TrajectoryFromJson(t));
  return out;
}

std::string Listing(const std::vector<std::string>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size() && i < 10; ++i) {
    if (i > 0) out += ", ";
    out += ids[i];
  }
  if (ids.size() > 10) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

InferenceOptions InferenceOptionsFrom(const data::RunConfig& config) {
  InferenceOptions o;
  o.sampler.method = diffusion::ParseMethod(config.sampler);
  o.sampler.skip = config.skip;
  o.sampler.num_samples = config.num_samples;
  o.sampler.seed = config.seed;
  o.sampler.threads = config.threads;
  o.strategy = selection::ParseStrategy(config.select);
  o.selection.k = config.k;
  o.selection.omega = config.omega;
  o.selection.radius = config.radius;
  o.selection.nms_distance = selection::ParseDistance(config.nms_distance);
  o.selection.seed = config.seed;
  return o;
}

uint64_t SceneSeed(uint64_t seed, const std::string& scene_id) {
  return DerivedRng(seed, {StableHash(scene_id)})();
}

Prediction SelectFromCandidates(const Model& model, const SceneFeatures& scene,
                                const Array& context,
                                const CandidateSet& candidates,
                                const InferenceOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Prediction p;
  p.scene_id = scene.scene_id;
  p.num_candidates = static_cast<int>(candidates.world.size());
  p.failed = candidates.failed;
  p.sample_seconds = candidates.seconds;
  if (p.num_candidates < options.selection.k) {
    throw NumericError("scene " + scene.scene_id + ": only " +
                       std::to_string(p.num_candidates) +
                       " finite samples, fewer than K = " +
                       std::to_string(options.selection.k));
  }
  std::vector<double> scores;
  if (options.strategy == selection::Strategy::kNms) {
    scores = ScoreCandidates(model, candidates.relative, context);
  }
  selection::SelectionConfig sel = options.selection;
  sel.seed = SceneSeed(options.selection.seed, scene.scene_id);
  const selection::Selection chosen =
      selection::Select(options.strategy, candidates.relative, scores, sel);
  p.filled = chosen.filled;
  p.candidate_index = chosen.indices;
  for (int i : chosen.indices) {
    p.trajectories.push_back(candidates.world[i]);
    if (!scores.empty()) p.scores.push_back(scores[i]);
  }
  if (options.keep_candidates) p.candidates = candidates.world;
  p.select_seconds = Seconds(start);
  return p;
}

Prediction PredictScene(const Model& model, const SceneFeatures& scene,
                        const InferenceOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const Array context = EncodeContexts(model, {&scene});
  const double encode = Seconds(start);
  diffusion::SamplerConfig sampler = options.sampler;
  sampler.seed = SceneSeed(options.sampler.seed, scene.scene_id);
  const CandidateSet cands = SampleCandidates(model, scene, context, sampler);
  Prediction p = SelectFromCandidates(model, scene, context, cands, options);
  p.encode_seconds = encode;
  return p;
}

json PredictionToJson(const Prediction& p) {
  json j = {{"scene_id", p.scene_id},
            {"trajectories", TrajectoriesToJson(p.trajectories)},
            {"scores", p.scores},
            {"candidate_index", p.candidate_index},
            {"num_candidates", p.num_candidates},
            {"failed", p.failed},
            {"filled", p.filled},
            {"encode_ms", p.encode_seconds * 1e3},
            {"sample_ms", p.sample_seconds * 1e3},
            {"select_ms", p.select_seconds * 1e3}};
  if (!p.candidates.empty()) j["candidates"] = TrajectoriesToJson(p.candidates);
  return j;
}

Prediction PredictionFromJson(const json& j) {
  Prediction p;
  p.scene_id = j.at("scene_id").get<std::string>();
  p.trajectories = TrajectoriesFromJson(j.at("trajectories"));
  p.scores = j.value("scores", std::vector<double>());
  p.candidate_index = j.value("candidate_index", std::vector<int>());
  p.num_candidates = j.value("num_candidates", 0);
  p.failed = j.value("failed", 0);
  p.filled = j.value("filled", 0);
  p.encode_seconds = j.value("encode_ms", 0.0) / 1e3;
  p.sample_seconds = j.value("sample_ms", 0.0) / 1e3;
  p.select_seconds = j.value("select_ms", 0.0) / 1e3;
  if (j.contains("candidates")) {
    p.candidates = TrajectoriesFromJson(j.at("candidates"));
  }
  return p;
}

void WritePredictions(std::ostream& out, const std::vector<Prediction>& preds) {
  out << json{{"format", kPredictionFormatName},
              {"version", kPredictionFormatVersion}}
             .dump()
      << '\n';
  for (const Prediction& p : preds) out << PredictionToJson(p).dump() << '\n';
}

void WritePredictionsFile(const std::string& path,
                          const std::vector<Prediction>& preds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions to " + path);
  WritePredictions(out, preds);
  if (!out) throw DataError("failed writing predictions to " + path);
}

std::vector<Prediction> ReadPredictions(std::istream& in,
                                        const std::string& source) {
  std::vector<Prediction> out;
  std::string line;
  int number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(number);
    try {
      const json j = json::parse(line);
      if (!header) {
        if (j.value("format", std::string()) != kPredictionFormatName ||
            j.value("version", 0) != kPredictionFormatVersion) {
          throw DataError("missing trajdiff-predictions header");
        }
        header = true;
        continue;
      }
      out.push_back(PredictionFromJson(j));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  if (!header) throw DataError(source + " is empty");
  return out;
}

std::vector<Prediction> ReadPredictionsFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions " + path);
  return ReadPredictions(in, path);
}

metrics::EvalReport EvaluatePredictions(const std::vector<Prediction>& preds,
                                        const std::vector<data::Scene>& truth,
                                        const std::vector<int>& k_values,
                                        double miss_threshold) {
  std::map<std::string, const Prediction*> by_id;
  for (const Prediction& p : preds) {
    if (!by_id.emplace(p.scene_id, &p).second) {
      throw DataError("duplicate prediction for scene " + p.scene_id);
    }
  }
  std::vector<std::string> missing, no_truth;
  std::vector<metrics::SceneMetrics> scenes;
  for (const data::Scene& scene : truth) {
    auto it = by_id.find(scene.id);
    if (it == by_id.end()) {
      missing.push_back(scene.id);
      continue;
    }
    if (!scene.focal_track().has_future()) {
      no_truth.push_back(scene.id);
      continue;
    }
    const Prediction& p = *it->second;
    metrics::SceneMetrics m;
    m.scene_id = scene.id;
    m.num_candidates = p.num_candidates;
    m.failed_samples = p.failed;
    m.latency_seconds = p.total_seconds();
    try {
      m.top_k = metrics::EvaluateSet(scene.focal_track().future,
                                     p.trajectories, k_values, miss_threshold);
    } catch (const ShapeError& e) {
      throw DataError("prediction for scene " + scene.id + ": " + e.what());
    }
    scenes.push_back(std::move(m));
  }
  if (!missing.empty()) {
    throw DataError("no prediction for " + std::to_string(missing.size()) +
                    " scene(s): " + Listing(missing));
  }
  if (!no_truth.empty()) {
    throw DataError("scene(s) without ground truth: " + Listing(no_truth));
  }
  if (scenes.empty()) throw DataError("nothing to evaluate");
  return metrics::Aggregate(std::move(scenes), k_values);
}

AblationResult RunSelectionAblation(
    const Model& model, const std::vector<SceneFeatures>& scenes,
    const InferenceOptions& base,
    const std::vector<selection::Strategy>& strategies,
    const std::vector<int>& k_values, double miss_threshold) {
  if (strategies.empty()) throw ConfigError("no selection strategies given");
  AblationResult result;
  result.strategies = strategies;
  result.predictions.resize(strategies.size());
  std::vector<std::vector<metrics::SceneMetrics>> per_scene(strategies.size());
  for (const SceneFeatures& scene : scenes) {
    if (scene.future_world.empty()) {
      throw DataError("scene " + scene.scene_id + " has no ground truth");
    }
    const auto start = std::chrono::steady_clock::now();
    const Array context = EncodeContexts(model, {&scene});
    const double encode = Seconds(start);
    diffusion::SamplerConfig sampler = base.sampler;
    sampler.seed = SceneSeed(base.sampler.seed, scene.scene_id);
    const CandidateSet cands = SampleCandidates(model, scene, context, sampler);
    for (size_t s = 0; s < strategies.size(); ++s) {
      InferenceOptions options = base;
      options.strategy = strategies[s];
      Prediction p =
          SelectFromCandidates(model, scene, context, cands, options);
      p.encode_seconds = encode;
      metrics::SceneMetrics m;
      m.scene_id = scene.scene_id;
      m.num_candidates = p.num_candidates;
      m.failed_samples = p.failed;
      m.latency_seconds = p.total_seconds();
      m.top_k = metrics::EvaluateSet(scene.future_world, p.trajectories,
                                     k_values, miss_threshold);
      per_scene[s].push_back(std::move(m));
      result.predictions[s].push_back(std::move(p));
    }
  }
  for (auto& scenes_for_strategy : per_scene) {
    result.reports.push_back(
        metrics::Aggregate(std::move(scenes_for_strategy), k_values));
  }
  return result;
}

std::string FormatAblation(const AblationResult& result) {
  std::ostringstream out;
  char cell[64];
  out << "selection ";
  for (int k : result.reports.front().k_values) {
    std::snprintf(cell, sizeof(cell), "| %8s %8s %6s ",
                  ("ADE@" + std::to_string(k)).c_str(),
                  ("FDE@" + std::to_string(k)).c_str(),
                  ("MR@" + std::to_string(k)).c_str());
    out << cell;
  }
  out << '\n';
  for (size_t s = 0; s < result.strategies.size(); ++s) {
    std::snprintf(cell, sizeof(cell), "%-9s ",
                  selection::StrategyName(result.strategies[s]).c_str());
    out << cell;
    for (const metrics::TopKMetrics& m : result.reports[s].aggregate) {
      std::snprintf(cell, sizeof(cell), "| %8.4f %8.4f %6.3f ", m.min_ade,
                    m.min_fde, m.miss_rate);
      out << cell;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace trajdiff::pipeline
