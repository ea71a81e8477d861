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

// Sampling, scoring and selection for unseen scenes, plus the prediction
// file format and evaluation against ground truth.

#ifndef TRAJDIFF_PIPELINE_INFERENCE_H_
#define TRAJDIFF_PIPELINE_INFERENCE_H_

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajdiff/data/config.h"
#include "trajdiff/metrics/metrics.h"
#include "trajdiff/pipeline/model.h"
#include "trajdiff/selection/selection.h"

namespace trajdiff::pipeline {

inline constexpr char kPredictionFormatName[] = "trajdiff-predictions";
inline constexpr int kPredictionFormatVersion = 1;

struct InferenceOptions {
  diffusion::SamplerConfig sampler;
  selection::Strategy strategy = selection::Strategy::kNms;
  selection::SelectionConfig selection;
  // Keep all sampled candidates (world frame) in the prediction.
  bool keep_candidates = false;
};

InferenceOptions InferenceOptionsFrom(const data::RunConfig& config);

// Sampler seed for a scene: a function of the run seed and scene id only.
uint64_t SceneSeed(uint64_t seed, const std::string& scene_id);

struct Prediction {
  std::string scene_id;
  std::vector<Trajectory> trajectories;  // K world-frame futures, ranked
  std::vector<double> scores;            // scorer output per selection
  std::vector<int> candidate_index;
  int num_candidates = 0;  // surviving samples
  int failed = 0;
  int filled = 0;
  double encode_seconds = 0.0;
  double sample_seconds = 0.0;
  double select_seconds = 0.0;  // scoring plus selection
  std::vector<Trajectory> candidates;

  double total_seconds() const {
    return encode_seconds + sample_seconds + select_seconds;
  }
};

// Random and coverage selection skip the scorer. Throws NumericError when
// fewer than K chains survive.
Prediction PredictScene(const Model& model, const SceneFeatures& scene,
                        const InferenceOptions& options);

// Scoring and selection for an already sampled candidate set.
Prediction SelectFromCandidates(const Model& model, const SceneFeatures& scene,
                                const Array& context,
                                const CandidateSet& candidates,
                                const InferenceOptions& options);

nlohmann::json PredictionToJson(const Prediction& p);
Prediction PredictionFromJson(const nlohmann::json& j);
void WritePredictions(std::ostream& out, const std::vector<Prediction>& preds);
void WritePredictionsFile(const std::string& path,
                          const std::vector<Prediction>& preds);
// Throws DataError naming the source and line on malformed input.
std::vector<Prediction> ReadPredictions(std::istream& in,
                                        const std::string& source);
std::vector<Prediction> ReadPredictionsFile(const std::string& path);

// Matches predictions to scenes by id. Every scene needs a prediction with
// at least max(k_values) trajectories; otherwise DataError lists the
// offenders.
metrics::EvalReport EvaluatePredictions(const std::vector<Prediction>& preds,
                                        const std::vector<data::Scene>& truth,
                                        const std::vector<int>& k_values,
                                        double miss_threshold);

// Selection strategies compared on shared candidate sets: every scene is
// sampled once and each strategy picks K from the same candidates.
struct AblationResult {
  std::vector<selection::Strategy> strategies;
  std::vector<std::vector<Prediction>> predictions;  // per strategy
  std::vector<metrics::EvalReport> reports;          // per strategy
};

// Scenes need ground-truth futures.
AblationResult RunSelectionAblation(
    const Model& model, const std::vector<SceneFeatures>& scenes,
    const InferenceOptions& base,
    const std::vector<selection::Strategy>& strategies,
    const std::vector<int>& k_values, double miss_threshold);

// One row per strategy, minADE / minFDE / MR columns per K.
std::string FormatAblation(const AblationResult& result);

}  // namespace trajdiff::pipeline

#endif  // TRAJDIFF_PIPELINE_INFERENCE_H_
