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

// Two-stage training: the encoder and denoiser learn to predict the added
// noise, then the scorer learns to rank frozen-sampler candidates.

#ifndef TRAJDIFF_PIPELINE_TRAINING_H_
#define TRAJDIFF_PIPELINE_TRAINING_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajdiff/data/config.h"
#include "trajdiff/data/scene.h"
#include "trajdiff/pipeline/model.h"

namespace trajdiff::pipeline {

struct EpochLog {
  std::string stage;  // "denoiser" or "scorer"
  int epoch = 0;      // 0-based
  double loss = 0.0;  // mean over batches
  int batches = 0;
  double seconds = 0.0;
};

nlohmann::json ToJson(const EpochLog& log);

using EpochCallback = std::function<void(const EpochLog&)>;

// Featurizes every scene. With `require_future`, a scene without a focal
// future is a DataError.
std::vector<SceneFeatures> FeaturizeAll(const Model& model,
                                        const std::vector<data::Scene>& scenes,
                                        bool require_future);

// Runs denoiser epochs [first_epoch, last_epoch). Shuffling, timestep,
// noise and dropout draws for epoch e depend only on (seed, e), so resuming
// from a checkpoint written after epoch e - 1 reproduces an uninterrupted
// run bit for bit.
std::vector<EpochLog> TrainDenoiser(Model& model,
                                    const std::vector<SceneFeatures>& scenes,
                                    const data::RunConfig& config,
                                    int first_epoch, int last_epoch,
                                    const EpochCallback& on_epoch = {});

// One scene's frozen context, candidates and their ground-truth errors.
struct ScorerExample {
  Array context;  // [d_c]
  std::vector<Trajectory> relative;
  std::vector<double> psi;
};

// Samples `config.scorer_samples` candidates per scene with the frozen
// stage-one weights. Scenes that lose chains to numeric failure are
// skipped and counted in `skipped`.
std::vector<ScorerExample> BuildScorerExamples(
    const Model& model, const std::vector<SceneFeatures>& scenes,
    const data::RunConfig& config, uint64_t stream, int* skipped);

// Mean over examples of the rank correlation between scorer output and
// -psi.
double MeanRankCorrelation(const Model& model,
                           const std::vector<ScorerExample>& examples);

struct ScorerTrainingReport {
  std::vector<EpochLog> epochs;
  uint64_t stage1_hash_before = 0;
  uint64_t stage1_hash_after = 0;
  int skipped_scenes = 0;
};

// Trains stage-two weights only. Candidate sets are drawn once and reused
// when config.cache_candidates is set, otherwise redrawn every epoch.
ScorerTrainingReport TrainScorer(Model& model,
                                 const std::vector<SceneFeatures>& scenes,
                                 const data::RunConfig& config,
                                 const EpochCallback& on_epoch = {});

}  // namespace trajdiff::pipeline

#endif  // TRAJDIFF_PIPELINE_TRAINING_H_
