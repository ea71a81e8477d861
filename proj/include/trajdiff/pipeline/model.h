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

// The trained system: encoder and denoiser (stage one), scorer (stage two),
// the noise schedule and the scene featurization they share.

#ifndef TRAJDIFF_PIPELINE_MODEL_H_
#define TRAJDIFF_PIPELINE_MODEL_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajdiff/data/config.h"
#include "trajdiff/data/scene.h"
#include "trajdiff/diffusion/diffusion.h"
#include "trajdiff/geometry/geometry.h"
#include "trajdiff/networks/models.h"
#include "trajdiff/tensor/parameter_store.h"

namespace trajdiff::pipeline {

using geometry::Trajectory;
using tensor::Array;

inline constexpr char kDenoiserCheckpoint[] = "denoiser.ckpt";
inline constexpr char kScorerCheckpoint[] = "scorer.ckpt";

// Engine seeded from a base seed and a list of stream identifiers.
std::mt19937_64 DerivedRng(uint64_t seed, std::initializer_list<uint64_t> ids);
// FNV-1a of a string, for per-scene seeds.
uint64_t StableHash(const std::string& text);

class Model {
 public:
  // Registers freshly initialized parameters drawn from config.seed.
  explicit Model(const data::RunConfig& config);

  const networks::Encoder& encoder() const { return encoder_; }
  const networks::Denoiser& denoiser() const { return denoiser_; }
  const networks::Scorer& scorer() const { return scorer_; }
  const diffusion::NoiseSchedule& schedule() const { return schedule_; }
  int history_steps() const { return encoder_.config().history_steps; }
  int future_steps() const { return denoiser_.config().future_steps; }
  double coordinate_scale() const { return coordinate_scale_; }

  // Encoder and denoiser weights.
  tensor::ParameterStore& stage1() { return stage1_; }
  const tensor::ParameterStore& stage1() const { return stage1_; }
  // Scorer weights.
  tensor::ParameterStore& stage2() { return stage2_; }
  const tensor::ParameterStore& stage2() const { return stage2_; }

  // Architecture, schedule and scaling; checkpoints must match it.
  nlohmann::json Stage1Signature() const;
  nlohmann::json Stage2Signature() const;

  // `extra` is merged into the checkpoint manifest.
  void SaveStage1(const std::string& path, const nlohmann::json& extra) const;
  void SaveStage2(const std::string& path, const nlohmann::json& extra) const;
  // Return the manifest. Throw DataError for unreadable files and
  // ConfigError when the checkpoint's architecture differs.
  nlohmann::json LoadStage1(const std::string& path);
  nlohmann::json LoadStage2(const std::string& path);

 private:
  networks::Encoder encoder_;
  networks::Denoiser denoiser_;
  networks::Scorer scorer_;
  diffusion::NoiseSchedule schedule_;
  double coordinate_scale_;
  tensor::ParameterStore stage1_;
  tensor::ParameterStore stage2_;
};

networks::EncoderConfig EncoderConfigFrom(const data::RunConfig& c);
networks::DenoiserConfig DenoiserConfigFrom(const data::RunConfig& c);
networks::ScorerConfig ScorerConfigFrom(const data::RunConfig& c);
diffusion::NoiseSchedule ScheduleFrom(const data::RunConfig& c);

// Invariant view of one scene, focal agent first.
struct SceneFeatures {
  std::string scene_id;
  // Scaled invariant histories of every agent plus the scene's lanes.
  networks::EncoderInput encoder_input;
  geometry::InvariantHistory focal;
  // Focal future in the agent frame (meters); empty without ground truth.
  Trajectory future_displacements;
  Trajectory future_relative;
  Trajectory future_world;
};

// Throws DataError when the scene does not fit the model horizon.
SceneFeatures Featurize(const data::Scene& scene, int history_steps,
                        int future_steps, double coordinate_scale);

// Concatenates scenes into one encoder batch. `focal_rows` receives the
// row of each scene's focal agent in the encoder output.
networks::EncoderInput MergeEncoderInputs(
    const std::vector<const SceneFeatures*>& scenes,
    std::vector<int64_t>* focal_rows);

// Eval-mode focal contexts, [scenes, d_c].
Array EncodeContexts(const Model& model,
                     const std::vector<const SceneFeatures*>& scenes);

// Denoiser with a fixed focal context, evaluated on a non-recording tape.
diffusion::BatchDenoiser MakeDenoiser(const Model& model,
                                      const Array& context);

struct CandidateSet {
  std::vector<Trajectory> displacements;  // agent frame, meters
  std::vector<Trajectory> relative;       // agent frame positions
  std::vector<Trajectory> world;
  std::vector<int> sample_index;
  int failed = 0;
  double seconds = 0.0;
};

CandidateSet SampleCandidates(const Model& model, const SceneFeatures& scene,
                              const Array& context,
                              const diffusion::SamplerConfig& sampler);

// Scaled agent-frame positions as a [1, M, T_f, 2] array.
Array CandidateArray(const std::vector<Trajectory>& relative, double scale);

// Raw scorer outputs for one scene's candidates.
std::vector<double> ScoreCandidates(const Model& model,
                                    const std::vector<Trajectory>& relative,
                                    const Array& context);

}  // namespace trajdiff::pipeline

#endif  // TRAJDIFF_PIPELINE_MODEL_H_
