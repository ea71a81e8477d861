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

#include "trajdiff/pipeline/model.h"

#include <algorithm>
#include <chrono>
#include <utility>

#include "trajdiff/errors.h"
#include "trajdiff/tensor/checkpoint.h"
#include "trajdiff/tensor/ops.h"
#include "trajdiff/tensor/tape.h"

namespace trajdiff::pipeline {
namespace {

using nlohmann::json;

constexpr char kStage1Prefix[] = "stage1";
constexpr char kStage2Prefix[] = "stage2";

// Dropout only affects training, so it may differ between runs that share
// a checkpoint.
json WithoutDropout(json j) {
  j.erase("dropout");
  return j;
}

void CheckSignature(const json& expected, const json& manifest,
                    const std::string& path) {
  auto it = manifest.find("signature");
  if (it == manifest.end()) {
    throw DataError("checkpoint " + path + " has no architecture signature");
  }
  if (*it == expected) return;
  std::string diff;
  for (const auto& patch : json::diff(*it, expected)) {
    if (!diff.empty()) diff += ", ";
    diff += patch.value("path", std::string("?"));
  }
  throw ConfigError("checkpoint " + path +
                    " was trained with a different architecture (differs at " +
                    diff + ")");
}

void Save(const std::string& path, const char* prefix,
          const tensor::ParameterStore& store, const json& signature,
          const json& extra) {
  tensor::Checkpoint ckpt;
  ckpt.manifest = extra.is_object() ? extra : json::object();
  ckpt.manifest["signature"] = signature;
  ckpt.manifest["stage"] = prefix;
  tensor::AppendStore(prefix, store, ckpt);
  tensor::WriteCheckpoint(path, ckpt);
}

json Load(const std::string& path, const char* prefix,
          tensor::ParameterStore& store, const json& signature) {
  const tensor::Checkpoint ckpt = tensor::ReadCheckpoint(path);
  if (ckpt.manifest.value("stage", std::string()) != prefix) {
    throw DataError("checkpoint " + path + " does not hold " + prefix +
                    " weights");
  }
  CheckSignature(signature, ckpt.manifest, path);
  tensor::LoadStore(prefix, ckpt, store);
  return ckpt.manifest;
}

geometry::Trajectory Scaled(const geometry::Trajectory& t, double s) {
  geometry::Trajectory out = t;
  for (auto& p : out) p *= s;
  return out;
}

}  // namespace

std::mt19937_64 DerivedRng(uint64_t seed, std::initializer_list<uint64_t> ids) {
  std::vector<uint32_t> words;
  auto push = [&words](uint64_t v) {
    words.push_back(static_cast<uint32_t>(v));
    words.push_back(static_cast<uint32_t>(v >> 32));
  };
  push(seed);
  for (uint64_t id : ids) push(id);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

uint64_t StableHash(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

networks::EncoderConfig EncoderConfigFrom(const data::RunConfig& c) {
  networks::EncoderConfig e;
  e.history_steps = c.history_steps;
  e.width = c.context_width;
  e.heads = c.encoder_heads;
  e.temporal_layers = c.encoder_layers;
  e.ffn_width = c.encoder_ffn;
  e.lane_features = c.lane_features;
  e.dropout = c.dropout;
  return e;
}

networks::DenoiserConfig DenoiserConfigFrom(const data::RunConfig& c) {
  networks::DenoiserConfig d;
  d.future_steps = c.future_steps;
  d.width = c.denoiser_width;
  d.heads = c.denoiser_heads;
  d.layers = c.denoiser_layers;
  d.ffn_width = c.denoiser_ffn;
  d.context_width = c.context_width;
  d.step_embedding = c.step_embedding;
  d.dropout = c.dropout;
  return d;
}

networks::ScorerConfig ScorerConfigFrom(const data::RunConfig& c) {
  networks::ScorerConfig s;
  s.future_steps = c.future_steps;
  s.context_width = c.context_width;
  s.heads = c.scorer_heads;
  s.head_width = c.scorer_head_width;
  s.width = c.scorer_width;
  s.dropout = c.dropout;
  return s;
}

diffusion::NoiseSchedule ScheduleFrom(const data::RunConfig& c) {
  return diffusion::NoiseSchedule::Linear(c.diffusion_steps, c.beta_start,
                                          c.beta_end);
}

Model::Model(const data::RunConfig& config)
    : encoder_(EncoderConfigFrom(config)),
      denoiser_(DenoiserConfigFrom(config)),
      scorer_(ScorerConfigFrom(config)),
      schedule_(ScheduleFrom(config)),
      coordinate_scale_(config.coordinate_scale) {
  if (!(coordinate_scale_ > 0.0)) {
    throw ConfigError("coordinate_scale must be positive");
  }
  std::mt19937_64 rng1 = DerivedRng(config.seed, {1});
  encoder_.Register(stage1_, rng1);
  denoiser_.Register(stage1_, rng1);
  std::mt19937_64 rng2 = DerivedRng(config.seed, {2});
  scorer_.Register(stage2_, rng2);
}

json Model::Stage1Signature() const {
  return {{"encoder", WithoutDropout(networks::ToJson(encoder_.config()))},
          {"denoiser", WithoutDropout(networks::ToJson(denoiser_.config()))},
          {"diffusion_steps", schedule_.steps()},
          {"beta_start", schedule_.beta(1)},
          {"beta_end", schedule_.beta(schedule_.steps())},
          {"coordinate_scale", coordinate_scale_}};
}

json Model::Stage2Signature() const {
  return {{"scorer", WithoutDropout(networks::ToJson(scorer_.config()))},
          {"coordinate_scale", coordinate_scale_}};
}

void Model::SaveStage1(const std::string& path, const json& extra) const {
  Save(path, kStage1Prefix, stage1_, Stage1Signature(), extra);
}

void Model::SaveStage2(const std::string& path, const json& extra) const {
  Save(path, kStage2Prefix, stage2_, Stage2Signature(), extra);
}

json Model::LoadStage1(const std::string& path) {
  return Load(path, kStage1Prefix, stage1_, Stage1Signature());
}

json Model::LoadStage2(const std::string& path) {
  return Load(path, kStage2Prefix, stage2_, Stage2Signature());
}

SceneFeatures Featurize(const data::Scene& scene, int history_steps,
                        int future_steps, double coordinate_scale) {
  data::ValidateScene(scene, history_steps, future_steps);
  SceneFeatures f;
  f.scene_id = scene.id;
  const geometry::AgentTrack& focal = scene.focal_track();
  f.focal = geometry::ToInvariantHistory(focal);
  f.encoder_input.histories.push_back(
      Scaled(f.focal.displacements, coordinate_scale));
  for (size_t i = 0; i < scene.agents.size(); ++i) {
    if (static_cast<int>(i) == scene.focal) continue;
    f.encoder_input.histories.push_back(Scaled(
        geometry::ToInvariantHistory(scene.agents[i]).displacements,
        coordinate_scale));
  }
  f.encoder_input.lanes.push_back(scene.lanes);
  if (focal.has_future()) {
    f.future_displacements =
        geometry::ToInvariantFuture(focal, f.focal.rotation).displacements;
    f.future_relative = geometry::CumulativeSum(f.future_displacements);
    f.future_world = focal.future;
  }
  return f;
}

networks::EncoderInput MergeEncoderInputs(
    const std::vector<const SceneFeatures*>& scenes,
    std::vector<int64_t>* focal_rows) {
  networks::EncoderInput merged;
  focal_rows->clear();
  for (size_t s = 0; s < scenes.size(); ++s) {
    const networks::EncoderInput& in = scenes[s]->encoder_input;
    focal_rows->push_back(static_cast<int64_t>(merged.histories.size()));
    for (const auto& h : in.histories) {
      merged.histories.push_back(h);
      merged.scene.push_back(static_cast<int>(s));
    }
    merged.lanes.push_back(in.lanes.empty() ? networks::LaneFeatures()
                                            : in.lanes.front());
  }
  return merged;
}

Array EncodeContexts(const Model& model,
                     const std::vector<const SceneFeatures*>& scenes) {
  tensor::Tape tape(false);
  networks::ForwardContext ctx{tape, model.stage1()};
  std::vector<int64_t> rows;
  const networks::EncoderInput input = MergeEncoderInputs(scenes, &rows);
  return tensor::GatherRows(model.encoder().Encode(ctx, input), rows).value();
}

diffusion::BatchDenoiser MakeDenoiser(const Model& model,
                                      const Array& context) {
  const int64_t width = context.dim(-1);
  return [&model, context, width](const Array& y, int eta) {
    const int64_t batch = y.dim(0);
    Array repeated({batch, width});
    for (int64_t b = 0; b < batch; ++b) {
      std::copy(context.data(), context.data() + width,
                repeated.data() + b * width);
    }
    tensor::Tape tape(false);
    networks::ForwardContext ctx{tape, model.stage1()};
    return model.denoiser()
        .Predict(ctx, tape.Constant(y), std::vector<int>(batch, eta),
                 tape.Constant(std::move(repeated)))
        .value();
  };
}

CandidateSet SampleCandidates(const Model& model, const SceneFeatures& scene,
                              const Array& context,
                              const diffusion::SamplerConfig& sampler) {
  const auto start = std::chrono::steady_clock::now();
  const int steps = model.future_steps();
  const diffusion::SampleResult result =
      diffusion::Sample(MakeDenoiser(model, context), {steps, 2}, sampler,
                        model.schedule());
  CandidateSet out;
  out.failed = result.failed;
  out.sample_index = result.sample_index;
  const double inv = 1.0 / model.coordinate_scale();
  for (const Array& s : result.samples) {
    geometry::Trajectory disp(steps);
    for (int j = 0; j < steps; ++j) {
      disp[j] = geometry::Point(s[2 * j], s[2 * j + 1]) * inv;
    }
    out.relative.push_back(geometry::CumulativeSum(disp));
    out.world.push_back(geometry::DisplacementsToPositions(
        disp, scene.focal.rotation, scene.focal.anchor, steps));
    out.displacements.push_back(std::move(disp));
  }
  out.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return out;
}

Array CandidateArray(const std::vector<Trajectory>& relative, double scale) {
  if (relative.empty()) throw ShapeError("no candidates to score");
  const int64_t m = static_cast<int64_t>(relative.size());
  const int64_t t = static_cast<int64_t>(relative.front().size());
  Array out({1, m, t, 2});
  for (int64_t i = 0; i < m; ++i) {
    if (static_cast<int64_t>(relative[i].size()) != t) {
      throw ShapeError("candidates differ in length");
    }
    for (int64_t j = 0; j < t; ++j) {
      out[(i * t + j) * 2] = relative[i][j].x() * scale;
      out[(i * t + j) * 2 + 1] = relative[i][j].y() * scale;
    }
  }
  return out;
}

std::vector<double> ScoreCandidates(const Model& model,
                                    const std::vector<Trajectory>& relative,
                                    const Array& context) {
  tensor::Tape tape(false);
  networks::ForwardContext ctx{tape, model.stage2()};
  const tensor::Var scores = model.scorer().Score(
      ctx, tape.Constant(CandidateArray(relative, model.coordinate_scale())),
      tape.Constant(context.Reshaped({1, context.size()})));
  const auto v = scores.value().values();
  return std::vector<double>(v.begin(), v.end());
}

}  // namespace trajdiff::pipeline
