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

#include "trajdiff/pipeline/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "trajdiff/errors.h"
#include "trajdiff/metrics/metrics.h"
#include "trajdiff/selection/selection.h"
#include "trajdiff/tensor/adamw.h"
#include "trajdiff/tensor/ops.h"
#include "trajdiff/tensor/tape.h"

namespace trajdiff::pipeline {
namespace {

// Stream identifiers for DerivedRng.
constexpr uint64_t kDenoiserStream = 11;
constexpr uint64_t kScorerStream = 12;
constexpr uint64_t kCandidateStream = 13;
constexpr int kEncodeChunk = 64;

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       since)
      .count();
}

std::vector<size_t> Shuffled(size_t n, std::mt19937_64& rng) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

tensor::AdamWOptions Optimizer(const data::RunConfig& config) {
  tensor::AdamWOptions o;
  o.learning_rate = config.learning_rate;
  o.weight_decay = config.weight_decay;
  return o;
}

void CheckLoss(double loss, const std::string& stage, int epoch) {
  if (!std::isfinite(loss)) {
    throw NumericError(stage + " loss became non-finite in epoch " +
                       std::to_string(epoch));
  }
}

}  // namespace

nlohmann::json ToJson(const EpochLog& log) {
  return {{"stage", log.stage},     {"epoch", log.epoch},
          {"loss", log.loss},       {"batches", log.batches},
          {"seconds", log.seconds}};
}

std::vector<SceneFeatures> FeaturizeAll(const Model& model,
                                        const std::vector<data::Scene>& scenes,
                                        bool require_future) {
  std::vector<SceneFeatures> out;
  out.reserve(scenes.size());
  for (const data::Scene& scene : scenes) {
    SceneFeatures f = Featurize(scene, model.history_steps(),
                                model.future_steps(), model.coordinate_scale());
    if (require_future && f.future_displacements.empty()) {
      throw DataError("scene " + scene.id +
                      " has no ground-truth future for the focal agent");
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<EpochLog> TrainDenoiser(Model& model,
                                    const std::vector<SceneFeatures>& scenes,
                                    const data::RunConfig& config,
                                    int first_epoch, int last_epoch,
                                    const EpochCallback& on_epoch) {
  if (scenes.empty()) throw DataError("no training scenes");
  for (const SceneFeatures& s : scenes) {
    if (s.future_displacements.empty()) {
      throw DataError("scene " + s.scene_id + " has no focal future");
    }
  }
  const int steps = model.future_steps();
  const int horizon = model.schedule().steps();
  const double scale = model.coordinate_scale();
  const tensor::AdamWOptions opt = Optimizer(config);
  std::vector<EpochLog> logs;
  for (int epoch = first_epoch; epoch < last_epoch; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng =
        DerivedRng(config.seed, {kDenoiserStream, static_cast<uint64_t>(epoch)});
    const std::vector<size_t> order = Shuffled(scenes.size(), rng);
    std::uniform_int_distribution<int> step_dist(1, horizon);
    std::normal_distribution<double> normal;
    double total = 0.0;
    int batches = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const size_t b1 = std::min(order.size(), b0 + config.batch_size);
      const int64_t batch = static_cast<int64_t>(b1 - b0);
      std::vector<const SceneFeatures*> members;
      for (size_t i = b0; i < b1; ++i) members.push_back(&scenes[order[i]]);

      Array noisy({batch, steps, 2});
      Array eps({batch, steps, 2});
      std::vector<int> etas(batch);
      for (int64_t b = 0; b < batch; ++b) {
        etas[b] = step_dist(rng);
        const double ab = model.schedule().alpha_bar(etas[b]);
        const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);
        const Trajectory& y0 = members[b]->future_displacements;
        for (int j = 0; j < steps; ++j) {
          for (int c = 0; c < 2; ++c) {
            const int64_t idx = (b * steps + j) * 2 + c;
            eps[idx] = normal(rng);
            noisy[idx] = a * y0[j][c] * scale + s * eps[idx];
          }
        }
      }

      tensor::Tape tape;
      networks::ForwardContext ctx{tape, model.stage1(), true, &rng};
      std::vector<int64_t> rows;
      const networks::EncoderInput input = MergeEncoderInputs(members, &rows);
      const tensor::Var context =
          tensor::GatherRows(model.encoder().Encode(ctx, input), rows);
      const tensor::Var pred = model.denoiser().Predict(
          ctx, tape.Constant(std::move(noisy)), etas, context);
      const tensor::Var loss = tensor::Mse(pred, tape.Constant(std::move(eps)));
      const double value = loss.value()[0];
      CheckLoss(value, "denoiser", epoch);
      tape.Backward(loss);
      tensor::AdamWStep(model.stage1(), tape.ParameterGradients(), opt);
      total += value;
      ++batches;
    }
    EpochLog log{"denoiser", epoch, total / batches, batches, Seconds(start)};
    if (on_epoch) on_epoch(log);
    logs.push_back(log);
  }
  return logs;
}

std::vector<ScorerExample> BuildScorerExamples(
    const Model& model, const std::vector<SceneFeatures>& scenes,
    const data::RunConfig& config, uint64_t stream, int* skipped) {
  diffusion::SamplerConfig sampler;
  sampler.method = diffusion::ParseMethod(config.sampler);
  sampler.skip = config.skip;
  sampler.num_samples = config.scorer_samples;
  sampler.threads = config.threads;
  *skipped = 0;
  std::vector<ScorerExample> out;
  for (size_t c0 = 0; c0 < scenes.size(); c0 += kEncodeChunk) {
    const size_t c1 = std::min(scenes.size(), c0 + kEncodeChunk);
    std::vector<const SceneFeatures*> chunk;
    for (size_t i = c0; i < c1; ++i) chunk.push_back(&scenes[i]);
    const Array contexts = EncodeContexts(model, chunk);
    const int64_t width = contexts.dim(1);
    for (size_t i = 0; i < chunk.size(); ++i) {
      const SceneFeatures& scene = *chunk[i];
      if (scene.future_relative.empty()) {
        throw DataError("scene " + scene.scene_id + " has no focal future");
      }
      ScorerExample ex;
      ex.context = Array({width}, std::vector<double>(
                                      contexts.data() + i * width,
                                      contexts.data() + (i + 1) * width));
      sampler.seed = DerivedRng(config.seed, {kCandidateStream, stream,
                                              StableHash(scene.scene_id)})();
      CandidateSet cands = SampleCandidates(
          model, scene, ex.context.Reshaped({1, width}), sampler);
      if (cands.failed > 0) {
        ++*skipped;
        continue;
      }
      ex.relative = std::move(cands.relative);
      ex.psi = selection::GroundTruthScores(scene.future_relative, ex.relative,
                                            config.lambda);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

double MeanRankCorrelation(const Model& model,
                           const std::vector<ScorerExample>& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const ScorerExample& ex : examples) {
    const std::vector<double> scores =
        ScoreCandidates(model, ex.relative, ex.context);
    std::vector<double> neg(ex.psi.size());
    std::transform(ex.psi.begin(), ex.psi.end(), neg.begin(),
                   [](double p) { return -p; });
    total += metrics::SpearmanCorrelation(scores, neg);
  }
  return total / static_cast<double>(examples.size());
}

ScorerTrainingReport TrainScorer(Model& model,
                                 const std::vector<SceneFeatures>& scenes,
                                 const data::RunConfig& config,
                                 const EpochCallback& on_epoch) {
  if (scenes.empty()) throw DataError("no training scenes");
  ScorerTrainingReport report;
  report.stage1_hash_before = model.stage1().Hash();
  const tensor::AdamWOptions opt = Optimizer(config);
  const int steps = model.future_steps();
  const double scale = model.coordinate_scale();

  std::vector<ScorerExample> examples;
  for (int epoch = 0; epoch < config.scorer_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (epoch == 0 || !config.cache_candidates) {
      int skipped = 0;
      const uint64_t stream =
          config.cache_candidates ? 0 : static_cast<uint64_t>(epoch);
      examples = BuildScorerExamples(model, scenes, config, stream, &skipped);
      report.skipped_scenes += skipped;
      if (examples.empty()) {
        throw NumericError("every scene lost candidates to numeric failure");
      }
    }
    std::mt19937_64 rng =
        DerivedRng(config.seed, {kScorerStream, static_cast<uint64_t>(epoch)});
    const std::vector<size_t> order = Shuffled(examples.size(), rng);
    double total = 0.0;
    int batches = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const size_t b1 = std::min(order.size(), b0 + config.batch_size);
      const int64_t batch = static_cast<int64_t>(b1 - b0);
      const int64_t m = static_cast<int64_t>(examples[order[b0]].relative.size());
      const int64_t width = examples[order[b0]].context.size();
      Array cands({batch, m, steps, 2});
      Array contexts({batch, width});
      Array targets({batch, m});
      for (int64_t b = 0; b < batch; ++b) {
        const ScorerExample& ex = examples[order[b0 + b]];
        const Array one = CandidateArray(ex.relative, scale);
        std::copy(one.data(), one.data() + one.size(),
                  cands.data() + b * one.size());
        std::copy(ex.context.data(), ex.context.data() + width,
                  contexts.data() + b * width);
        const std::vector<double> t =
            selection::ScoreTargets(ex.psi, config.temperature);
        std::copy(t.begin(), t.end(), targets.data() + b * m);
      }
      tensor::Tape tape;
      networks::ForwardContext ctx{tape, model.stage2(), true, &rng};
      const tensor::Var scores =
          model.scorer().Score(ctx, tape.Constant(std::move(cands)),
                               tape.Constant(std::move(contexts)));
      const tensor::Var loss =
          tensor::SoftCrossEntropy(scores, tape.Constant(std::move(targets)));
      const double value = loss.value()[0];
      CheckLoss(value, "scorer", epoch);
      tape.Backward(loss);
      tensor::AdamWStep(model.stage2(), tape.ParameterGradients(), opt);
      total += value;
      ++batches;
    }
    EpochLog log{"scorer", epoch, total / batches, batches, Seconds(start)};
    if (on_epoch) on_epoch(log);
    report.epochs.push_back(log);
  }
  report.stage1_hash_after = model.stage1().Hash();
  return report;
}

}  // namespace trajdiff::pipeline
