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

// Latency and accuracy over a grid of sampling steps and sample counts.
//
// Latency is wall-clock around sampling, scoring and selection for one
// scene (contexts are encoded beforehand). Each cell runs `warmup` passes
// over the first scene, then `repeats` passes over all scenes; the cell
// reports the median over repeats of the mean per-scene latency.

#ifndef TRAJDIFF_PIPELINE_BENCH_H_
#define TRAJDIFF_PIPELINE_BENCH_H_

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajdiff/data/config.h"
#include "trajdiff/metrics/metrics.h"
#include "trajdiff/pipeline/inference.h"
#include "trajdiff/pipeline/model.h"

namespace trajdiff::pipeline {

struct BenchOptions {
  // Denoising steps per sample; a value equal to H runs ancestral DDPM,
  // anything else DDIM with skip H / steps.
  std::vector<int> steps_grid = {200, 100, 50, 20, 10};
  int steps_panel_samples = 20;
  std::vector<int> samples_grid = {20, 50, 100};
  int samples_panel_steps = 10;
  int warmup = 2;
  int repeats = 5;
};

struct BenchCell {
  std::string panel;  // "steps" or "samples"
  std::string method;
  int steps = 0;
  int num_samples = 0;
  double latency_ms = 0.0;  // median over repeats
  std::vector<double> repeat_ms;
  metrics::TopKMetrics metrics;  // at K = the configured k
  // Every repeat produced bit-identical predictions.
  bool deterministic = true;
};

// Throws ConfigError on empty grids, fewer than one repeat, or a step count
// that does not divide H.
void ValidateBenchOptions(const BenchOptions& options, int horizon);

// Sampler settings for `steps` denoiser calls per sample.
diffusion::SamplerConfig SamplerForSteps(int steps, int num_samples,
                                         const diffusion::SamplerConfig& base,
                                         int horizon);

// Runs one cell over `scenes`, which need ground-truth futures.
BenchCell RunBenchCell(const Model& model,
                       const std::vector<SceneFeatures>& scenes,
                       const std::vector<Array>& contexts,
                       const InferenceOptions& base, int steps,
                       int num_samples, int warmup, int repeats);

std::vector<BenchCell> RunBench(
    const Model& model, const std::vector<SceneFeatures>& scenes,
    const InferenceOptions& base, const BenchOptions& options,
    const std::function<void(const BenchCell&)>& on_cell = {});

nlohmann::json ToJson(const BenchCell& cell);
// Two panels: latency and accuracy against steps at fixed M, then against
// M at fixed steps.
std::string FormatBench(const std::vector<BenchCell>& cells, int k);

}  // namespace trajdiff::pipeline

#endif  // TRAJDIFF_PIPELINE_BENCH_H_
