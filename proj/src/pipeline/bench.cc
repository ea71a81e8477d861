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

#include "trajdiff/pipeline/bench.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "trajdiff/errors.h"

namespace trajdiff::pipeline {
namespace {

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool SameTrajectories(const std::vector<Prediction>& a,
                      const std::vector<Prediction>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].trajectories != b[i].trajectories) return false;
  }
  return true;
}

}  // namespace

void ValidateBenchOptions(const BenchOptions& options, int horizon) {
  if (options.steps_grid.empty() || options.samples_grid.empty()) {
    throw ConfigError("bench grids must not be empty");
  }
  if (options.repeats < 1 || options.warmup < 0) {
    throw ConfigError("bench needs repeats >= 1 and warmup >= 0");
  }
  std::vector<int> all = options.steps_grid;
  all.push_back(options.samples_panel_steps);
  for (int s : all) {
    if (s < 1 || s > horizon || horizon % s != 0) {
      throw ConfigError("bench step count " + std::to_string(s) +
                        " must divide H = " + std::to_string(horizon));
    }
  }
  for (int m : options.samples_grid) {
    if (m < 1) throw ConfigError("bench sample counts must be positive");
  }
  if (options.steps_panel_samples < 1) {
    throw ConfigError("bench sample counts must be positive");
  }
}

diffusion::SamplerConfig SamplerForSteps(int steps, int num_samples,
                                         const diffusion::SamplerConfig& base,
                                         int horizon) {
  if (steps < 1 || horizon % steps != 0) {
    throw ConfigError("step count " + std::to_string(steps) +
                      " does not divide H = " + std::to_string(horizon));
  }
  diffusion::SamplerConfig s = base;
  s.num_samples = num_samples;
  if (steps == horizon) {
    s.method = diffusion::Method::kDdpm;
  } else {
    s.method = diffusion::Method::kDdim;
    s.skip = horizon / steps;
  }
  return s;
}

BenchCell RunBenchCell(const Model& model,
                       const std::vector<SceneFeatures>& scenes,
                       const std::vector<Array>& contexts,
                       const InferenceOptions& base, int steps,
                       int num_samples, int warmup, int repeats) {
  if (scenes.empty() || scenes.size() != contexts.size()) {
    throw ConfigError("bench needs scenes with matching contexts");
  }
  const int horizon = model.schedule().steps();
  InferenceOptions options = base;
  options.sampler = SamplerForSteps(steps, num_samples, base.sampler, horizon);
  options.keep_candidates = false;

  auto run = [&](size_t i) {
    diffusion::SamplerConfig sampler = options.sampler;
    sampler.seed = SceneSeed(base.sampler.seed, scenes[i].scene_id);
    const auto start = std::chrono::steady_clock::now();
    const CandidateSet cands =
        SampleCandidates(model, scenes[i], contexts[i], sampler);
    Prediction p =
        SelectFromCandidates(model, scenes[i], contexts[i], cands, options);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    return std::make_pair(std::move(p), ms);
  };

  for (int w = 0; w < warmup; ++w) run(0);

  BenchCell cell;
  cell.method = diffusion::MethodName(options.sampler.method);
  cell.steps = steps;
  cell.num_samples = num_samples;
  std::vector<Prediction> first;
  for (int r = 0; r < repeats; ++r) {
    std::vector<Prediction> preds;
    double total = 0.0;
    for (size_t i = 0; i < scenes.size(); ++i) {
      auto [p, ms] = run(i);
      total += ms;
      preds.push_back(std::move(p));
    }
    cell.repeat_ms.push_back(total / static_cast<double>(scenes.size()));
    if (r == 0) {
      first = std::move(preds);
    } else if (!SameTrajectories(first, preds)) {
      cell.deterministic = false;
    }
  }
  cell.latency_ms = Median(cell.repeat_ms);

  const int k = options.selection.k;
  std::vector<metrics::SceneMetrics> per_scene;
  for (size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].future_world.empty()) {
      throw DataError("bench scene " + scenes[i].scene_id +
                      " has no ground truth");
    }
    metrics::SceneMetrics m;
    m.scene_id = scenes[i].scene_id;
    m.top_k = metrics::EvaluateSet(scenes[i].future_world,
                                   first[i].trajectories, {k});
    per_scene.push_back(std::move(m));
  }
  cell.metrics = metrics::Aggregate(std::move(per_scene), {k}).aggregate[0];
  return cell;
}

std::vector<BenchCell> RunBench(
    const Model& model, const std::vector<SceneFeatures>& scenes,
    const InferenceOptions& base, const BenchOptions& options,
    const std::function<void(const BenchCell&)>& on_cell) {
  ValidateBenchOptions(options, model.schedule().steps());
  if (scenes.empty()) throw DataError("bench needs at least one scene");
  std::vector<Array> contexts;
  for (const SceneFeatures& s : scenes) {
    contexts.push_back(EncodeContexts(model, {&s}));
  }
  std::vector<BenchCell> cells;
  auto add = [&](const char* panel, int steps, int m) {
    BenchCell cell = RunBenchCell(model, scenes, contexts, base, steps, m,
                                  options.warmup, options.repeats);
    cell.panel = panel;
    if (on_cell) on_cell(cell);
    cells.push_back(std::move(cell));
  };
  for (int steps : options.steps_grid) {
    add("steps", steps, options.steps_panel_samples);
  }
  for (int m : options.samples_grid) {
    add("samples", options.samples_panel_steps, m);
  }
  return cells;
}

nlohmann::json ToJson(const BenchCell& cell) {
  return {{"panel", cell.panel},
          {"method", cell.method},
          {"steps", cell.steps},
          {"num_samples", cell.num_samples},
          {"latency_ms", cell.latency_ms},
          {"repeat_ms", cell.repeat_ms},
          {"k", cell.metrics.k},
          {"min_ade", cell.metrics.min_ade},
          {"min_fde", cell.metrics.min_fde},
          {"miss_rate", cell.metrics.miss_rate},
          {"deterministic", cell.deterministic}};
}

std::string FormatBench(const std::vector<BenchCell>& cells, int k) {
  std::ostringstream out;
  char line[160];
  for (const char* panel : {"steps", "samples"}) {
    out << (std::string(panel) == "steps" ? "Latency and accuracy vs steps\n"
                                          : "Latency and accuracy vs M\n");
    std::snprintf(line, sizeof(line), "%-6s %6s %6s %12s %10s %10s %8s\n",
                  "method", "steps", "M", "latency_ms", "minADE", "minFDE",
                  "MR");
    out << line;
    for (const BenchCell& c : cells) {
      if (c.panel != panel) continue;
      std::snprintf(line, sizeof(line),
                    "%-6s %6d %6d %12.2f %10.4f %10.4f %8.4f\n",
                    c.method.c_str(), c.steps, c.num_samples, c.latency_ms,
                    c.metrics.min_ade, c.metrics.min_fde, c.metrics.miss_rate);
      out << line;
    }
    out << '\n';
  }
  out << "metrics at K = " << k << '\n';
  return out.str();
}

}  // namespace trajdiff::pipeline
