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

// Displacement metrics over prediction sets.

#ifndef TRAJDIFF_METRICS_METRICS_H_
#define TRAJDIFF_METRICS_METRICS_H_

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajdiff/geometry/geometry.h"

namespace trajdiff::metrics {

using geometry::Trajectory;

inline constexpr double kMissThreshold = 2.0;  // meters

// Mean Euclidean distance over steps. Throws ShapeError on unequal or empty
// trajectories.
double Ade(const Trajectory& truth, const Trajectory& predicted);
// Euclidean distance at the final step.
double Fde(const Trajectory& truth, const Trajectory& predicted);

struct TopKMetrics {
  int k = 0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;  // 0 or 1 per scene, a fraction once aggregated
};

struct SceneMetrics {
  std::string scene_id;
  int num_candidates = 0;
  int failed_samples = 0;
  double latency_seconds = 0.0;
  std::vector<TopKMetrics> top_k;
};

struct LatencyStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double max = 0.0;
};

struct EvalReport {
  std::vector<int> k_values;
  std::vector<SceneMetrics> scenes;
  std::vector<TopKMetrics> aggregate;
  LatencyStats latency;  // seconds
};

// Metrics over the first K entries of `predictions` for each K. Throws
// ShapeError when the set is smaller than the largest K or K < 1.
std::vector<TopKMetrics> EvaluateSet(const Trajectory& truth,
                                     const std::vector<Trajectory>& predictions,
                                     const std::vector<int>& k_values,
                                     double miss_threshold = kMissThreshold);

// Averages per-scene values and summarizes latency.
EvalReport Aggregate(std::vector<SceneMetrics> scenes,
                     const std::vector<int>& k_values);

// Nearest-rank percentile of unsorted values, q in [0, 100].
double Percentile(std::vector<double> values, double q);

std::string FormatTable(const EvalReport& report);

// Records: {"record": "scene", "scene_id", "num_candidates",
// "failed_samples", "latency_ms", "k": {"<K>": {"min_ade", "min_fde",
// "miss"}}} per scene, then one {"record": "aggregate", ...}.
nlohmann::json SceneRecord(const SceneMetrics& scene);
nlohmann::json AggregateRecord(const EvalReport& report);
void WriteJsonLines(const EvalReport& report, std::ostream& out);

// Pearson correlation of average ranks. Zero when either input is constant.
// Throws ShapeError on unequal sizes or fewer than two values.
double SpearmanCorrelation(const std::vector<double>& a,
                           const std::vector<double>& b);

}  // namespace trajdiff::metrics

#endif  // TRAJDIFF_METRICS_METRICS_H_
