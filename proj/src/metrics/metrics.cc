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

#include "trajdiff/metrics/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "trajdiff/errors.h"

namespace trajdiff::metrics {
namespace {

void CheckPair(const Trajectory& a, const Trajectory& b) {
  if (a.empty() || a.size() != b.size()) {
    throw ShapeError("trajectory lengths " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()) +
                     " do not match or are empty");
  }
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

double Ade(const Trajectory& truth, const Trajectory& predicted) {
  CheckPair(truth, predicted);
  double sum = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    sum += (truth[i] - predicted[i]).norm();
  }
  return sum / static_cast<double>(truth.size());
}

double Fde(const Trajectory& truth, const Trajectory& predicted) {
  CheckPair(truth, predicted);
  return (truth.back() - predicted.back()).norm();
}

std::vector<TopKMetrics> EvaluateSet(const Trajectory& truth,
                                     const std::vector<Trajectory>& predictions,
                                     const std::vector<int>& k_values,
                                     double miss_threshold) {
  std::vector<TopKMetrics> out;
  for (int k : k_values) {
    if (k < 1 || k > static_cast<int>(predictions.size())) {
      throw ShapeError("cannot evaluate top-" + std::to_string(k) + " of " +
                       std::to_string(predictions.size()) + " predictions");
    }
    TopKMetrics m;
    m.k = k;
    m.min_ade = std::numeric_limits<double>::infinity();
    m.min_fde = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      m.min_ade = std::min(m.min_ade, Ade(truth, predictions[j]));
      m.min_fde = std::min(m.min_fde, Fde(truth, predictions[j]));
    }
    m.miss_rate = m.min_fde > miss_threshold ? 1.0 : 0.0;
    out.push_back(m);
  }
  return out;
}

double Percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(q / 100.0 * static_cast<double>(values.size()));
  const size_t idx = static_cast<size_t>(std::clamp(rank, 1.0,
      static_cast<double>(values.size()))) - 1;
  return values[idx];
}

EvalReport Aggregate(std::vector<SceneMetrics> scenes,
                     const std::vector<int>& k_values) {
  EvalReport r;
  r.k_values = k_values;
  r.scenes = std::move(scenes);
  for (size_t i = 0; i < k_values.size(); ++i) {
    TopKMetrics a;
    a.k = k_values[i];
    for (const SceneMetrics& s : r.scenes) {
      a.min_ade += s.top_k.at(i).min_ade;
      a.min_fde += s.top_k.at(i).min_fde;
      a.miss_rate += s.top_k.at(i).miss_rate;
    }
    if (!r.scenes.empty()) {
      const double n = static_cast<double>(r.scenes.size());
      a.min_ade /= n;
      a.min_fde /= n;
      a.miss_rate /= n;
    }
    r.aggregate.push_back(a);
  }
  std::vector<double> lat;
  for (const SceneMetrics& s : r.scenes) lat.push_back(s.latency_seconds);
  if (!lat.empty()) {
    r.latency.mean =
        std::accumulate(lat.begin(), lat.end(), 0.0) / static_cast<double>(lat.size());
    r.latency.p50 = Percentile(lat, 50);
    r.latency.p90 = Percentile(lat, 90);
    r.latency.max = *std::max_element(lat.begin(), lat.end());
  }
  return r;
}

std::string FormatTable(const EvalReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-6s %10s %10s %8s\n", "K", "minADE",
                "minFDE", "MR");
  os << line;
  for (const TopKMetrics& m : report.aggregate) {
    std::snprintf(line, sizeof(line), "%-6d %10.4f %10.4f %8.4f\n", m.k,
                  m.min_ade, m.min_fde, m.miss_rate);
    os << line;
  }
  os << "scenes " << report.scenes.size() << ", latency ms mean "
     << Fixed(report.latency.mean * 1e3, 2) << " p50 "
     << Fixed(report.latency.p50 * 1e3, 2) << " p90 "
     << Fixed(report.latency.p90 * 1e3, 2) << " max "
     << Fixed(report.latency.max * 1e3, 2) << "\n";
  return os.str();
}

nlohmann::json SceneRecord(const SceneMetrics& scene) {
  nlohmann::json k = nlohmann::json::object();
  for (const TopKMetrics& m : scene.top_k) {
    k[std::to_string(m.k)] = {{"min_ade", m.min_ade},
                              {"min_fde", m.min_fde},
                              {"miss", m.miss_rate}};
  }
  return {{"record", "scene"},
          {"scene_id", scene.scene_id},
          {"num_candidates", scene.num_candidates},
          {"failed_samples", scene.failed_samples},
          {"latency_ms", scene.latency_seconds * 1e3},
          {"k", k}};
}

nlohmann::json AggregateRecord(const EvalReport& report) {
  nlohmann::json k = nlohmann::json::object();
  for (const TopKMetrics& m : report.aggregate) {
    k[std::to_string(m.k)] = {{"min_ade", m.min_ade},
                              {"min_fde", m.min_fde},
                              {"miss_rate", m.miss_rate}};
  }
  return {{"record", "aggregate"},
          {"scenes", report.scenes.size()},
          {"latency_ms",
           {{"mean", report.latency.mean * 1e3},
            {"p50", report.latency.p50 * 1e3},
            {"p90", report.latency.p90 * 1e3},
            {"max", report.latency.max * 1e3}}},
          {"k", k}};
}

void WriteJsonLines(const EvalReport& report, std::ostream& out) {
  for (const SceneMetrics& s : report.scenes) out << SceneRecord(s).dump() << "\n";
  out << AggregateRecord(report).dump() << "\n";
}

namespace {

std::vector<double> AverageRanks(const std::vector<double>& v) {
  std::vector<size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&v](size_t x, size_t y) { return v[x] < v[y]; });
  std::vector<double> ranks(v.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double SpearmanCorrelation(const std::vector<double>& a,
                           const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ShapeError("rank correlation needs two equal-length series of at "
                     "least two values");
  }
  const std::vector<double> ra = AverageRanks(a);
  const std::vector<double> rb = AverageRanks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace trajdiff::metrics
