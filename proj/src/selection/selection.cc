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

#include "trajdiff/selection/selection.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "trajdiff/errors.h"
#include "trajdiff/metrics/metrics.h"

namespace trajdiff::selection {
namespace {

void CheckCount(int m, int k) {
  if (k < 1) throw ConfigError("K must be at least 1");
  if (m < k) {
    throw ShapeError("cannot select " + std::to_string(k) + " from " +
                     std::to_string(m) + " candidates");
  }
}

std::vector<double> Softmax(const std::vector<double>& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> p(x.size());
  double z = 0.0;
  for (size_t i = 0; i < x.size(); ++i) z += p[i] = std::exp(x[i] - mx);
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

std::vector<double> GroundTruthScores(const Trajectory& truth,
                                      const std::vector<Trajectory>& candidates,
                                      double lambda) {
  if (candidates.empty()) throw ShapeError("no candidates to score");
  std::vector<double> psi;
  psi.reserve(candidates.size());
  for (const Trajectory& c : candidates) {
    psi.push_back(metrics::Ade(truth, c) + lambda * metrics::Fde(truth, c));
  }
  return psi;
}

std::vector<double> ScoreTargets(const std::vector<double>& psi,
                                 double temperature) {
  if (psi.empty()) throw ShapeError("no scores");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  std::vector<double> logits(psi.size());
  for (size_t i = 0; i < psi.size(); ++i) logits[i] = -psi[i] / temperature;
  return Softmax(logits);
}

double ScorerLoss(const std::vector<double>& scores,
                  const std::vector<double>& psi, double temperature) {
  if (scores.size() != psi.size()) {
    throw ShapeError("score and target counts differ");
  }
  const std::vector<double> target = ScoreTargets(psi, temperature);
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  const double log_z = mx + std::log(z);
  double loss = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    loss -= target[i] * (scores[i] - log_z);
  }
  return loss;
}

std::string StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kNms:
      return "nms";
    case Strategy::kCoverage:
      return "coverage";
    case Strategy::kRandom:
      return "random";
  }
  return "";
}

Strategy ParseStrategy(const std::string& name) {
  if (name == "nms") return Strategy::kNms;
  if (name == "coverage") return Strategy::kCoverage;
  if (name == "random") return Strategy::kRandom;
  throw ConfigError("unknown selection strategy '" + name +
                    "', expected nms, coverage or random");
}

std::string DistanceName(Distance d) {
  return d == Distance::kEndpoint ? "endpoint" : "ade";
}

Distance ParseDistance(const std::string& name) {
  if (name == "endpoint") return Distance::kEndpoint;
  if (name == "ade") return Distance::kAde;
  throw ConfigError("unknown distance '" + name + "', expected endpoint or ade");
}

double TrajectoryDistance(const Trajectory& a, const Trajectory& b,
                          Distance distance) {
  return distance == Distance::kEndpoint ? metrics::Fde(a, b)
                                         : metrics::Ade(a, b);
}

void ValidateSelectionConfig(const SelectionConfig& config) {
  if (config.k < 1) throw ConfigError("K must be at least 1");
  if (!(config.omega > 0.0)) throw ConfigError("omega must be positive");
  if (!(config.radius > 0.0)) throw ConfigError("radius must be positive");
}

Selection NmsSelect(const std::vector<Trajectory>& candidates,
                    const std::vector<double>& scores,
                    const SelectionConfig& config) {
  ValidateSelectionConfig(config);
  const int m = static_cast<int>(candidates.size());
  if (static_cast<int>(scores.size()) != m) {
    throw ShapeError("got " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(m) + " candidates");
  }
  CheckCount(m, config.k);
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  Selection out;
  std::vector<int> rejected;
  for (int c : order) {
    if (static_cast<int>(out.indices.size()) == config.k) break;
    bool far = true;
    for (int s : out.indices) {
      if (TrajectoryDistance(candidates[c], candidates[s],
                             config.nms_distance) <= config.omega) {
        far = false;
        break;
      }
    }
    (far ? out.indices : rejected).push_back(c);
  }
  for (int c : rejected) {
    if (static_cast<int>(out.indices.size()) == config.k) break;
    out.indices.push_back(c);
    ++out.filled;
  }
  // Accepted and filled members interleave by score in the final order.
  std::stable_sort(out.indices.begin(), out.indices.end(), [&](int a, int b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  return out;
}

int CoverageCount(const std::vector<Trajectory>& candidates,
                  const std::vector<int>& selected, double radius) {
  int count = 0;
  for (const Trajectory& c : candidates) {
    for (int s : selected) {
      if (metrics::Ade(c, candidates[s]) < radius) {
        ++count;
        break;
      }
    }
  }
  return count;
}

Selection GreedyCoverageSelect(const std::vector<Trajectory>& candidates,
                               const SelectionConfig& config) {
  ValidateSelectionConfig(config);
  const int m = static_cast<int>(candidates.size());
  CheckCount(m, config.k);
  // within[i][j]: candidate j lies within the radius of candidate i.
  std::vector<std::vector<char>> within(m, std::vector<char>(m, 0));
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      within[i][j] = within[j][i] =
          metrics::Ade(candidates[i], candidates[j]) < config.radius;
    }
  }
  std::vector<char> covered(m, 0), chosen(m, 0);
  Selection out;
  while (static_cast<int>(out.indices.size()) < config.k) {
    int best = -1, best_gain = -1;
    for (int i = 0; i < m; ++i) {
      if (chosen[i]) continue;
      int gain = 0;
      for (int j = 0; j < m; ++j) gain += within[i][j] && !covered[j];
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    chosen[best] = 1;
    out.indices.push_back(best);
    for (int j = 0; j < m; ++j) {
      if (within[best][j]) covered[j] = 1;
    }
  }
  return out;
}

Selection RandomSelect(int num_candidates, int k, uint64_t seed) {
  CheckCount(num_candidates, k);
  std::vector<int> all(num_candidates);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(seed);
  Selection out;
  std::sample(all.begin(), all.end(), std::back_inserter(out.indices), k, rng);
  return out;
}

Selection Select(Strategy strategy, const std::vector<Trajectory>& candidates,
                 const std::vector<double>& scores,
                 const SelectionConfig& config) {
  switch (strategy) {
    case Strategy::kNms:
      return NmsSelect(candidates, scores, config);
    case Strategy::kCoverage:
      return GreedyCoverageSelect(candidates, config);
    case Strategy::kRandom:
      ValidateSelectionConfig(config);
      return RandomSelect(static_cast<int>(candidates.size()), config.k,
                          config.seed);
  }
  throw ConfigError("unknown selection strategy");
}

}  // namespace trajdiff::selection
