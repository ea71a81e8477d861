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

// Score targets for the scorer and the strategies that reduce M candidates
// to a prediction set of K.

#ifndef TRAJDIFF_SELECTION_SELECTION_H_
#define TRAJDIFF_SELECTION_SELECTION_H_

#include <cstdint>
#include <string>
#include <vector>

#include "trajdiff/geometry/geometry.h"
#include "trajdiff/tensor/array.h"

namespace trajdiff::selection {

using geometry::Trajectory;

inline constexpr double kDefaultLambda = 1.5;
inline constexpr double kDefaultOmega = 8.0;       // meters
inline constexpr double kDefaultRadius = 2.0;      // meters
inline constexpr double kDefaultTemperature = 1.0;

// psi_j = ADE(truth, c_j) + lambda * FDE(truth, c_j).
std::vector<double> GroundTruthScores(const Trajectory& truth,
                                      const std::vector<Trajectory>& candidates,
                                      double lambda = kDefaultLambda);

// softmax(-psi / temperature); lower error gets more mass.
std::vector<double> ScoreTargets(const std::vector<double>& psi,
                                 double temperature = kDefaultTemperature);

// Cross-entropy between softmax(scores) and ScoreTargets(psi).
double ScorerLoss(const std::vector<double>& scores,
                  const std::vector<double>& psi,
                  double temperature = kDefaultTemperature);

enum class Distance { kEndpoint, kAde };
enum class Strategy { kNms, kCoverage, kRandom };

std::string StrategyName(Strategy s);
Strategy ParseStrategy(const std::string& name);  // nms, coverage, random
std::string DistanceName(Distance d);
Distance ParseDistance(const std::string& name);  // endpoint, ade

double TrajectoryDistance(const Trajectory& a, const Trajectory& b,
                          Distance distance);

struct SelectionConfig {
  int k = 20;
  double omega = kDefaultOmega;
  double radius = kDefaultRadius;
  Distance nms_distance = Distance::kEndpoint;
  uint64_t seed = 0;
};

// Throws ConfigError on K < 1 or non-positive thresholds.
void ValidateSelectionConfig(const SelectionConfig& config);

struct Selection {
  std::vector<int> indices;  // into the candidate list, in output order
  int filled = 0;  // NMS: how many came from the rejected pool
};

// Score-ordered non-maximum suppression. Ties in score keep the lower
// index first. When fewer than K survive, the highest-scoring rejected
// candidates fill the remainder. Throws ShapeError when M < K or sizes
// disagree.
Selection NmsSelect(const std::vector<Trajectory>& candidates,
                    const std::vector<double>& scores,
                    const SelectionConfig& config);

// Number of candidates within ADE `radius` of at least one selected one.
int CoverageCount(const std::vector<Trajectory>& candidates,
                  const std::vector<int>& selected, double radius);

// Greedy maximum coverage under ADE distance; ties go to the lower index.
Selection GreedyCoverageSelect(const std::vector<Trajectory>& candidates,
                               const SelectionConfig& config);

// Uniform K-subset without replacement, returned in ascending index order.
Selection RandomSelect(int num_candidates, int k, uint64_t seed);

Selection Select(Strategy strategy, const std::vector<Trajectory>& candidates,
                 const std::vector<double>& scores,
                 const SelectionConfig& config);

}  // namespace trajdiff::selection

#endif  // TRAJDIFF_SELECTION_SELECTION_H_
