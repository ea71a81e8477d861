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

// Agent-centric, translation- and rotation-invariant trajectory encoding.
//
// Every agent gets a heading at the last observed step and a rotation R
// built from it. Histories and futures become per-step displacements
// expressed in the rotated frame, R^T (p_k - p_{k-1}); the first history
// entry is pinned to zero.

#ifndef TRAJDIFF_GEOMETRY_GEOMETRY_H_
#define TRAJDIFF_GEOMETRY_GEOMETRY_H_

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace trajdiff::geometry {

using Point = Eigen::Vector2d;
using Rotation = Eigen::Matrix2d;
using Trajectory = std::vector<Point>;

// Displacements shorter than this (meters) carry no heading information.
inline constexpr double kStationaryThreshold = 1e-6;

struct AgentTrack {
  int64_t agent_id = 0;
  Trajectory past;    // p_{t-T_p+1} .. p_t, world frame
  Trajectory future;  // p_{t+1} .. p_{t+T_f}; empty at pure inference

  const Point& current() const { return past.back(); }
  bool has_future() const { return !future.empty(); }
};

struct InvariantHistory {
  double heading = 0.0;
  Rotation rotation = Rotation::Identity();
  Trajectory displacements;  // length T_p, displacements[0] == (0, 0)
  Point anchor = Point::Zero();
};

struct InvariantFuture {
  Trajectory displacements;  // length T_f
};

// Throws DataError unless past has `history_steps` >= 2 finite points and
// future is empty or has `future_steps` finite points.
void ValidateTrack(const AgentTrack& track, int history_steps,
                   int future_steps);

Rotation RotationFromHeading(double heading);

// atan2 of the last displacement; falls back to the most recent
// non-degenerate displacement, then to zero for a stationary track.
double ComputeHeading(const AgentTrack& track);

InvariantHistory ToInvariantHistory(const AgentTrack& track);

// Throws DataError when the track has no future.
InvariantFuture ToInvariantFuture(const AgentTrack& track,
                                  const Rotation& rotation);

// Inverse of ToInvariantFuture: p_{t+j} = p_t + sum_{i=1..j} R y_i.
// Throws ShapeError when `displacements` does not have `future_steps`
// entries.
Trajectory DisplacementsToPositions(const Trajectory& displacements,
                                    const Rotation& rotation,
                                    const Point& anchor, int future_steps);

// Running sum of displacements, i.e. positions relative to the anchor in
// the agent frame.
Trajectory CumulativeSum(const Trajectory& displacements);

}  // namespace trajdiff::geometry

#endif  // TRAJDIFF_GEOMETRY_GEOMETRY_H_
