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

#include "trajdiff/geometry/geometry.h"

#include <cmath>
#include <string>

#include "trajdiff/errors.h"

namespace trajdiff::geometry {
namespace {

bool AllFinite(const Trajectory& t) {
  for (const Point& p : t) {
    if (!p.allFinite()) return false;
  }
  return true;
}

}  // namespace

void ValidateTrack(const AgentTrack& track, int history_steps,
                   int future_steps) {
  const std::string who = "agent " + std::to_string(track.agent_id);
  if (history_steps < 2) {
    throw DataError("history length must be at least 2");
  }
  if (static_cast<int>(track.past.size()) != history_steps) {
    throw DataError(who + " has " + std::to_string(track.past.size()) +
                    " past points, expected " + std::to_string(history_steps));
  }
  if (!track.future.empty() &&
      static_cast<int>(track.future.size()) != future_steps) {
    throw DataError(who + " has " + std::to_string(track.future.size()) +
                    " future points, expected " +
                    std::to_string(future_steps) + " or 0");
  }
  if (!AllFinite(track.past) || !AllFinite(track.future)) {
    throw DataError(who + " has non-finite coordinates");
  }
}

Rotation RotationFromHeading(double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  Rotation r;
  r << c, -s, s, c;
  return r;
}

double ComputeHeading(const AgentTrack& track) {
  for (size_t k = track.past.size(); k >= 2; --k) {
    const Point d = track.past[k - 1] - track.past[k - 2];
    if (d.norm() >= kStationaryThreshold) return std::atan2(d.y(), d.x());
  }
  return 0.0;
}

InvariantHistory ToInvariantHistory(const AgentTrack& track) {
  if (track.past.size() < 2) {
    throw DataError("agent " + std::to_string(track.agent_id) +
                    " needs at least two past points");
  }
  InvariantHistory h;
  h.heading = ComputeHeading(track);
  h.rotation = RotationFromHeading(h.heading);
  h.anchor = track.current();
  const Rotation rt = h.rotation.transpose();
  h.displacements.reserve(track.past.size());
  h.displacements.push_back(Point::Zero());
  for (size_t k = 1; k < track.past.size(); ++k) {
    h.displacements.push_back(rt * (track.past[k] - track.past[k - 1]));
  }
  return h;
}

InvariantFuture ToInvariantFuture(const AgentTrack& track,
                                  const Rotation& rotation) {
  if (!track.has_future()) {
    throw DataError("agent " + std::to_string(track.agent_id) +
                    " has no future to encode");
  }
  InvariantFuture f;
  f.displacements.reserve(track.future.size());
  const Rotation rt = rotation.transpose();
  Point prev = track.current();
  for (const Point& p : track.future) {
    f.displacements.push_back(rt * (p - prev));
    prev = p;
  }
  return f;
}

Trajectory DisplacementsToPositions(const Trajectory& displacements,
                                    const Rotation& rotation,
                                    const Point& anchor, int future_steps) {
  if (static_cast<int>(displacements.size()) != future_steps) {
    throw ShapeError("expected " + std::to_string(future_steps) +
                     " displacements, got " +
                     std::to_string(displacements.size()));
  }
  Trajectory out;
  out.reserve(displacements.size());
  Point p = anchor;
  for (const Point& d : displacements) {
    p += rotation * d;
    out.push_back(p);
  }
  return out;
}

Trajectory CumulativeSum(const Trajectory& displacements) {
  Trajectory out;
  out.reserve(displacements.size());
  Point p = Point::Zero();
  for (const Point& d : displacements) {
    p += d;
    out.push_back(p);
  }
  return out;
}

}  // namespace trajdiff::geometry
