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

// Synthetic multimodal scenes with known ground-truth modes.
//
// Every agent walks a straight constant-speed history. Its future follows
// one of four modes: keep straight, turn left or right (heading swings by
// a quarter turn spread evenly over the future), or stop at the last
// observed point. Agent 0 is the focal agent; its mode and the noiseless
// endpoint of every mode are attached to the scene.

#ifndef TRAJDIFF_DATA_SYNTHETIC_H_
#define TRAJDIFF_DATA_SYNTHETIC_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trajdiff/data/scene.h"

namespace trajdiff::data {

inline const std::vector<std::string>& ModeNames() {
  static const std::vector<std::string> names{"straight", "left", "right",
                                              "stop"};
  return names;
}

struct SyntheticSpec {
  int num_scenes = 1000;
  int agents_per_scene = 3;
  std::map<std::string, double> mode_weights{
      {"straight", 0.25}, {"left", 0.25}, {"right", 0.25}, {"stop", 0.25}};
  double speed_min = 0.8;  // m/s
  double speed_max = 1.6;
  double noise = 0.0;  // position noise standard deviation, meters
  double area = 10.0;  // start positions uniform in [-area, area]^2
  uint64_t seed = 0;
  int history_steps = 8;
  int future_steps = 12;
  double dt = 0.4;
};

// Throws ConfigError on unknown modes, weights not summing to one, negative
// noise or an empty speed range.
void ValidateSyntheticSpec(const SyntheticSpec& spec);

// Parses "left:0.5,right:0.5".
std::map<std::string, double> ParseModeWeights(const std::string& text);

// Noiseless future of a given mode from position `p` with heading `theta`.
geometry::Trajectory ModeFuture(const std::string& mode,
                                const geometry::Point& p, double theta,
                                double speed, int future_steps, double dt);

std::vector<Scene> GenerateSynthetic(const SyntheticSpec& spec);

}  // namespace trajdiff::data

#endif  // TRAJDIFF_DATA_SYNTHETIC_H_
