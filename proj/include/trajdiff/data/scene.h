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

// Scenes and their canonical line-delimited JSON serialization.
//
// File layout: the first line is a header record
//   {"format": "trajdiff-scenes", "version": 1}
// and every following line is one scene:
//   {"id": str, "dt": float, "focal": int,
//    "agents": [{"id": int, "past": [[x, y], ...], "future": [[x, y], ...]}],
//    "mode": str (optional), "mode_endpoints": {mode: [x, y]} (optional),
//    "lanes": [[f, ...], ...] (optional)}
// Coordinates are meters in the world frame.

#ifndef TRAJDIFF_DATA_SCENE_H_
#define TRAJDIFF_DATA_SCENE_H_

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajdiff/geometry/geometry.h"

namespace trajdiff::data {

inline constexpr int kSceneFormatVersion = 1;
inline constexpr char kSceneFormatName[] = "trajdiff-scenes";

struct Scene {
  std::string id;
  double dt = 0.4;
  int focal = 0;  // index into agents
  std::vector<geometry::AgentTrack> agents;
  // Generator ground truth for the focal agent, empty for recorded data.
  std::string mode;
  std::map<std::string, geometry::Point> mode_endpoints;
  std::vector<std::vector<double>> lanes;

  const geometry::AgentTrack& focal_track() const { return agents.at(focal); }
  bool operator==(const Scene& other) const;
};

// Throws DataError unless every agent fits the horizon and the focal index
// is valid.
void ValidateScene(const Scene& scene, int history_steps, int future_steps);

nlohmann::json SceneToJson(const Scene& scene);
Scene SceneFromJson(const nlohmann::json& j);

void WriteScenes(std::ostream& out, const std::vector<Scene>& scenes);
void WriteScenesFile(const std::string& path, const std::vector<Scene>& scenes);
// Throws DataError naming the line on malformed input.
std::vector<Scene> ReadScenes(std::istream& in, const std::string& source);
std::vector<Scene> ReadScenesFile(const std::string& path);

}  // namespace trajdiff::data

#endif  // TRAJDIFF_DATA_SCENE_H_
