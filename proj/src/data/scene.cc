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

#include "trajdiff/data/scene.h"

#include <fstream>

#include "trajdiff/errors.h"

namespace trajdiff::data {
namespace {

using geometry::Point;
using geometry::Trajectory;
using nlohmann::json;

json PointsToJson(const Trajectory& t) {
  json a = json::array();
  for (const Point& p : t) a.push_back({p.x(), p.y()});
  return a;
}

Point PointFromJson(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw DataError("expected an [x, y] pair, got " + j.dump());
  }
  return Point(j[0].get<double>(), j[1].get<double>());
}

Trajectory PointsFromJson(const json& j) {
  Trajectory t;
  for (const json& p : j) t.push_back(PointFromJson(p));
  return t;
}

}  // namespace

bool Scene::operator==(const Scene& other) const {
  if (id != other.id || dt != other.dt || focal != other.focal ||
      mode != other.mode || lanes != other.lanes ||
      agents.size() != other.agents.size() ||
      mode_endpoints != other.mode_endpoints) {
    return false;
  }
  for (size_t i = 0; i < agents.size(); ++i) {
    const geometry::AgentTrack& a = agents[i];
    const geometry::AgentTrack& b = other.agents[i];
    if (a.agent_id != b.agent_id || a.past != b.past || a.future != b.future) {
      return false;
    }
  }
  return true;
}

void ValidateScene(const Scene& scene, int history_steps, int future_steps) {
  if (scene.agents.empty()) throw DataError("scene " + scene.id + " is empty");
  if (scene.focal < 0 || scene.focal >= static_cast<int>(scene.agents.size())) {
    throw DataError("scene " + scene.id + " has focal index " +
                    std::to_string(scene.focal) + " out of range");
  }
  try {
    for (const geometry::AgentTrack& a : scene.agents) {
      geometry::ValidateTrack(a, history_steps, future_steps);
    }
  } catch (const DataError& e) {
    throw DataError("scene " + scene.id + ": " + e.what());
  }
}

json SceneToJson(const Scene& scene) {
  json agents = json::array();
  for (const geometry::AgentTrack& a : scene.agents) {
    agents.push_back({{"id", a.agent_id},
                      {"past", PointsToJson(a.past)},
                      {"future", PointsToJson(a.future)}});
  }
  json j = {{"id", scene.id},
            {"dt", scene.dt},
            {"focal", scene.focal},
            {"agents", agents}};
  if (!scene.mode.empty()) j["mode"] = scene.mode;
  if (!scene.mode_endpoints.empty()) {
    json ends = json::object();
    for (const auto& [name, p] : scene.mode_endpoints) {
      ends[name] = {p.x(), p.y()};
    }
    j["mode_endpoints"] = ends;
  }
  if (!scene.lanes.empty()) j["lanes"] = scene.lanes;
  return j;
}

Scene SceneFromJson(const json& j) {
  Scene s;
  try {
    s.id = j.at("id").get<std::string>();
    s.dt = j.at("dt").get<double>();
    s.focal = j.at("focal").get<int>();
    for (const json& a : j.at("agents")) {
      geometry::AgentTrack t;
      t.agent_id = a.at("id").get<int64_t>();
      t.past = PointsFromJson(a.at("past"));
      t.future = PointsFromJson(a.at("future"));
      s.agents.push_back(std::move(t));
    }
    if (j.contains("mode")) s.mode = j["mode"].get<std::string>();
    if (j.contains("mode_endpoints")) {
      for (const auto& [name, p] : j["mode_endpoints"].items()) {
        s.mode_endpoints[name] = PointFromJson(p);
      }
    }
    if (j.contains("lanes")) {
      s.lanes = j["lanes"].get<std::vector<std::vector<double>>>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed scene record: ") + e.what());
  }
  return s;
}

void WriteScenes(std::ostream& out, const std::vector<Scene>& scenes) {
  out << json{{"format", kSceneFormatName}, {"version", kSceneFormatVersion}}
             .dump()
      << "\n";
  for (const Scene& s : scenes) out << SceneToJson(s).dump() << "\n";
}

void WriteScenesFile(const std::string& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write scenes to " + path);
  WriteScenes(out, scenes);
  if (!out) throw DataError("failed writing scenes to " + path);
}

std::vector<Scene> ReadScenes(std::istream& in, const std::string& source) {
  std::vector<Scene> scenes;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(where + ": invalid JSON: " + e.what());
    }
    if (!header) {
      if (j.value("format", "") != kSceneFormatName) {
        throw DataError(where + ": missing trajdiff-scenes header");
      }
      if (j.value("version", -1) != kSceneFormatVersion) {
        throw DataError(where + ": unsupported scene format version " +
                        j.value("version", json(nullptr)).dump());
      }
      header = true;
      continue;
    }
    try {
      scenes.push_back(SceneFromJson(j));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  if (!header) throw DataError(source + ": empty scene file");
  return scenes;
}

std::vector<Scene> ReadScenesFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scene file " + path);
  return ReadScenes(in, path);
}

}  // namespace trajdiff::data
