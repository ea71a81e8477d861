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

#include "trajdiff/data/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "trajdiff/errors.h"

namespace trajdiff::data {

using geometry::Point;
using geometry::Trajectory;

void ValidateSyntheticSpec(const SyntheticSpec& spec) {
  if (spec.num_scenes < 0 || spec.agents_per_scene < 1) {
    throw ConfigError("synthetic data needs a non-negative scene count and "
                      "at least one agent per scene");
  }
  if (spec.mode_weights.empty()) throw ConfigError("no synthetic modes given");
  double total = 0.0;
  for (const auto& [mode, w] : spec.mode_weights) {
    if (std::find(ModeNames().begin(), ModeNames().end(), mode) ==
        ModeNames().end()) {
      throw ConfigError("unknown synthetic mode '" + mode + "'");
    }
    if (w < 0.0) throw ConfigError("mode weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("mode weights sum to " + std::to_string(total) +
                      ", expected 1");
  }
  if (spec.noise < 0.0) throw ConfigError("noise must be non-negative");
  if (!(spec.speed_min > 0.0) || spec.speed_max < spec.speed_min) {
    throw ConfigError("speed range must satisfy 0 < min <= max");
  }
  if (spec.history_steps < 2 || spec.future_steps < 1 || !(spec.dt > 0.0)) {
    throw ConfigError("synthetic horizon needs history >= 2, future >= 1, dt > 0");
  }
}

std::map<std::string, double> ParseModeWeights(const std::string& text) {
  std::map<std::string, double> weights;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const size_t colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("mode weight '" + item + "' is not name:weight");
    }
    try {
      weights[item.substr(0, colon)] = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad weight in '" + item + "'");
    }
  }
  return weights;
}

Trajectory ModeFuture(const std::string& mode, const Point& p, double theta,
                      double speed, int future_steps, double dt) {
  double turn = 0.0;
  if (mode == "left") turn = std::numbers::pi / 2;
  if (mode == "right") turn = -std::numbers::pi / 2;
  Trajectory out;
  Point q = p;
  for (int j = 1; j <= future_steps; ++j) {
    if (mode != "stop") {
      const double heading = theta + turn * j / future_steps;
      q += speed * dt * Point(std::cos(heading), std::sin(heading));
    }
    out.push_back(q);
  }
  return out;
}

std::vector<Scene> GenerateSynthetic(const SyntheticSpec& spec) {
  ValidateSyntheticSpec(spec);
  std::vector<std::string> modes;
  std::vector<double> weights;
  for (const auto& [m, w] : spec.mode_weights) {
    modes.push_back(m);
    weights.push_back(w);
  }
  std::mt19937_64 rng(spec.seed);
  std::discrete_distribution<int> pick_mode(weights.begin(), weights.end());
  std::uniform_real_distribution<double> pos(-spec.area, spec.area);
  std::uniform_real_distribution<double> angle(-std::numbers::pi,
                                               std::numbers::pi);
  std::uniform_real_distribution<double> speed(spec.speed_min, spec.speed_max);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto jitter = [&](Point p) {
    if (spec.noise > 0.0) p += spec.noise * Point(noise(rng), noise(rng));
    return p;
  };

  std::vector<Scene> scenes;
  scenes.reserve(spec.num_scenes);
  for (int s = 0; s < spec.num_scenes; ++s) {
    Scene scene;
    scene.id = "synthetic/" + std::to_string(spec.seed) + "/" +
               std::to_string(s);
    scene.dt = spec.dt;
    for (int a = 0; a < spec.agents_per_scene; ++a) {
      const Point start(pos(rng), pos(rng));
      const double theta = angle(rng);
      const double v = speed(rng);
      const std::string& mode = modes[pick_mode(rng)];
      const Point step = v * spec.dt * Point(std::cos(theta), std::sin(theta));
      Trajectory clean_past;
      for (int k = 0; k < spec.history_steps; ++k) {
        clean_past.push_back(start + k * step);
      }
      const Point current = clean_past.back();
      geometry::AgentTrack track;
      track.agent_id = a;
      for (const Point& p : clean_past) track.past.push_back(jitter(p));
      for (const Point& p : ModeFuture(mode, current, theta, v,
                                       spec.future_steps, spec.dt)) {
        track.future.push_back(jitter(p));
      }
      if (a == 0) {
        scene.mode = mode;
        for (const std::string& m : ModeNames()) {
          scene.mode_endpoints[m] =
              ModeFuture(m, current, theta, v, spec.future_steps, spec.dt)
                  .back();
        }
      }
      scene.agents.push_back(std::move(track));
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace trajdiff::data
