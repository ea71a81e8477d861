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

#include "trajdiff/data/ethucy.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "trajdiff/errors.h"

namespace trajdiff::data {
namespace {

namespace fs = std::filesystem;

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string Canonical(const std::string& subset) {
  for (const std::string& name : SubsetNames()) {
    if (Lower(name) == Lower(subset)) return name;
  }
  std::string valid;
  for (const std::string& name : SubsetNames()) {
    valid += (valid.empty() ? "" : ", ") + name;
  }
  throw ConfigError("unknown subset '" + subset + "'; valid names: " + valid);
}

// File stems used by the common distributions of these recordings.
std::vector<std::string> FileStems(const std::string& canonical) {
  if (canonical == "ETH") return {"biwi_eth", "eth"};
  if (canonical == "Hotel") return {"biwi_hotel", "hotel"};
  if (canonical == "Univ") return {"students", "uni_examples", "univ"};
  if (canonical == "Zara1") return {"crowds_zara01", "zara1"};
  return {"crowds_zara02", "zara2"};
}

}  // namespace

std::vector<RawAnnotation> ParseAnnotations(std::istream& in,
                                            const std::string& source,
                                            bool swap_xy) {
  std::vector<RawAnnotation> rows;
  std::set<std::pair<int64_t, int64_t>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream fields(line);
    double frame = 0, agent = 0, a = 0, b = 0;
    std::string extra;
    const std::string where = source + ":" + std::to_string(line_no);
    if (!(fields >> frame >> agent >> a >> b) || (fields >> extra)) {
      throw DataError(where + ": expected 4 numeric columns (frame id x y)");
    }
    if (!std::isfinite(a) || !std::isfinite(b) || frame != std::floor(frame) ||
        agent != std::floor(agent)) {
      throw DataError(where + ": frame and id must be integers, x and y finite");
    }
    RawAnnotation r;
    r.frame = static_cast<int64_t>(frame);
    r.agent = static_cast<int64_t>(agent);
    r.x = swap_xy ? b : a;
    r.y = swap_xy ? a : b;
    if (!seen.emplace(r.frame, r.agent).second) {
      throw DataError(where + ": duplicate annotation for agent " +
                      std::to_string(r.agent) + " in frame " +
                      std::to_string(r.frame));
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<Scene> BuildScenes(const std::vector<RawAnnotation>& rows,
                               const WindowOptions& options,
                               const std::string& source) {
  if (options.history_steps < 2 || options.future_steps < 1 ||
      options.stride < 1) {
    throw ConfigError("window needs history >= 2, future >= 1, stride >= 1");
  }
  std::map<int64_t, std::map<int64_t, geometry::Point>> by_frame;
  for (const RawAnnotation& r : rows) {
    by_frame[r.frame][r.agent] = geometry::Point(r.x, r.y);
  }
  std::vector<int64_t> frames;
  for (const auto& [f, agents] : by_frame) frames.push_back(f);

  const int tp = options.history_steps;
  const int len = tp + options.future_steps;
  std::vector<Scene> scenes;
  for (size_t s = 0; s + len <= frames.size(); s += options.stride) {
    // Agents seen in every history frame, and those seen in every frame.
    std::vector<int64_t> observed;
    for (const auto& [agent, p] : by_frame[frames[s]]) {
      bool all = true;
      for (int k = 1; k < tp && all; ++k) {
        all = by_frame[frames[s + k]].count(agent) > 0;
      }
      if (all) observed.push_back(agent);
    }
    auto complete_future = [&](int64_t agent) {
      for (int k = tp; k < len; ++k) {
        if (!by_frame[frames[s + k]].count(agent)) return false;
      }
      return true;
    };
    auto track_of = [&](int64_t agent, bool with_future) {
      geometry::AgentTrack t;
      t.agent_id = agent;
      for (int k = 0; k < tp; ++k) t.past.push_back(by_frame[frames[s + k]][agent]);
      if (with_future) {
        for (int k = tp; k < len; ++k) {
          t.future.push_back(by_frame[frames[s + k]][agent]);
        }
      }
      return t;
    };
    std::vector<char> has_future(observed.size());
    for (size_t i = 0; i < observed.size(); ++i) {
      has_future[i] = complete_future(observed[i]);
    }
    for (size_t i = 0; i < observed.size(); ++i) {
      if (!has_future[i]) continue;
      Scene scene;
      scene.id = source + "/" + std::to_string(frames[s + tp - 1]) + "/" +
                 std::to_string(observed[i]);
      scene.dt = options.dt;
      scene.agents.push_back(track_of(observed[i], true));
      for (size_t j = 0; j < observed.size(); ++j) {
        if (j != i) scene.agents.push_back(track_of(observed[j], has_future[j]));
      }
      scenes.push_back(std::move(scene));
    }
  }
  return scenes;
}

std::vector<Scene> LoadEthUcy(const std::string& path,
                              const WindowOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation file " + path);
  const std::string source = fs::path(path).stem().string();
  return BuildScenes(ParseAnnotations(in, path, options.swap_xy), options,
                     source);
}

const std::vector<std::string>& SubsetNames() {
  static const std::vector<std::string> names{"ETH", "Hotel", "Univ", "Zara1",
                                              "Zara2"};
  return names;
}

Split LeaveOneOut(const std::string& subset) {
  const std::string test = Canonical(subset);
  Split split;
  split.test.push_back(test);
  for (const std::string& name : SubsetNames()) {
    if (name != test) split.train.push_back(name);
  }
  return split;
}

std::vector<std::string> SubsetFiles(const std::string& root,
                                     const std::string& subset) {
  const std::string name = Canonical(subset);
  std::vector<std::string> files;
  const fs::path dir = fs::path(root) / Lower(name);
  std::error_code ec;
  if (fs::is_directory(dir, ec)) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") {
        files.push_back(e.path().string());
      }
    }
  } else if (fs::is_directory(root, ec)) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (!e.is_regular_file() || e.path().extension() != ".txt") continue;
      const std::string stem = Lower(e.path().stem().string());
      for (const std::string& s : FileStems(name)) {
        if (stem.find(s) != std::string::npos) {
          files.push_back(e.path().string());
          break;
        }
      }
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw DataError("no annotation files for " + name + " under " + root);
  }
  return files;
}

}  // namespace trajdiff::data
