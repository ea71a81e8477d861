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

// Pedestrian annotation files (one "frame id x y" row per observation) and
// the leave-one-out protocol over the five recorded locations.

#ifndef TRAJDIFF_DATA_ETHUCY_H_
#define TRAJDIFF_DATA_ETHUCY_H_

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "trajdiff/data/scene.h"

namespace trajdiff::data {

struct RawAnnotation {
  int64_t frame = 0;
  int64_t agent = 0;
  double x = 0.0;
  double y = 0.0;
};

struct WindowOptions {
  int history_steps = 8;
  int future_steps = 12;
  int stride = 1;  // in annotated frames
  double dt = 0.4;
  bool swap_xy = false;  // columns are (frame, id, y, x)
};

// Whitespace separated; blank lines and lines starting with '#' are
// skipped. Throws DataError with the line number on malformed rows or a
// repeated (frame, agent) pair.
std::vector<RawAnnotation> ParseAnnotations(std::istream& in,
                                            const std::string& source,
                                            bool swap_xy = false);

// Slides a window of history_steps + future_steps consecutive annotated
// frames. Every agent present in all window frames becomes the focal agent
// of one scene; the scene also carries every other agent seen in all
// history frames, with its future when complete.
std::vector<Scene> BuildScenes(const std::vector<RawAnnotation>& rows,
                               const WindowOptions& options,
                               const std::string& source);

std::vector<Scene> LoadEthUcy(const std::string& path,
                              const WindowOptions& options);

// Canonical subset names: ETH, Hotel, Univ, Zara1, Zara2.
const std::vector<std::string>& SubsetNames();

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Matching is case-insensitive. Throws ConfigError listing valid names.
Split LeaveOneOut(const std::string& subset);

// Annotation files of a subset under `root`: every .txt file below
// root/<lowercase name>, or failing that any .txt file directly in root
// whose name contains the subset's usual file stem.
std::vector<std::string> SubsetFiles(const std::string& root,
                                     const std::string& subset);

}  // namespace trajdiff::data

#endif  // TRAJDIFF_DATA_ETHUCY_H_
