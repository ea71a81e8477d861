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

// The trajdiff command line: synth-data, train-denoiser, train-scorer,
// predict, evaluate and bench.

#ifndef TRAJDIFF_CLI_CLI_H_
#define TRAJDIFF_CLI_CLI_H_

#include <ostream>
#include <string>
#include <vector>

#include "trajdiff/data/config.h"
#include "trajdiff/data/scene.h"

namespace trajdiff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Runs one command and returns the process exit code. Results go to `out`,
// progress and errors to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Training scenes from train_scenes, or the leave-one-out training
// locations under data_root. Throws ConfigError when neither is set.
std::vector<data::Scene> LoadTrainScenes(const data::RunConfig& config);
// Test scenes from test_scenes, or the held-out location under data_root.
std::vector<data::Scene> LoadTestScenes(const data::RunConfig& config);

}  // namespace trajdiff::cli

#endif  // TRAJDIFF_CLI_CLI_H_
