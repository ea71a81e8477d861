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

// Binary checkpoint container.
//
// Layout (all integers little-endian):
//   magic        8 bytes  "TRAJDIFF"
//   version      u32      kCheckpointVersion
//   manifest     u32 length + UTF-8 JSON object (architecture, step, ...)
//   count        u32      number of records
//   record*      u32 name length, name bytes,
//                u8 dtype tag (1 = float64),
//                u32 rank, rank x i64 extents,
//                payload: product(extents) x IEEE-754 binary64
//
// ParameterStores are written as records "<prefix>/param/<name>" plus
// "<prefix>/m/<name>" and "<prefix>/v/<name>" for the AdamW moments; the
// optimizer step lives in the manifest under "<prefix>.step".

#ifndef TRAJDIFF_TENSOR_CHECKPOINT_H_
#define TRAJDIFF_TENSOR_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "trajdiff/tensor/array.h"
#include "trajdiff/tensor/parameter_store.h"

namespace trajdiff::tensor {

inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr uint8_t kDtypeFloat64 = 1;

struct Checkpoint {
  nlohmann::json manifest = nlohmann::json::object();
  std::vector<std::pair<std::string, Array>> records;

  const Array* Find(std::string_view name) const;
};

void WriteCheckpoint(const std::string& path, const Checkpoint& checkpoint);
// Throws DataError on a truncated, corrupt or foreign file.
Checkpoint ReadCheckpoint(const std::string& path);

void AppendStore(std::string_view prefix, const ParameterStore& store,
                 Checkpoint& checkpoint);

// Copies parameters and moments for every name already registered in
// `store`. Missing names or differing shapes throw ConfigError, which is
// how an architecture mismatch between config and checkpoint surfaces.
void LoadStore(std::string_view prefix, const Checkpoint& checkpoint,
               ParameterStore& store);

}  // namespace trajdiff::tensor

#endif  // TRAJDIFF_TENSOR_CHECKPOINT_H_
