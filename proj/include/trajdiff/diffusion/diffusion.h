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

// Variance schedule, forward noising and the DDPM / DDIM reverse samplers.
//
// Step indices run 1..H; alpha_bar(0) is defined as 1 so DDIM can jump
// straight to the clean sample.

#ifndef TRAJDIFF_DIFFUSION_DIFFUSION_H_
#define TRAJDIFF_DIFFUSION_DIFFUSION_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "trajdiff/tensor/array.h"

namespace trajdiff::diffusion {

using tensor::Array;

inline constexpr int kDefaultSteps = 200;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.05;

class NoiseSchedule {
 public:
  // Linear betas from beta_start (step 1) to beta_end (step H). Throws
  // ConfigError unless 0 < beta_start < beta_end < 1 and steps >= 1.
  static NoiseSchedule Linear(int steps = kDefaultSteps,
                              double beta_start = kDefaultBetaStart,
                              double beta_end = kDefaultBetaEnd);

  int steps() const { return static_cast<int>(beta_.size()) - 1; }
  double beta(int eta) const;
  double alpha(int eta) const;
  // Valid for 0 <= eta <= H.
  double alpha_bar(int eta) const;

 private:
  NoiseSchedule() = default;
  void CheckStep(int eta, int lowest) const;

  // Index 0 is unused for beta/alpha and equals 1 for alpha_bar.
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

// sqrt(alpha_bar) y0 + sqrt(1 - alpha_bar) eps.
Array ForwardNoise(const Array& y0, int eta, const Array& eps,
                   const NoiseSchedule& schedule);

// One ancestral step eta -> eta - 1.
Array DdpmStep(const Array& y, int eta, const Array& eps_hat, const Array& z,
               const NoiseSchedule& schedule);

// Deterministic jump eta -> eta_prev, 0 <= eta_prev < eta.
Array DdimStep(const Array& y, int eta, int eta_prev, const Array& eps_hat,
               const NoiseSchedule& schedule);

// Mean squared error over all elements.
double DiffusionLoss(const Array& eps, const Array& eps_hat);

enum class Method { kDdpm, kDdim };

std::string MethodName(Method method);
// Accepts "ddpm" or "ddim"; throws ConfigError otherwise.
Method ParseMethod(const std::string& name);

struct SamplerConfig {
  Method method = Method::kDdim;
  int skip = 20;  // DDIM only
  // DDPM with z = 0 at every step instead of only the last one.
  bool ddpm_zero_noise = false;
  int num_samples = 100;
  uint64_t seed = 0;
  int threads = 1;
};

// Throws ConfigError on M < 1, skip < 1, or H not divisible by skip.
void ValidateSamplerConfig(const SamplerConfig& config,
                           const NoiseSchedule& schedule);

// Number of denoiser evaluations per sample.
int DenoiserCalls(const SamplerConfig& config, const NoiseSchedule& schedule);

// Predicts noise for a batch: y is [B, ...sample shape], output matches.
// Conditioning is bound by the caller. The function must be safe to call
// concurrently from several threads when SamplerConfig::threads > 1.
using BatchDenoiser = std::function<Array(const Array& y, int eta)>;

struct SampleResult {
  std::vector<Array> samples;      // successful samples, in index order
  std::vector<int> sample_index;   // original chain index of each sample
  int failed = 0;
  int denoiser_calls_per_sample = 0;
  double wall_seconds = 0.0;
  std::vector<double> chain_seconds;  // per surviving sample
};

// Engine for one independent chain's randomness.
std::mt19937_64 ChainRng(uint64_t seed, int index);

// Runs M reverse chains batched through the denoiser. A chain whose
// prediction or state turns non-finite is dropped and counted in `failed`.
SampleResult Sample(const BatchDenoiser& denoiser,
                    const tensor::Shape& sample_shape,
                    const SamplerConfig& config,
                    const NoiseSchedule& schedule);

}  // namespace trajdiff::diffusion

#endif  // TRAJDIFF_DIFFUSION_DIFFUSION_H_
