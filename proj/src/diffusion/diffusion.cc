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

#include "trajdiff/diffusion/diffusion.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "trajdiff/errors.h"

namespace trajdiff::diffusion {
namespace {

using Clock = std::chrono::steady_clock;

void CheckSameShape(const Array& a, const Array& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " +
                     tensor::ShapeToString(a.shape()) + " and " +
                     tensor::ShapeToString(b.shape()) + " differ");
  }
}

// out = ca * a + cb * b elementwise.
Array Combine(double ca, const Array& a, double cb, const Array& b) {
  Array out(a.shape());
  auto o = out.mutable_values();
  auto x = a.values();
  auto y = b.values();
  for (size_t i = 0; i < o.size(); ++i) o[i] = ca * x[i] + cb * y[i];
  return out;
}

Array StandardNormal(const tensor::Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Array out(shape);
  for (double& v : out.mutable_values()) v = normal(rng);
  return out;
}

Array Stack(const std::vector<const Array*>& rows,
            const tensor::Shape& sample_shape) {
  tensor::Shape shape{static_cast<int64_t>(rows.size())};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Array out(shape);
  double* dst = out.data();
  for (const Array* r : rows) {
    std::copy(r->values().begin(), r->values().end(), dst);
    dst += r->size();
  }
  return out;
}

Array Row(const Array& batch, size_t row, const tensor::Shape& sample_shape) {
  const size_t n = static_cast<size_t>(tensor::NumElements(sample_shape));
  const double* src = batch.data() + row * n;
  return Array(sample_shape, std::vector<double>(src, src + n));
}

struct Chain {
  int index = 0;
  Array y;
  std::mt19937_64 rng;
  bool alive = true;
};

// Predicts noise for every live chain. A batch-level NumericError falls back
// to one call per chain so a single bad sample cannot sink the rest.
std::vector<Array> PredictNoise(const BatchDenoiser& denoiser,
                                std::vector<Chain*>& live, int eta,
                                const tensor::Shape& sample_shape) {
  std::vector<const Array*> rows;
  rows.reserve(live.size());
  for (Chain* c : live) rows.push_back(&c->y);
  std::vector<Array> out;
  out.reserve(live.size());
  try {
    const Array batch = denoiser(Stack(rows, sample_shape), eta);
    for (size_t i = 0; i < live.size(); ++i) {
      out.push_back(Row(batch, i, sample_shape));
    }
    return out;
  } catch (const NumericError&) {
    out.clear();
  }
  for (Chain* c : live) {
    try {
      out.push_back(Row(denoiser(Stack({&c->y}, sample_shape), eta), 0,
                        sample_shape));
    } catch (const NumericError&) {
      c->alive = false;
      out.emplace_back(sample_shape);
    }
  }
  return out;
}

void RunChains(const BatchDenoiser& denoiser,
               const tensor::Shape& sample_shape, const SamplerConfig& config,
               const NoiseSchedule& schedule, std::vector<Chain>& chains) {
  const int h = schedule.steps();
  const int stride = config.method == Method::kDdim ? config.skip : 1;
  for (int eta = h; eta >= stride; eta -= stride) {
    std::vector<Chain*> live;
    for (Chain& c : chains) {
      if (c.alive) live.push_back(&c);
    }
    if (live.empty()) return;
    const std::vector<Array> eps = PredictNoise(denoiser, live, eta, sample_shape);
    for (size_t i = 0; i < live.size(); ++i) {
      Chain& c = *live[i];
      if (!c.alive) continue;
      if (!eps[i].AllFinite()) {
        c.alive = false;
        continue;
      }
      if (config.method == Method::kDdim) {
        c.y = DdimStep(c.y, eta, eta - stride, eps[i], schedule);
      } else {
        const Array z = eta > 1 && !config.ddpm_zero_noise
                            ? StandardNormal(sample_shape, c.rng)
                            : Array(sample_shape);
        c.y = DdpmStep(c.y, eta, eps[i], z, schedule);
      }
      if (!c.y.AllFinite()) c.alive = false;
    }
  }
}

}  // namespace

NoiseSchedule NoiseSchedule::Linear(int steps, double beta_start,
                                    double beta_end) {
  if (steps < 1) throw ConfigError("diffusion steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw ConfigError("beta range must satisfy 0 < start < end < 1, got [" +
                      std::to_string(beta_start) + ", " +
                      std::to_string(beta_end) + "]");
  }
  NoiseSchedule s;
  s.beta_.assign(steps + 1, 0.0);
  s.alpha_.assign(steps + 1, 1.0);
  s.alpha_bar_.assign(steps + 1, 1.0);
  for (int eta = 1; eta <= steps; ++eta) {
    const double frac =
        steps == 1 ? 0.0 : static_cast<double>(eta - 1) / (steps - 1);
    s.beta_[eta] = beta_start + (beta_end - beta_start) * frac;
    s.alpha_[eta] = 1.0 - s.beta_[eta];
    s.alpha_bar_[eta] = s.alpha_bar_[eta - 1] * s.alpha_[eta];
  }
  return s;
}

void NoiseSchedule::CheckStep(int eta, int lowest) const {
  if (eta < lowest || eta > steps()) {
    throw ConfigError("diffusion step " + std::to_string(eta) +
                      " outside [" + std::to_string(lowest) + ", " +
                      std::to_string(steps()) + "]");
  }
}

double NoiseSchedule::beta(int eta) const {
  CheckStep(eta, 1);
  return beta_[eta];
}

double NoiseSchedule::alpha(int eta) const {
  CheckStep(eta, 1);
  return alpha_[eta];
}

double NoiseSchedule::alpha_bar(int eta) const {
  CheckStep(eta, 0);
  return alpha_bar_[eta];
}

Array ForwardNoise(const Array& y0, int eta, const Array& eps,
                   const NoiseSchedule& schedule) {
  CheckSameShape(y0, eps, "ForwardNoise");
  const double ab = schedule.alpha_bar(eta);
  if (eta < 1) throw ConfigError("ForwardNoise needs eta >= 1");
  return Combine(std::sqrt(ab), y0, std::sqrt(1.0 - ab), eps);
}

Array DdpmStep(const Array& y, int eta, const Array& eps_hat, const Array& z,
               const NoiseSchedule& schedule) {
  CheckSameShape(y, eps_hat, "DdpmStep");
  CheckSameShape(y, z, "DdpmStep");
  const double beta = schedule.beta(eta);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(eta));
  const double eps_coef = beta / std::sqrt(1.0 - schedule.alpha_bar(eta));
  const double sigma = std::sqrt(beta);
  Array out(y.shape());
  auto o = out.mutable_values();
  auto yv = y.values();
  auto ev = eps_hat.values();
  auto zv = z.values();
  for (size_t i = 0; i < o.size(); ++i) {
    o[i] = inv_sqrt_alpha * (yv[i] - eps_coef * ev[i]) + sigma * zv[i];
  }
  return out;
}

Array DdimStep(const Array& y, int eta, int eta_prev, const Array& eps_hat,
               const NoiseSchedule& schedule) {
  CheckSameShape(y, eps_hat, "DdimStep");
  if (eta_prev < 0 || eta_prev >= eta) {
    throw ConfigError("DDIM needs 0 <= eta_prev < eta, got " +
                      std::to_string(eta_prev) + " and " +
                      std::to_string(eta));
  }
  const double ab = schedule.alpha_bar(eta);
  const double ab_prev = schedule.alpha_bar(eta_prev);
  const double sqrt_one_minus = std::sqrt(1.0 - ab);
  const double scale = std::sqrt(ab_prev) / std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab_prev);
  Array out(y.shape());
  auto o = out.mutable_values();
  auto yv = y.values();
  auto ev = eps_hat.values();
  for (size_t i = 0; i < o.size(); ++i) {
    o[i] = scale * (yv[i] - sqrt_one_minus * ev[i]) + noise * ev[i];
  }
  return out;
}

double DiffusionLoss(const Array& eps, const Array& eps_hat) {
  CheckSameShape(eps, eps_hat, "DiffusionLoss");
  double sum = 0.0;
  auto a = eps.values();
  auto b = eps_hat.values();
  for (size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

std::string MethodName(Method method) {
  return method == Method::kDdpm ? "ddpm" : "ddim";
}

Method ParseMethod(const std::string& name) {
  if (name == "ddpm") return Method::kDdpm;
  if (name == "ddim") return Method::kDdim;
  throw ConfigError("unknown sampler '" + name + "', expected ddpm or ddim");
}

void ValidateSamplerConfig(const SamplerConfig& config,
                           const NoiseSchedule& schedule) {
  if (config.num_samples < 1) throw ConfigError("sample count must be >= 1");
  if (config.threads < 1) throw ConfigError("thread count must be >= 1");
  if (config.method == Method::kDdim) {
    if (config.skip < 1) throw ConfigError("DDIM skip must be >= 1");
    if (schedule.steps() % config.skip != 0) {
      throw ConfigError("DDIM skip " + std::to_string(config.skip) +
                        " does not divide " +
                        std::to_string(schedule.steps()) + " steps");
    }
  }
}

int DenoiserCalls(const SamplerConfig& config, const NoiseSchedule& schedule) {
  return config.method == Method::kDdim ? schedule.steps() / config.skip
                                        : schedule.steps();
}

std::mt19937_64 ChainRng(uint64_t seed, int index) {
  std::seed_seq seq{static_cast<uint32_t>(seed),
                    static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(index), 0x5eedu};
  return std::mt19937_64(seq);
}

SampleResult Sample(const BatchDenoiser& denoiser,
                    const tensor::Shape& sample_shape,
                    const SamplerConfig& config,
                    const NoiseSchedule& schedule) {
  ValidateSamplerConfig(config, schedule);
  const auto start = Clock::now();
  const int m = config.num_samples;
  std::vector<Chain> chains(m);
  for (int i = 0; i < m; ++i) {
    chains[i].index = i;
    chains[i].rng = ChainRng(config.seed, i);
    chains[i].y = StandardNormal(sample_shape, chains[i].rng);
  }

  const int workers = std::min(config.threads, m);
  std::vector<std::vector<Chain>> parts(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = m * w / workers;
    const int hi = m * (w + 1) / workers;
    parts[w].assign(std::make_move_iterator(chains.begin() + lo),
                    std::make_move_iterator(chains.begin() + hi));
  }
  std::vector<double> part_seconds(workers, 0.0);
  auto run = [&](int w) {
    const auto t0 = Clock::now();
    RunChains(denoiser, sample_shape, config, schedule, parts[w]);
    part_seconds[w] =
        std::chrono::duration<double>(Clock::now() - t0).count();
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SampleResult result;
  result.denoiser_calls_per_sample = DenoiserCalls(config, schedule);
  for (int w = 0; w < workers; ++w) {
    for (Chain& c : parts[w]) {
      if (!c.alive) {
        ++result.failed;
        continue;
      }
      result.samples.push_back(std::move(c.y));
      result.sample_index.push_back(c.index);
      result.chain_seconds.push_back(part_seconds[w]);
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

}  // namespace trajdiff::diffusion
