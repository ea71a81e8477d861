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

#include <atomic>
#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "trajdiff/errors.h"

namespace trajdiff::diffusion {
namespace {

using tensor::Shape;

Array RandomArray(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Array a(shape);
  for (double& v : a.mutable_values()) v = n(rng);
  return a;
}

double MaxAbsDiff(const Array& a, const Array& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Denoiser that knows the clean sample and returns the exact noise implied by
// the current state: eps = (y - sqrt(ab) y0) / sqrt(1 - ab).
BatchDenoiser OracleDenoiser(const Array& y0, const NoiseSchedule& s) {
  return [y0, &s](const Array& y, int eta) {
    const double ab = s.alpha_bar(eta);
    Array out(y.shape());
    for (size_t i = 0; i < y.size(); ++i) {
      out[i] = (y[i] - std::sqrt(ab) * y0[i % y0.size()]) / std::sqrt(1 - ab);
    }
    return out;
  };
}

BatchDenoiser ZeroDenoiser() {
  return [](const Array& y, int) { return Array(y.shape()); };
}

TEST(ScheduleTest, SingleStep) {
  const NoiseSchedule s = NoiseSchedule::Linear(1, 0.1, 0.2);
  EXPECT_EQ(s.steps(), 1);
  EXPECT_NEAR(s.alpha(1), 0.9, 1e-15);
  EXPECT_NEAR(s.alpha_bar(1), 0.9, 1e-15);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
}

TEST(ScheduleTest, DefaultHasTwoHundredSteps) {
  EXPECT_EQ(NoiseSchedule::Linear().steps(), 200);
}

TEST(ScheduleTest, AlphaBarMatchesDirectProduct) {
  const NoiseSchedule s = NoiseSchedule::Linear(200, 1e-4, 0.05);
  double product = 1.0;
  for (int eta = 1; eta <= 200; ++eta) {
    const double beta = 1e-4 + (0.05 - 1e-4) * (eta - 1) / 199.0;
    product *= 1.0 - beta;
    EXPECT_NEAR(s.alpha_bar(eta), product, 1e-12);
  }
  EXPECT_NEAR(s.beta(1), 1e-4, 1e-15);
  EXPECT_NEAR(s.beta(200), 0.05, 1e-15);
}

TEST(ScheduleTest, Monotone) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  for (int eta = 2; eta <= s.steps(); ++eta) {
    EXPECT_GT(s.beta(eta), s.beta(eta - 1));
    EXPECT_LT(s.alpha_bar(eta), s.alpha_bar(eta - 1));
    EXPECT_GT(s.alpha_bar(eta), 0.0);
  }
}

TEST(ScheduleTest, RejectsBadRange) {
  EXPECT_THROW(NoiseSchedule::Linear(0, 1e-4, 0.05), ConfigError);
  EXPECT_THROW(NoiseSchedule::Linear(10, 0.05, 1e-4), ConfigError);
  EXPECT_THROW(NoiseSchedule::Linear(10, 0.0, 0.5), ConfigError);
  EXPECT_THROW(NoiseSchedule::Linear(10, 0.1, 1.0), ConfigError);
  EXPECT_THROW(NoiseSchedule::Linear(10).alpha_bar(11), ConfigError);
}

TEST(ForwardNoiseTest, ZeroNoiseScales) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  std::mt19937_64 rng(1);
  const Array y0 = RandomArray({12, 2}, rng);
  const Array y = ForwardNoise(y0, 50, Array({12, 2}), s);
  for (size_t i = 0; i < y.size(); ++i) {
    EXPECT_NEAR(y[i], std::sqrt(s.alpha_bar(50)) * y0[i], 1e-15);
  }
}

TEST(ForwardNoiseTest, NearlyPureNoiseAtTheEnd) {
  const NoiseSchedule s = NoiseSchedule::Linear(1000, 0.01, 0.5);
  std::mt19937_64 rng(2);
  const Array y0 = RandomArray({12, 2}, rng);
  const Array eps = RandomArray({12, 2}, rng);
  EXPECT_LT(MaxAbsDiff(ForwardNoise(y0, 1000, eps, s), eps), 1e-9);
}

TEST(ForwardNoiseTest, TwoSingleStepsComposeToClosedForm) {
  const NoiseSchedule s = NoiseSchedule::Linear(2, 0.1, 0.3);
  const double a1 = 0.9, a2 = 0.7;
  // y1 = sqrt(a1) y0 + sqrt(1-a1) e1; y2 = sqrt(a2) y1 + sqrt(1-a2) e2.
  const double mean_coef = std::sqrt(a2) * std::sqrt(a1);
  const double variance = a2 * (1 - a1) + (1 - a2);
  const Array one = Array::Full({1}, 1.0);
  const Array zero({1});
  EXPECT_NEAR(ForwardNoise(one, 2, zero, s)[0], mean_coef, 1e-12);
  const double noise_coef = ForwardNoise(zero, 2, one, s)[0];
  EXPECT_NEAR(noise_coef * noise_coef, variance, 1e-12);
  EXPECT_NEAR(variance, 1 - a1 * a2, 1e-12);
}

TEST(ForwardNoiseTest, ShapeMismatch) {
  EXPECT_THROW(ForwardNoise(Array({12, 2}), 1, Array({2, 12}),
                            NoiseSchedule::Linear()),
               ShapeError);
}

TEST(DdpmStepTest, HandEvaluated) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  const Array y({2}, {0.7, -1.2});
  const Array e({2}, {0.3, 0.1});
  const Array z({2}, {-0.5, 2.0});
  const int eta = 37;
  const Array out = DdpmStep(y, eta, e, z, s);
  const double a = s.alpha(eta), b = s.beta(eta), ab = s.alpha_bar(eta);
  for (int i = 0; i < 2; ++i) {
    const double want =
        (y[i] - b / std::sqrt(1 - ab) * e[i]) / std::sqrt(a) + std::sqrt(b) * z[i];
    EXPECT_NEAR(out[i], want, 1e-12);
  }
}

TEST(DdpmStepTest, NearIdentityForTinyBeta) {
  const NoiseSchedule s = NoiseSchedule::Linear(2, 1e-15, 2e-15);
  const Array y({2}, {0.7, -1.2});
  const Array out = DdpmStep(y, 1, Array({2}), Array({2}), s);
  EXPECT_LT(MaxAbsDiff(out, y), 1e-12);
}

TEST(DdimStepTest, ExactInversionFromAnyStep) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  std::mt19937_64 rng(3);
  for (int eta = 1; eta <= s.steps(); ++eta) {
    const Array y0 = RandomArray({12, 2}, rng);
    const Array eps = RandomArray({12, 2}, rng);
    const Array y = ForwardNoise(y0, eta, eps, s);
    EXPECT_LT(MaxAbsDiff(DdimStep(y, eta, 0, eps, s), y0), 1e-9) << eta;
  }
}

TEST(DdimStepTest, RejectsNonDecreasingStep) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  EXPECT_THROW(DdimStep(Array({2}), 5, 5, Array({2}), s), ConfigError);
}

TEST(SamplerConfigTest, TenStepDdimFromSkipTwenty) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  SamplerConfig c;
  c.method = Method::kDdim;
  c.skip = 20;
  EXPECT_EQ(DenoiserCalls(c, s), 10);
  c.skip = 7;
  EXPECT_THROW(ValidateSamplerConfig(c, s), ConfigError);
  c.skip = 20;
  c.num_samples = 0;
  EXPECT_THROW(ValidateSamplerConfig(c, s), ConfigError);
}

TEST(SampleTest, StepCountContract) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  for (const auto& [method, skip] :
       std::vector<std::pair<Method, int>>{{Method::kDdpm, 1},
                                           {Method::kDdim, 1},
                                           {Method::kDdim, 20},
                                           {Method::kDdim, 50}}) {
    std::atomic<int> calls{0};
    BatchDenoiser d = [&calls](const Array& y, int) {
      ++calls;
      return Array(y.shape());
    };
    SamplerConfig c;
    c.method = method;
    c.skip = skip;
    c.num_samples = 5;
    const SampleResult r = Sample(d, {12, 2}, c, s);
    const int expected = method == Method::kDdpm ? 200 : 200 / skip;
    EXPECT_EQ(calls.load(), expected);
    EXPECT_EQ(r.denoiser_calls_per_sample, expected);
    EXPECT_EQ(r.samples.size(), 5u);
  }
}

TEST(SampleTest, PerfectDenoiserConverges) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  std::mt19937_64 rng(4);
  const Array y0 = RandomArray({12, 2}, rng);
  for (const Method method : {Method::kDdpm, Method::kDdim}) {
    SamplerConfig c;
    c.method = method;
    c.skip = 20;
    c.num_samples = 3;
    c.ddpm_zero_noise = true;
    const SampleResult r = Sample(OracleDenoiser(y0, s), {12, 2}, c, s);
    ASSERT_EQ(r.samples.size(), 3u);
    for (const Array& y : r.samples) EXPECT_LT(MaxAbsDiff(y, y0), 1e-6);
  }
}

TEST(SampleTest, StochasticDdpmWithPerfectDenoiserEndsAtCleanSample) {
  // The last step uses z = 0 and the oracle cancels all remaining noise.
  const NoiseSchedule s = NoiseSchedule::Linear();
  std::mt19937_64 rng(5);
  const Array y0 = RandomArray({12, 2}, rng);
  SamplerConfig c;
  c.method = Method::kDdpm;
  c.num_samples = 2;
  const SampleResult r = Sample(OracleDenoiser(y0, s), {12, 2}, c, s);
  for (const Array& y : r.samples) EXPECT_LT(MaxAbsDiff(y, y0), 1e-6);
}

TEST(SampleTest, DdimUnitSkipMatchesNoiselessDdpm) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  SamplerConfig ddim;
  ddim.method = Method::kDdim;
  ddim.skip = 1;
  ddim.num_samples = 4;
  ddim.seed = 9;
  SamplerConfig ddpm = ddim;
  ddpm.method = Method::kDdpm;
  ddpm.ddpm_zero_noise = true;
  const SampleResult a = Sample(ZeroDenoiser(), {12, 2}, ddim, s);
  const SampleResult b = Sample(ZeroDenoiser(), {12, 2}, ddpm, s);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    // Relative, since the zero denoiser inflates the state by 1/sqrt(ab).
    const double scale = std::max(1.0, MaxAbsDiff(a.samples[i], Array({12, 2})));
    EXPECT_LT(MaxAbsDiff(a.samples[i], b.samples[i]) / scale, 1e-6);
  }
}

TEST(SampleTest, DeterministicAcrossRunsAndThreads) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  BatchDenoiser d = [](const Array& y, int eta) {
    Array out(y.shape());
    for (size_t i = 0; i < y.size(); ++i) out[i] = 0.1 * y[i] + 1e-3 * eta;
    return out;
  };
  SamplerConfig c;
  c.method = Method::kDdpm;
  c.num_samples = 7;
  c.seed = 42;
  const SampleResult a = Sample(d, {12, 2}, c, s);
  const SampleResult b = Sample(d, {12, 2}, c, s);
  c.threads = 3;
  const SampleResult t = Sample(d, {12, 2}, c, s);
  ASSERT_EQ(a.samples.size(), 7u);
  for (size_t i = 0; i < 7; ++i) {
    EXPECT_TRUE(a.samples[i] == b.samples[i]);
    EXPECT_TRUE(a.samples[i] == t.samples[i]);
  }
  c.seed = 43;
  EXPECT_FALSE(Sample(d, {12, 2}, c, s).samples[0] == a.samples[0]);
}

TEST(SampleTest, SingleSampleZeroDenoiserReproducible) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  SamplerConfig c;
  c.num_samples = 1;
  c.seed = 11;
  const SampleResult a = Sample(ZeroDenoiser(), {12, 2}, c, s);
  const SampleResult b = Sample(ZeroDenoiser(), {12, 2}, c, s);
  EXPECT_TRUE(a.samples[0] == b.samples[0]);
  // With zero noise prediction DDIM just rescales the initial draw.
  std::mt19937_64 rng = ChainRng(11, 0);
  std::normal_distribution<double> n(0.0, 1.0);
  const double first = n(rng);
  EXPECT_NEAR(a.samples[0][0], first / std::sqrt(s.alpha_bar(200)),
              1e-9 * std::abs(first) / std::sqrt(s.alpha_bar(200)));
}

int CountLargeInitialDraws(uint64_t seed, int m) {
  int count = 0;
  for (int i = 0; i < m; ++i) {
    std::mt19937_64 rng = ChainRng(seed, i);
    std::normal_distribution<double> n(0.0, 1.0);
    if (std::abs(n(rng)) > 2.0) ++count;
  }
  return count;
}

TEST(SampleTest, NonFinitePredictionsAreDropped) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  const int h = s.steps();
  BatchDenoiser d = [h](const Array& y, int eta) {
    Array out(y.shape());
    const int64_t row = y.size() / y.dim(0);
    for (int64_t b = 0; b < y.dim(0); ++b) {
      if (eta == h && std::abs(y[b * row]) > 2.0) out[b * row] = NAN;
    }
    return out;
  };
  SamplerConfig c;
  c.num_samples = 200;
  c.seed = 5;
  const SampleResult r = Sample(d, {12, 2}, c, s);
  const int expected = CountLargeInitialDraws(5, 200);
  ASSERT_GT(expected, 0);
  EXPECT_EQ(r.failed, expected);
  EXPECT_EQ(r.samples.size(), static_cast<size_t>(200 - expected));
  EXPECT_EQ(r.sample_index.size(), r.samples.size());
}

TEST(SampleTest, ThrowingBatchFallsBackPerSample) {
  const NoiseSchedule s = NoiseSchedule::Linear();
  const int h = s.steps();
  BatchDenoiser d = [h](const Array& y, int eta) {
    const int64_t row = y.size() / y.dim(0);
    for (int64_t b = 0; b < y.dim(0); ++b) {
      if (eta == h && std::abs(y[b * row]) > 2.0) {
        throw NumericError("overflow");
      }
    }
    return Array(y.shape());
  };
  SamplerConfig c;
  c.num_samples = 200;
  c.seed = 6;
  const SampleResult r = Sample(d, {12, 2}, c, s);
  EXPECT_EQ(r.failed, CountLargeInitialDraws(6, 200));
}

TEST(DiffusionLossTest, Values) {
  std::mt19937_64 rng(7);
  const Array a = RandomArray({3, 12, 2}, rng);
  EXPECT_EQ(DiffusionLoss(a, a), 0.0);
  Array plus_one = a;
  for (double& v : plus_one.mutable_values()) v += 1.0;
  EXPECT_NEAR(DiffusionLoss(a, plus_one), 1.0, 1e-12);
  const Array b = RandomArray({3, 12, 2}, rng);
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += std::pow(a[i] - b[i], 2);
  EXPECT_NEAR(DiffusionLoss(a, b), sum / 72.0, 1e-12);
}

TEST(MethodTest, Parse) {
  EXPECT_EQ(ParseMethod("ddpm"), Method::kDdpm);
  EXPECT_EQ(MethodName(ParseMethod("ddim")), "ddim");
  EXPECT_THROW(ParseMethod("euler"), ConfigError);
}

}  // namespace
}  // namespace trajdiff::diffusion
