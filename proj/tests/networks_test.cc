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

#include <cmath>
#include <numeric>
#include <random>

#include "gtest/gtest.h"
#include "trajdiff/errors.h"
#include "trajdiff/networks/layers.h"
#include "trajdiff/networks/models.h"
#include "trajdiff/tensor/gradient_check.h"
#include "trajdiff/tensor/ops.h"

namespace trajdiff::networks {
namespace {

using geometry::Point;
using geometry::Trajectory;
using tensor::Shape;

EncoderConfig SmallEncoder(int64_t lanes = 0) {
  EncoderConfig c;
  c.history_steps = 4;
  c.width = 8;
  c.heads = 2;
  c.temporal_layers = 1;
  c.ffn_width = 16;
  c.lane_features = lanes;
  return c;
}

DenoiserConfig SmallDenoiser() {
  DenoiserConfig c;
  c.future_steps = 3;
  c.width = 8;
  c.heads = 2;
  c.layers = 2;
  c.ffn_width = 16;
  c.context_width = 8;
  c.step_embedding = 6;
  return c;
}

ScorerConfig SmallScorer() {
  ScorerConfig c;
  c.future_steps = 3;
  c.context_width = 8;
  c.heads = 2;
  c.head_width = 4;
  c.width = 8;
  return c;
}

Array RandomArray(const Shape& shape, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Array a(shape);
  for (double& v : a.mutable_values()) v = n(rng);
  return a;
}

Trajectory RandomHistory(std::mt19937_64& rng, int steps) {
  std::normal_distribution<double> n(0.0, 0.5);
  Trajectory t{Point::Zero()};
  for (int k = 1; k < steps; ++k) t.push_back(Point(0.4 + n(rng), n(rng)));
  return t;
}

double MaxAbsDiff(const Array& a, const Array& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Row i of a [N, W] array.
std::vector<double> RowOf(const Array& a, int64_t i) {
  const int64_t w = a.dim(-1);
  return std::vector<double>(a.data() + i * w, a.data() + (i + 1) * w);
}

Array Encode(const Encoder& e, const ParameterStore& store,
             const EncoderInput& in) {
  Tape tape(false);
  ForwardContext ctx{tape, store};
  return e.Encode(ctx, in).value();
}

class EncoderTest : public ::testing::Test {
 protected:
  void SetUp() override { encoder_.Register(store_, rng_); }
  std::mt19937_64 rng_{1};
  Encoder encoder_{SmallEncoder()};
  ParameterStore store_;
};

TEST_F(EncoderTest, SingleAgentShape) {
  const Array c = Encode(encoder_, store_, {{RandomHistory(rng_, 4)}});
  EXPECT_EQ(c.shape(), (Shape{1, 8}));
  EXPECT_TRUE(c.AllFinite());
}

TEST_F(EncoderTest, NoAgentsRejected) {
  EXPECT_THROW(Encode(encoder_, store_, {}), ShapeError);
}

TEST_F(EncoderTest, WrongHistoryLengthRejected) {
  EXPECT_THROW(Encode(encoder_, store_, {{RandomHistory(rng_, 5)}}),
               ShapeError);
}

TEST_F(EncoderTest, DuplicateAgentsGetIdenticalContext) {
  const Trajectory a = RandomHistory(rng_, 4);
  const Trajectory b = RandomHistory(rng_, 4);
  const Array c = Encode(encoder_, store_, {{a, b, a}});
  EXPECT_EQ(RowOf(c, 0), RowOf(c, 2));
}

TEST_F(EncoderTest, PermutationEquivariant) {
  EncoderInput in;
  for (int i = 0; i < 5; ++i) in.histories.push_back(RandomHistory(rng_, 4));
  const std::vector<int> perm{3, 0, 4, 1, 2};
  EncoderInput permuted;
  for (int p : perm) permuted.histories.push_back(in.histories[p]);
  const Array c = Encode(encoder_, store_, in);
  const Array cp = Encode(encoder_, store_, permuted);
  for (int i = 0; i < 5; ++i) {
    const std::vector<double> want = RowOf(c, perm[i]);
    const std::vector<double> got = RowOf(cp, i);
    for (size_t k = 0; k < want.size(); ++k) {
      EXPECT_NEAR(got[k], want[k], 1e-9);
    }
  }
}

TEST_F(EncoderTest, ScenesDoNotInteract) {
  EncoderInput in;
  for (int i = 0; i < 4; ++i) in.histories.push_back(RandomHistory(rng_, 4));
  in.scene = {0, 0, 1, 1};
  const Array base = Encode(encoder_, store_, in);
  in.histories[3] = RandomHistory(rng_, 4);
  const Array changed = Encode(encoder_, store_, in);
  for (int k = 0; k < 16; ++k) EXPECT_NEAR(base[k], changed[k], 1e-12);
  EXPECT_NE(RowOf(base, 2), RowOf(changed, 2));
  // Batched scenes match separate evaluation.
  EncoderInput first{{in.histories[0], in.histories[1]}};
  const Array alone = Encode(encoder_, store_, first);
  for (int k = 0; k < 8; ++k) EXPECT_NEAR(alone[k], changed[k], 1e-12);
}

TEST_F(EncoderTest, NeighboursInfluenceContext) {
  const Trajectory a = RandomHistory(rng_, 4);
  const Array alone = Encode(encoder_, store_, {{a}});
  const Array crowd = Encode(encoder_, store_, {{a, RandomHistory(rng_, 4)}});
  EXPECT_GT(MaxAbsDiff(alone, Array({1, 8}, RowOf(crowd, 0))), 1e-6);
}

TEST(EncoderLaneTest, LanesChangeContextAndEmptySceneWorks) {
  std::mt19937_64 rng(2);
  const Encoder encoder(SmallEncoder(3));
  ParameterStore store;
  encoder.Register(store, rng);
  EncoderInput in;
  in.histories = {RandomHistory(rng, 4), RandomHistory(rng, 4)};
  in.scene = {0, 1};
  const Array without = Encode(encoder, store, in);
  in.lanes = {{{1.0, 0.0, 2.0}, {0.5, 0.5, 0.5}}};  // scene 1 has none
  const Array with = Encode(encoder, store, in);
  EXPECT_TRUE(with.AllFinite());
  EXPECT_GT(MaxAbsDiff(Array({1, 8}, RowOf(with, 0)),
                       Array({1, 8}, RowOf(without, 0))),
            1e-6);
  EXPECT_LT(MaxAbsDiff(Array({1, 8}, RowOf(with, 1)),
                       Array({1, 8}, RowOf(without, 1))),
            1e-12);
  in.lanes = {{{1.0, 2.0}}};
  EXPECT_THROW(Encode(encoder, store, in), ShapeError);
}

class DenoiserTest : public ::testing::Test {
 protected:
  void SetUp() override { denoiser_.Register(store_, rng_); }
  Array Predict(const Array& y, const std::vector<int>& steps,
                const Array& c) {
    Tape tape(false);
    ForwardContext ctx{tape, store_};
    return denoiser_
        .Predict(ctx, tape.Constant(y), steps, tape.Constant(c))
        .value();
  }
  std::mt19937_64 rng_{3};
  Denoiser denoiser_{SmallDenoiser()};
  ParameterStore store_;
};

TEST_F(DenoiserTest, OutputMatchesInputShape) {
  const Array y = RandomArray({5, 3, 2}, rng_);
  const Array out = Predict(y, {1, 2, 3, 4, 5}, RandomArray({5, 8}, rng_));
  EXPECT_EQ(out.shape(), y.shape());
  EXPECT_TRUE(out.AllFinite());
}

TEST_F(DenoiserTest, StepEmbeddingDistinguishesSteps) {
  const Array y = RandomArray({1, 3, 2}, rng_);
  const Array c = RandomArray({1, 8}, rng_);
  EXPECT_GT(MaxAbsDiff(Predict(y, {1}, c), Predict(y, {200}, c)), 1e-6);
}

TEST_F(DenoiserTest, ShapeMismatchRejected) {
  EXPECT_THROW(Predict(RandomArray({2, 4, 2}, rng_), {1, 1},
                       RandomArray({2, 8}, rng_)),
               ShapeError);
  EXPECT_THROW(Predict(RandomArray({2, 3, 2}, rng_), {1},
                       RandomArray({2, 8}, rng_)),
               ShapeError);
  EXPECT_THROW(Predict(RandomArray({2, 3, 2}, rng_), {1, 1},
                       RandomArray({2, 7}, rng_)),
               ShapeError);
}

TEST_F(DenoiserTest, EvalModeIsDeterministic) {
  const Array y = RandomArray({2, 3, 2}, rng_);
  const Array c = RandomArray({2, 8}, rng_);
  EXPECT_TRUE(Predict(y, {4, 9}, c) == Predict(y, {4, 9}, c));
}

TEST_F(DenoiserTest, DropoutOnlyInTraining) {
  const Array y = RandomArray({2, 3, 2}, rng_);
  const Array c = RandomArray({2, 8}, rng_);
  Tape tape;
  std::mt19937_64 drop(5);
  ForwardContext ctx{tape, store_, true, &drop};
  const Array trained =
      denoiser_.Predict(ctx, tape.Constant(y), {4, 9}, tape.Constant(c))
          .value();
  EXPECT_GT(MaxAbsDiff(trained, Predict(y, {4, 9}, c)), 1e-9);
}

TEST(GradientTest, DiffusionLossThroughEncoderAndDenoiser) {
  std::mt19937_64 rng(6);
  const Encoder encoder(SmallEncoder(2));
  const Denoiser denoiser(SmallDenoiser());
  ParameterStore store;
  encoder.Register(store, rng);
  denoiser.Register(store, rng);
  EncoderInput in;
  in.histories = {RandomHistory(rng, 4), RandomHistory(rng, 4),
                  RandomHistory(rng, 4)};
  in.scene = {0, 0, 1};
  in.lanes = {{{0.3, -1.0}}, {{1.0, 1.0}, {2.0, 0.0}}};
  const Array noisy = RandomArray({2, 3, 2}, rng);
  const Array eps = RandomArray({2, 3, 2}, rng);
  auto closure = [&](Tape& tape, const ParameterStore& s) {
    ForwardContext ctx{tape, s};
    const Var c = tensor::GatherRows(encoder.Encode(ctx, in), {0, 2});
    const Var pred = denoiser.Predict(ctx, tape.Constant(noisy), {3, 150}, c);
    return tensor::Mse(pred, tape.Constant(eps));
  };
  tensor::GradientCheckOptions options;
  options.max_entries_per_param = 12;
  const tensor::GradientCheckReport r =
      tensor::GradientCheck(closure, store, options);
  EXPECT_TRUE(r.passed) << r.worst_parameter << " " << r.max_relative_error;
  EXPECT_LT(r.max_relative_error, 1e-4);
}

class ScorerTest : public ::testing::Test {
 protected:
  void SetUp() override { scorer_.Register(store_, rng_); }
  Array Score(const Array& cand, const Array& c) {
    Tape tape(false);
    ForwardContext ctx{tape, store_};
    return scorer_.Score(ctx, tape.Constant(cand), tape.Constant(c)).value();
  }
  std::mt19937_64 rng_{7};
  Scorer scorer_{SmallScorer()};
  ParameterStore store_;
};

TEST_F(ScorerTest, SingleCandidateSoftmaxIsOne) {
  Tape tape(false);
  ForwardContext ctx{tape, store_};
  const Var s = scorer_.Score(ctx, tape.Constant(RandomArray({1, 1, 3, 2}, rng_)),
                              tape.Constant(RandomArray({1, 8}, rng_)));
  EXPECT_EQ(s.shape(), (Shape{1, 1}));
  EXPECT_EQ(tensor::Softmax(s).value()[0], 1.0);
}

TEST_F(ScorerTest, NoCandidatesRejected) {
  EXPECT_THROW(Score(Array({1, 0, 3, 2}), RandomArray({1, 8}, rng_)),
               ShapeError);
}

TEST_F(ScorerTest, IdenticalCandidatesScoreEqually) {
  Array cand = RandomArray({1, 4, 3, 2}, rng_);
  for (int k = 0; k < 6; ++k) cand[3 * 6 + k] = cand[1 * 6 + k];
  const Array s = Score(cand, RandomArray({1, 8}, rng_));
  EXPECT_NEAR(s[1], s[3], 1e-9);
}

TEST_F(ScorerTest, PermutationEquivariant) {
  const Array cand = RandomArray({2, 5, 3, 2}, rng_);
  const Array c = RandomArray({2, 8}, rng_);
  const std::vector<int> perm{4, 2, 0, 3, 1};
  Array permuted(cand.shape());
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < 5; ++i) {
      for (int k = 0; k < 6; ++k) {
        permuted[(b * 5 + i) * 6 + k] = cand[(b * 5 + perm[i]) * 6 + k];
      }
    }
  }
  const Array s = Score(cand, c);
  const Array sp = Score(permuted, c);
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < 5; ++i) {
      EXPECT_NEAR(sp[b * 5 + i], s[b * 5 + perm[i]], 1e-9);
    }
  }
  // Softmax over candidates sums to one.
  Tape tape(false);
  const Array p = tensor::Softmax(tape.Constant(s)).value();
  for (int b = 0; b < 2; ++b) {
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) sum += p[b * 5 + i];
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST_F(ScorerTest, ContextChangesScores) {
  const Array cand = RandomArray({1, 3, 3, 2}, rng_);
  EXPECT_GT(MaxAbsDiff(Score(cand, RandomArray({1, 8}, rng_)),
                       Score(cand, RandomArray({1, 8}, rng_))),
            1e-9);
}

TEST_F(ScorerTest, ParameterShapesFollowTheLayout) {
  // Row width T_f + d_c, h * d_k attention width, d -> 1 down-projection.
  EXPECT_EQ(store_.Get("scorer.attention.query.weight").shape(),
            (Shape{3 + 8, 2 * 4}));
  EXPECT_EQ(store_.Get("scorer.attention.output.weight").shape(),
            (Shape{2 * 4, 8}));
  EXPECT_EQ(store_.Get("scorer.down.weight").shape(), (Shape{8, 1}));
  EXPECT_FALSE(store_.Contains("scorer.attention.query.bias"));
}

TEST(GradientTest, SoftCrossEntropyThroughScorer) {
  std::mt19937_64 rng(8);
  const Scorer scorer(SmallScorer());
  ParameterStore store;
  scorer.Register(store, rng);
  const Array cand = RandomArray({2, 4, 3, 2}, rng);
  const Array c = RandomArray({2, 8}, rng);
  Tape target_tape(false);
  const Array target =
      tensor::Softmax(target_tape.Constant(RandomArray({2, 4}, rng))).value();
  auto closure = [&](Tape& tape, const ParameterStore& s) {
    ForwardContext ctx{tape, s};
    return tensor::SoftCrossEntropy(
        scorer.Score(ctx, tape.Constant(cand), tape.Constant(c)),
        tape.Constant(target));
  };
  const tensor::GradientCheckReport r = tensor::GradientCheck(closure, store);
  EXPECT_TRUE(r.passed) << r.worst_parameter << " " << r.max_relative_error;
}

TEST(ConfigTest, InvalidConfigsRejected) {
  EncoderConfig e = SmallEncoder();
  e.history_steps = 1;
  EXPECT_THROW(Encoder{e}, ConfigError);
  DenoiserConfig d = SmallDenoiser();
  d.step_embedding = 5;
  EXPECT_THROW(Denoiser{d}, ConfigError);
  ScorerConfig s = SmallScorer();
  s.dropout = 1.0;
  EXPECT_THROW(Scorer{s}, ConfigError);
  d = SmallDenoiser();
  d.heads = 3;
  std::mt19937_64 rng(0);
  ParameterStore store;
  EXPECT_THROW(Denoiser(d).Register(store, rng), ConfigError);
}

TEST(SinusoidalTest, Values) {
  const Array e = SinusoidalEmbedding({0, 3}, 4);
  EXPECT_EQ(e[0], 0.0);
  EXPECT_EQ(e[1], 1.0);
  EXPECT_NEAR(e[4], std::sin(3.0), 1e-15);
  EXPECT_NEAR(e[6], std::sin(3.0 / 100.0), 1e-15);
}

}  // namespace
}  // namespace trajdiff::networks
