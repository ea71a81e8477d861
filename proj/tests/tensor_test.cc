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
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "trajdiff/errors.h"
#include "trajdiff/tensor/adamw.h"
#include "trajdiff/tensor/array.h"
#include "trajdiff/tensor/checkpoint.h"
#include "trajdiff/tensor/gradient_check.h"
#include "trajdiff/tensor/ops.h"
#include "trajdiff/tensor/parameter_store.h"
#include "trajdiff/tensor/tape.h"

namespace trajdiff::tensor {
namespace {

Array RandomArray(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Array a(std::move(shape));
  for (double& v : a.mutable_values()) v = n(rng);
  return a;
}

// Independent finite-difference oracle over a differentiable input.
Array NumericGradient(const std::function<double(const Array&)>& f, Array x,
                      double h = 1e-5) {
  Array g(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double plus = f(x);
    x[i] = saved - h;
    const double minus = f(x);
    x[i] = saved;
    g[i] = (plus - minus) / (2 * h);
  }
  return g;
}

double MaxRelError(const Array& a, const Array& b, double floor = 1e-6) {
  double worst = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / d);
  }
  return worst;
}

// Checks the tape gradient of sum(w * f(x)) w.r.t. x against finite
// differences, with a fixed random weighting w to exercise every output.
void ExpectPrimitiveGradient(const std::function<Var(const Var&)>& f,
                             const Array& x0, double tolerance) {
  std::mt19937_64 rng(7);
  Array probe_shape_source;
  {
    Tape t(false);
    probe_shape_source = f(t.Constant(x0)).value();
  }
  const Array weights = RandomArray(probe_shape_source.shape(), rng);
  auto loss_of = [&](Tape& t, const Var& x) {
    return Sum(Mul(f(x), t.Constant(weights)));
  };
  Tape tape;
  Var x = tape.Input(x0);
  tape.Backward(loss_of(tape, x));
  const Array analytic = tape.Grad(x);
  const Array numeric = NumericGradient(
      [&](const Array& xv) {
        Tape t(false);
        return loss_of(t, t.Constant(xv)).value()[0];
      },
      x0);
  EXPECT_LT(MaxRelError(analytic, numeric), tolerance);
}

TEST(ArrayTest, ShapeInvariant) {
  EXPECT_THROW(Array({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Array({0, 3}), ShapeError);
  Array a({2, 3});
  EXPECT_EQ(a.size(), 6);
  EXPECT_EQ(a.dim(-1), 3);
  EXPECT_EQ(Array::Scalar(2.0).size(), 1);
}

TEST(PrimitiveTest, MatMulIdentity) {
  std::mt19937_64 rng(1);
  Tape tape(false);
  Array eye({3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  const Array a = RandomArray({3, 3}, rng);
  Var out = MatMul(tape.Constant(eye), tape.Constant(a));
  EXPECT_EQ(out.value(), a);
}

TEST(PrimitiveTest, SoftmaxSymmetric) {
  Tape tape(false);
  Var out = Softmax(tape.Constant(Array({2}, {0.0, 0.0})));
  EXPECT_DOUBLE_EQ(out.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(out.value()[1], 0.5);
}

TEST(PrimitiveTest, LayerNormTwoValues) {
  // mean 2, biased variance 1: (x - 2) / sqrt(1 + eps).
  Tape tape(false);
  Var out = LayerNorm(tape.Constant(Array({2}, {1.0, 3.0})));
  EXPECT_NEAR(out.value()[0], -1.0, 1e-5);
  EXPECT_NEAR(out.value()[1], 1.0, 1e-5);
  EXPECT_NEAR(out.value()[1], 1.0 / std::sqrt(1.0 + kLayerNormEpsilon), 1e-15);
}

TEST(PrimitiveTest, ShapeMismatchNamesOperands) {
  Tape tape(false);
  Var a = tape.Constant(Array({2, 3}));
  Var b = tape.Constant(Array({4, 5}));
  try {
    MatMul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2, 3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[4, 5]"), std::string::npos);
  }
  EXPECT_THROW(Add(a, b), ShapeError);
  EXPECT_THROW(Mse(a, b), ShapeError);
  EXPECT_THROW(Concat({a, tape.Constant(Array({3, 1}))}), ShapeError);
}

TEST(PrimitiveTest, NonFiniteOutputIsNumericError) {
  Tape tape(false);
  Var big = tape.Constant(Array({1}, {1e308}));
  EXPECT_THROW(Scale(big, 10.0), NumericError);
}

TEST(PrimitiveTest, SoftmaxRowsAreDistributions) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape(false);
    Var out = Softmax(tape.Constant(RandomArray({4, 7}, rng, 5.0)));
    for (int r = 0; r < 4; ++r) {
      double total = 0.0;
      for (int j = 0; j < 7; ++j) {
        EXPECT_GE(out.value()[r * 7 + j], 0.0);
        total += out.value()[r * 7 + j];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(PrimitiveTest, LayerNormRowStatistics) {
  std::mt19937_64 rng(4);
  Tape tape(false);
  const Array in = RandomArray({5, 16}, rng, 3.0);
  Var out = LayerNorm(tape.Constant(in));
  auto row_stats = [](const double* row) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 16; ++j) mean += row[j] / 16.0;
    for (int j = 0; j < 16; ++j) var += (row[j] - mean) * (row[j] - mean) / 16.0;
    return std::make_pair(mean, var);
  };
  for (int r = 0; r < 5; ++r) {
    const auto [in_mean, in_var] = row_stats(in.data() + r * 16);
    const auto [mean, var] = row_stats(out.value().data() + r * 16);
    EXPECT_LT(std::abs(mean), 1e-9);
    // Unit variance up to the epsilon stabilizer.
    EXPECT_NEAR(var, in_var / (in_var + kLayerNormEpsilon), 1e-6);
  }
}

TEST(BackwardTest, QuadraticLoss) {
  Tape tape;
  Var x = tape.Input(Array({1}, {3.0}));
  Var zero = tape.Constant(Array({1}, {0.0}));
  tape.Backward(Mse(x, zero));
  EXPECT_DOUBLE_EQ(tape.Grad(x)[0], 6.0);
}

TEST(BackwardTest, LinearScale) {
  Tape tape;
  Var x = tape.Input(Array({2, 2}, {1, 2, 3, 4}));
  tape.Backward(Sum(Scale(x, 2.5)));
  const Array grad = tape.Grad(x);
  for (double g : grad.values()) EXPECT_DOUBLE_EQ(g, 2.5);
}

TEST(BackwardTest, NonScalarLossRejected) {
  Tape tape;
  Var x = tape.Input(Array({2}, {1, 2}));
  EXPECT_THROW(tape.Backward(Scale(x, 2.0)), ShapeError);
}

TEST(BackwardTest, TapeIsConsumed) {
  Tape tape;
  Var x = tape.Input(Array({1}, {1.0}));
  Var loss = Sum(x);
  tape.Backward(loss);
  EXPECT_THROW(tape.Backward(loss), ShapeError);
}

TEST(BackwardTest, UnusedNodesHaveZeroGradient) {
  Tape tape;
  Var x = tape.Input(Array({2}, {1, 2}));
  Var unused = tape.Input(Array({3}, {1, 2, 3}));
  tape.Backward(Sum(x));
  const Array grad = tape.Grad(unused);
  for (double g : grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(BackwardTest, RecordsAreTopologicallyOrdered) {
  Tape tape;
  Var x = tape.Input(Array({2, 3}));
  Var y = Gelu(Add(x, x));
  Var loss = Mean(Mul(y, y));
  tape.Backward(loss);
  for (size_t id = 0; id < tape.num_records(); ++id) {
    for (int in : tape.inputs(static_cast<int>(id))) {
      EXPECT_LT(in, static_cast<int>(id));
    }
  }
}

TEST(BackwardTest, PrimitiveGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const double kSmooth = 1e-6;
  const Array x = RandomArray({2, 3, 4}, rng);
  const Array w = RandomArray({4, 5}, rng);
  const Array other = RandomArray({2, 3, 4}, rng);
  const Array bias = RandomArray({4}, rng);

  ExpectPrimitiveGradient(
      [&](const Var& v) { return MatMul(v, v.tape()->Constant(w)); }, x, kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return MatMul(v.tape()->Constant(x), v); }, w, kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return BatchMatMul(v, v, /*transpose_b=*/true); }, x,
      kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) {
        return BatchMatMul(v, Reshape(v, {2, 4, 3}), false);
      },
      x, kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return Add(v.tape()->Constant(x), v); }, bias,
      kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return Mul(v.tape()->Constant(x), v); }, bias,
      kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return Mul(v, v.tape()->Constant(other)); }, x,
      kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) {
        return Concat({v, v.tape()->Constant(other), Scale(v, 2.0)});
      },
      x, kSmooth);
  ExpectPrimitiveGradient([](const Var& v) { return Softmax(v); }, x, kSmooth);
  ExpectPrimitiveGradient([](const Var& v) { return LayerNorm(v); }, x,
                          kSmooth);
  ExpectPrimitiveGradient([](const Var& v) { return Gelu(v); }, x, kSmooth);
  ExpectPrimitiveGradient([](const Var& v) { return Mean(v); }, x, kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return Mse(v, v.tape()->Constant(other)); }, x,
      kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return SplitHeads(Reshape(v, {2, 3, 4}), 2); }, x,
      kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return MergeHeads(v, 2); }, x, kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return ExpandTokens(v, 3); }, w, kSmooth);
  ExpectPrimitiveGradient([&](const Var& v) { return MeanTokens(v); }, x,
                          kSmooth);
  ExpectPrimitiveGradient(
      [&](const Var& v) { return GatherRows(v, {3, 0, 3}); }, w, kSmooth);

  Array mask({2, 3, 4});
  std::bernoulli_distribution keep(0.9);
  for (double& m : mask.mutable_values()) m = keep(rng) ? 1.0 : 0.0;
  ExpectPrimitiveGradient(
      [&](const Var& v) { return DropoutApply(v, mask, 0.1); }, x, kSmooth);
}

TEST(BackwardTest, SoftmaxCrossEntropyComposite) {
  std::mt19937_64 rng(12);
  const Array logits = RandomArray({3, 6}, rng, 2.0);
  Array target = RandomArray({3, 6}, rng);
  {
    Tape t(false);
    target = Softmax(t.Constant(target)).value();
  }
  auto loss_of = [&](Tape& t, const Var& l) {
    return SoftCrossEntropy(l, t.Constant(target));
  };
  Tape tape;
  Var l = tape.Input(logits);
  tape.Backward(loss_of(tape, l));
  const Array numeric = NumericGradient(
      [&](const Array& lv) {
        Tape t(false);
        return loss_of(t, t.Constant(lv)).value()[0];
      },
      logits);
  EXPECT_LT(MaxRelError(tape.Grad(l), numeric), 1e-6);
}

TEST(BackwardTest, CrossEntropyMatchesDirectSum) {
  Tape tape(false);
  const Array logits({1, 3}, {0.2, -1.0, 0.7});
  const Array target({1, 3}, {0.5, 0.25, 0.25});
  const double z = std::exp(0.2) + std::exp(-1.0) + std::exp(0.7);
  const double expected = -(0.5 * std::log(std::exp(0.2) / z) +
                            0.25 * std::log(std::exp(-1.0) / z) +
                            0.25 * std::log(std::exp(0.7) / z));
  Var loss = SoftCrossEntropy(tape.Constant(logits), tape.Constant(target));
  EXPECT_NEAR(loss.value()[0], expected, 1e-14);
}

TEST(BackwardTest, DeterministicGivenInputsAndMask) {
  std::mt19937_64 rng(5);
  const Array x = RandomArray({4, 8}, rng);
  Array mask(x.shape());
  for (int64_t i = 0; i < mask.size(); i += 3) mask[i] = 1.0;
  auto run = [&] {
    Tape t;
    Var v = t.Input(x);
    Var y = DropoutApply(Gelu(LayerNorm(v)), mask, 0.1);
    Var loss = Mean(Softmax(y));
    t.Backward(loss);
    return std::make_pair(loss.value(), t.Grad(v));
  };
  EXPECT_EQ(run(), run());
}

TEST(AdamWTest, ZeroGradientIsIdentity) {
  std::mt19937_64 rng(2);
  ParameterStore store;
  store.AddUniform("w", {3, 4}, 3, rng);
  store.Add("b", Array({4}));
  const ParameterStore before = store;
  Gradients grads{{"w", Array({3, 4})}, {"b", Array({4})}};
  AdamWOptions opts;
  opts.weight_decay = 0.0;
  AdamWStep(store, grads, opts);
  EXPECT_EQ(store.Get("w"), before.Get("w"));
  EXPECT_EQ(store.Get("b"), before.Get("b"));
  EXPECT_EQ(store.step(), 1);
}

TEST(AdamWTest, MatchesScalarReference) {
  AdamWOptions opts;
  opts.learning_rate = 0.05;
  opts.weight_decay = 0.1;
  const double g = 0.3;

  // Hand-rolled scalar AdamW reference.
  double p = 1.0, m = 0.0, v = 0.0;
  std::vector<double> expected;
  for (int t = 1; t <= 25; ++t) {
    p *= 1.0 - opts.learning_rate * opts.weight_decay;
    m = opts.beta1 * m + (1 - opts.beta1) * g;
    v = opts.beta2 * v + (1 - opts.beta2) * g * g;
    const double mh = m / (1 - std::pow(opts.beta1, t));
    const double vh = v / (1 - std::pow(opts.beta2, t));
    p -= opts.learning_rate * mh / (std::sqrt(vh) + opts.epsilon);
    expected.push_back(p);
  }

  ParameterStore store;
  store.Add("p", Array::Scalar(1.0));
  for (int t = 0; t < 25; ++t) {
    AdamWStep(store, {{"p", Array::Scalar(g)}}, opts);
    EXPECT_NEAR(store.Get("p")[0], expected[t], 1e-14);
  }
  EXPECT_EQ(store.step(), 25);
}

TEST(AdamWTest, DefaultLearningRate) {
  EXPECT_DOUBLE_EQ(AdamWOptions{}.learning_rate, 5e-4);
}

TEST(AdamWTest, MissingGradientRejectedWithoutSideEffects) {
  ParameterStore store;
  store.Add("a", Array::Scalar(1.0));
  store.Add("b", Array::Scalar(2.0));
  EXPECT_THROW(AdamWStep(store, {{"a", Array::Scalar(1.0)}}, {}), ShapeError);
  EXPECT_EQ(store.Get("a")[0], 1.0);
  EXPECT_EQ(store.step(), 0);
  EXPECT_THROW(AdamWStep(store,
                         {{"a", Array::Scalar(1.0)}, {"b", Array({2})}}, {}),
               ShapeError);
}

TEST(GradientCheckTest, LinearLayerMse) {
  std::mt19937_64 rng(21);
  ParameterStore store;
  store.AddUniform("w", {4, 3}, 4, rng);
  store.Add("b", RandomArray({3}, rng));
  const Array x = RandomArray({5, 4}, rng);
  const Array y = RandomArray({5, 3}, rng);
  LossClosure closure = [&](Tape& t, const ParameterStore& s) {
    Var out = Add(MatMul(t.Constant(x), t.Param(s, "w")), t.Param(s, "b"));
    return Mse(out, t.Constant(y));
  };
  GradientCheckReport report = GradientCheck(closure, store);
  EXPECT_LT(report.max_relative_error, 1e-8) << report.worst_parameter;
  EXPECT_EQ(report.entries_checked, 15);
}

TEST(GradientCheckTest, SoftmaxCrossEntropyComposite) {
  std::mt19937_64 rng(22);
  ParameterStore store;
  store.AddUniform("w", {6, 5}, 6, rng);
  const Array x = RandomArray({4, 6}, rng);
  Array target({4, 5});
  for (int r = 0; r < 4; ++r) target[r * 5 + r] = 1.0;
  LossClosure closure = [&](Tape& t, const ParameterStore& s) {
    return SoftCrossEntropy(MatMul(t.Constant(x), t.Param(s, "w")),
                            t.Constant(target));
  };
  GradientCheckReport report = GradientCheck(closure, store);
  EXPECT_LT(report.max_relative_error, 1e-6);
}

TEST(GradientCheckTest, DetectsNonDeterministicClosure) {
  ParameterStore store;
  store.Add("w", Array({1}, {1.0}));
  int calls = 0;
  LossClosure closure = [&](Tape& t, const ParameterStore& s) {
    ++calls;
    return Sum(Scale(t.Param(s, "w"), static_cast<double>(calls)));
  };
  EXPECT_THROW(GradientCheck(closure, store), ConfigError);
}

TEST(GradientCheckTest, FlagsWrongGradient) {
  // A coarse step lets truncation error dominate; the report must say so.
  ParameterStore store;
  store.Add("w", Array({2}, {0.5, -0.25}));
  LossClosure closure = [](Tape& t, const ParameterStore& s) {
    return Sum(Gelu(Scale(t.Param(s, "w"), 40.0)));
  };
  GradientCheckOptions loose;
  loose.step = 0.2;  // deliberately coarse: truncation error dominates
  loose.tolerance = 1e-6;
  EXPECT_FALSE(GradientCheck(closure, store, loose).passed);
  EXPECT_TRUE(GradientCheck(closure, store).passed);
}

TEST(CheckpointTest, RoundTripAndManifest) {
  std::mt19937_64 rng(31);
  ParameterStore store;
  store.AddUniform("layer.w", {3, 2}, 3, rng);
  store.Add("layer.b", RandomArray({2}, rng));
  AdamWStep(store,
            {{"layer.w", RandomArray({3, 2}, rng)},
             {"layer.b", RandomArray({2}, rng)}},
            {});
  Checkpoint ckpt;
  ckpt.manifest["architecture"] = {{"width", 2}};
  AppendStore("net", store, ckpt);
  const std::string path =
      (std::filesystem::temp_directory_path() / "trajdiff_ckpt_test.bin")
          .string();
  WriteCheckpoint(path, ckpt);

  Checkpoint loaded = ReadCheckpoint(path);
  EXPECT_EQ(loaded.manifest["architecture"]["width"], 2);
  ParameterStore restored;
  restored.Add("layer.w", Array({3, 2}));
  restored.Add("layer.b", Array({2}));
  LoadStore("net", loaded, restored);
  EXPECT_EQ(restored.Hash(), store.Hash());
  EXPECT_EQ(restored.step(), 1);
  EXPECT_EQ(restored.entry("layer.w").second_moment,
            store.entry("layer.w").second_moment);

  ParameterStore wrong;
  wrong.Add("layer.w", Array({2, 3}));
  EXPECT_THROW(LoadStore("net", loaded, wrong), ConfigError);
  std::filesystem::remove(path);
}

TEST(CheckpointTest, RejectsForeignAndTruncatedFiles) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "trajdiff_bad.bin").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("NOTACKPT0000", f);
    std::fclose(f);
  }
  EXPECT_THROW(ReadCheckpoint(path), DataError);
  Checkpoint ckpt;
  ckpt.records.emplace_back("x", Array({4}, {1, 2, 3, 4}));
  WriteCheckpoint(path, ckpt);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(ReadCheckpoint(path), DataError);
  std::filesystem::remove(path);
}

TEST(ParameterStoreTest, CopiesDoNotAlias) {
  ParameterStore a;
  a.Add("w", Array({1}, {1.0}));
  ParameterStore b = a;
  b.Mutable("w")[0] = 2.0;
  EXPECT_EQ(a.Get("w")[0], 1.0);
  EXPECT_NE(a.Hash(), b.Hash());
  EXPECT_THROW(a.Add("w", Array({1})), ConfigError);
}

}  // namespace
}  // namespace trajdiff::tensor
