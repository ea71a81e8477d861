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

#include "trajdiff/tensor/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "trajdiff/errors.h"

namespace trajdiff::tensor {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

Tape& TapeOf(const Var& a) {
  if (!a.valid()) throw ShapeError("operand is not bound to a tape");
  return *a.tape();
}

Tape& TapeOf(const Var& a, const Var& b) {
  Tape& t = TapeOf(a);
  if (b.tape() != &t) throw ShapeError("operands live on different tapes");
  return t;
}

[[noreturn]] void Mismatch(std::string_view op, const Var& a, const Var& b) {
  throw ShapeError(std::string(op) + ": operand shapes " +
                   ShapeToString(a.shape()) + " and " +
                   ShapeToString(b.shape()) + " do not conform");
}

// True when `suffix` matches the trailing extents of `shape`.
bool IsSuffix(const Shape& shape, const Shape& suffix) {
  if (suffix.size() > shape.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), shape.rbegin());
}

int64_t LastDim(const Var& x, std::string_view op) {
  if (x.value().rank() < 1) {
    throw ShapeError(std::string(op) + ": needs rank >= 1, got scalar");
  }
  return x.value().dim(-1);
}

}  // namespace

Var MatMul(const Var& a, const Var& b) {
  Tape& tape = TapeOf(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rank() < 2 || bv.rank() != 2 || av.dim(-1) != bv.dim(0)) {
    Mismatch("matmul", a, b);
  }
  const int64_t k = bv.dim(0);
  const int64_t n = bv.dim(1);
  const int64_t rows = av.size() / k;
  Shape out_shape = av.shape();
  out_shape.back() = n;
  Array out(out_shape);
  MutMap(out.data(), rows, n).noalias() =
      ConstMap(av.data(), rows, k) * ConstMap(bv.data(), k, n);
  const int ia = a.id(), ib = b.id();
  return tape.Record(
      Primitive::kMatMul, std::move(out), {ia, ib},
      [ia, ib, rows, k, n](Tape& t, const Array&, const Array& g) {
        ConstMap gm(g.data(), rows, n);
        if (Array* ga = t.GradSlot(ia)) {
          MutMap(ga->data(), rows, k).noalias() +=
              gm * ConstMap(t.value(ib).data(), k, n).transpose();
        }
        if (Array* gb = t.GradSlot(ib)) {
          MutMap(gb->data(), k, n).noalias() +=
              ConstMap(t.value(ia).data(), rows, k).transpose() * gm;
        }
      });
}

Var BatchMatMul(const Var& a, const Var& b, bool transpose_b) {
  Tape& tape = TapeOf(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0)) {
    Mismatch("batch-matmul", a, b);
  }
  const int64_t batch = av.dim(0), m = av.dim(1), k = av.dim(2);
  const int64_t bk = transpose_b ? bv.dim(2) : bv.dim(1);
  const int64_t n = transpose_b ? bv.dim(1) : bv.dim(2);
  if (bk != k) Mismatch("batch-matmul", a, b);
  Array out({batch, m, n});
  for (int64_t i = 0; i < batch; ++i) {
    ConstMap am(av.data() + i * m * k, m, k);
    MutMap om(out.data() + i * m * n, m, n);
    if (transpose_b) {
      om.noalias() = am * ConstMap(bv.data() + i * n * k, n, k).transpose();
    } else {
      om.noalias() = am * ConstMap(bv.data() + i * k * n, k, n);
    }
  }
  const int ia = a.id(), ib = b.id();
  return tape.Record(
      Primitive::kBatchMatMul, std::move(out), {ia, ib},
      [ia, ib, batch, m, k, n, transpose_b](Tape& t, const Array&,
                                            const Array& g) {
        Array* ga = t.GradSlot(ia);
        Array* gb = t.GradSlot(ib);
        const Array& av = t.value(ia);
        const Array& bv = t.value(ib);
        for (int64_t i = 0; i < batch; ++i) {
          ConstMap gm(g.data() + i * m * n, m, n);
          ConstMap am(av.data() + i * m * k, m, k);
          if (transpose_b) {
            // C = A B^T: dA = G B, dB = G^T A.
            ConstMap bm(bv.data() + i * n * k, n, k);
            if (ga) MutMap(ga->data() + i * m * k, m, k).noalias() += gm * bm;
            if (gb) {
              MutMap(gb->data() + i * n * k, n, k).noalias() +=
                  gm.transpose() * am;
            }
          } else {
            ConstMap bm(bv.data() + i * k * n, k, n);
            if (ga) {
              MutMap(ga->data() + i * m * k, m, k).noalias() +=
                  gm * bm.transpose();
            }
            if (gb) {
              MutMap(gb->data() + i * k * n, k, n).noalias() +=
                  am.transpose() * gm;
            }
          }
        }
      });
}

Var Add(const Var& a, const Var& b) {
  Tape& tape = TapeOf(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (!IsSuffix(av.shape(), bv.shape())) Mismatch("add", a, b);
  const int64_t inner = bv.size();
  Array out = av;
  double* o = out.data();
  const double* bp = bv.data();
  for (int64_t i = 0; i < out.size(); ++i) o[i] += bp[i % inner];
  const int ia = a.id(), ib = b.id();
  return tape.Record(Primitive::kAdd, std::move(out), {ia, ib},
                     [ia, ib, inner](Tape& t, const Array&, const Array& g) {
                       if (Array* ga = t.GradSlot(ia)) {
                         double* p = ga->data();
                         for (int64_t i = 0; i < g.size(); ++i) p[i] += g[i];
                       }
                       if (Array* gb = t.GradSlot(ib)) {
                         double* p = gb->data();
                         for (int64_t i = 0; i < g.size(); ++i) {
                           p[i % inner] += g[i];
                         }
                       }
                     });
}

Var Mul(const Var& a, const Var& b) {
  Tape& tape = TapeOf(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (!IsSuffix(av.shape(), bv.shape())) Mismatch("elementwise-mul", a, b);
  const int64_t inner = bv.size();
  Array out = av;
  double* o = out.data();
  const double* bp = bv.data();
  for (int64_t i = 0; i < out.size(); ++i) o[i] *= bp[i % inner];
  const int ia = a.id(), ib = b.id();
  return tape.Record(
      Primitive::kMul, std::move(out), {ia, ib},
      [ia, ib, inner](Tape& t, const Array&, const Array& g) {
        const Array& av = t.value(ia);
        const Array& bv = t.value(ib);
        if (Array* ga = t.GradSlot(ia)) {
          double* p = ga->data();
          for (int64_t i = 0; i < g.size(); ++i) p[i] += g[i] * bv[i % inner];
        }
        if (Array* gb = t.GradSlot(ib)) {
          double* p = gb->data();
          for (int64_t i = 0; i < g.size(); ++i) p[i % inner] += g[i] * av[i];
        }
      });
}

Var Sub(const Var& a, const Var& b) { return Add(a, Scale(b, -1.0)); }

Var Concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat-last-axis: no operands");
  Tape& tape = TapeOf(parts[0]);
  const Shape& first = parts[0].shape();
  if (first.empty()) throw ShapeError("concat-last-axis: scalar operand");
  std::vector<int> ids;
  std::vector<int64_t> widths;
  int64_t total = 0;
  for (const Var& p : parts) {
    TapeOf(parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin(), s.end() - 1, first.begin())) {
      Mismatch("concat-last-axis", parts[0], p);
    }
    ids.push_back(p.id());
    widths.push_back(s.back());
    total += s.back();
  }
  const int64_t rows = parts[0].value().size() / first.back();
  Shape out_shape = first;
  out_shape.back() = total;
  Array out(out_shape);
  int64_t offset = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].value().data();
    const int64_t w = widths[p];
    for (int64_t r = 0; r < rows; ++r) {
      std::copy_n(src + r * w, w, out.data() + r * total + offset);
    }
    offset += w;
  }
  return tape.Record(
      Primitive::kConcat, std::move(out), ids,
      [ids, widths, rows, total](Tape& t, const Array&, const Array& g) {
        int64_t offset = 0;
        for (size_t p = 0; p < ids.size(); ++p) {
          const int64_t w = widths[p];
          if (Array* gp = t.GradSlot(ids[p])) {
            double* dst = gp->data();
            for (int64_t r = 0; r < rows; ++r) {
              const double* src = g.data() + r * total + offset;
              for (int64_t j = 0; j < w; ++j) dst[r * w + j] += src[j];
            }
          }
          offset += w;
        }
      });
}

Var Softmax(const Var& x) {
  Tape& tape = TapeOf(x);
  const int64_t n = LastDim(x, "softmax-last-axis");
  const Array& xv = x.value();
  const int64_t rows = xv.size() / n;
  Array out(xv.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (int64_t j = 0; j < n; ++j) o[j] /= total;
  }
  const int ix = x.id();
  return tape.Record(Primitive::kSoftmax, std::move(out), {ix},
                     [ix, rows, n](Tape& t, const Array& y, const Array& g) {
                       Array* gx = t.GradSlot(ix);
                       for (int64_t r = 0; r < rows; ++r) {
                         const double* yr = y.data() + r * n;
                         const double* gr = g.data() + r * n;
                         double dot = 0.0;
                         for (int64_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
                         double* dst = gx->data() + r * n;
                         for (int64_t j = 0; j < n; ++j) {
                           dst[j] += yr[j] * (gr[j] - dot);
                         }
                       }
                     });
}

Var LayerNorm(const Var& x, double eps) {
  Tape& tape = TapeOf(x);
  const int64_t n = LastDim(x, "layer-normalize-last-axis");
  const Array& xv = x.value();
  const int64_t rows = xv.size() / n;
  Array out(xv.shape());
  std::vector<double> inv_std(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double mean = 0.0;
    for (int64_t j = 0; j < n; ++j) mean += in[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    double* o = out.data() + r * n;
    for (int64_t j = 0; j < n; ++j) o[j] = (in[j] - mean) * inv_std[r];
  }
  const int ix = x.id();
  return tape.Record(
      Primitive::kLayerNorm, std::move(out), {ix},
      [ix, rows, n, inv_std = std::move(inv_std)](Tape& t, const Array& y,
                                                  const Array& g) {
        Array* gx = t.GradSlot(ix);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (int64_t r = 0; r < rows; ++r) {
          const double* yr = y.data() + r * n;
          const double* gr = g.data() + r * n;
          double mean_g = 0.0, mean_gy = 0.0;
          for (int64_t j = 0; j < n; ++j) {
            mean_g += gr[j];
            mean_gy += gr[j] * yr[j];
          }
          mean_g *= inv_n;
          mean_gy *= inv_n;
          double* dst = gx->data() + r * n;
          for (int64_t j = 0; j < n; ++j) {
            dst[j] += inv_std[r] * (gr[j] - mean_g - yr[j] * mean_gy);
          }
        }
      });
}

Var Gelu(const Var& x) {
  Tape& tape = TapeOf(x);
  const Array& xv = x.value();
  Array out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  }
  const int ix = x.id();
  return tape.Record(
      Primitive::kGelu, std::move(out), {ix},
      [ix](Tape& t, const Array&, const Array& g) {
        const Array& xv = t.value(ix);
        Array* gx = t.GradSlot(ix);
        const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi *
                                    std::numbers::sqrt2;
        for (int64_t i = 0; i < xv.size(); ++i) {
          const double v = xv[i];
          const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
          const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
          (*gx)[i] += g[i] * (cdf + v * pdf);
        }
      });
}

Var Scale(const Var& x, double c) {
  Tape& tape = TapeOf(x);
  Array out = x.value();
  for (double& v : out.mutable_values()) v *= c;
  const int ix = x.id();
  return tape.Record(Primitive::kScale, std::move(out), {ix},
                     [ix, c](Tape& t, const Array&, const Array& g) {
                       Array* gx = t.GradSlot(ix);
                       for (int64_t i = 0; i < g.size(); ++i) {
                         (*gx)[i] += c * g[i];
                       }
                     });
}

Var Sum(const Var& x) {
  Tape& tape = TapeOf(x);
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const int ix = x.id();
  return tape.Record(Primitive::kSum, Array::Scalar(total), {ix},
                     [ix](Tape& t, const Array&, const Array& g) {
                       Array* gx = t.GradSlot(ix);
                       for (double& v : gx->mutable_values()) v += g[0];
                     });
}

Var Mean(const Var& x) {
  Tape& tape = TapeOf(x);
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const double n = static_cast<double>(x.value().size());
  const int ix = x.id();
  return tape.Record(Primitive::kMean, Array::Scalar(total / n), {ix},
                     [ix, n](Tape& t, const Array&, const Array& g) {
                       Array* gx = t.GradSlot(ix);
                       for (double& v : gx->mutable_values()) v += g[0] / n;
                     });
}

Var Mse(const Var& a, const Var& b) {
  Tape& tape = TapeOf(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.shape() != bv.shape()) Mismatch("mse", a, b);
  double total = 0.0;
  for (int64_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    total += d * d;
  }
  const double n = static_cast<double>(av.size());
  const int ia = a.id(), ib = b.id();
  return tape.Record(
      Primitive::kMse, Array::Scalar(total / n), {ia, ib},
      [ia, ib, n](Tape& t, const Array&, const Array& g) {
        const Array& av = t.value(ia);
        const Array& bv = t.value(ib);
        Array* ga = t.GradSlot(ia);
        Array* gb = t.GradSlot(ib);
        const double s = 2.0 * g[0] / n;
        for (int64_t i = 0; i < av.size(); ++i) {
          const double d = s * (av[i] - bv[i]);
          if (ga) (*ga)[i] += d;
          if (gb) (*gb)[i] -= d;
        }
      });
}

Var SoftCrossEntropy(const Var& logits, const Var& targets) {
  Tape& tape = TapeOf(logits, targets);
  const Array& lv = logits.value();
  const Array& tv = targets.value();
  if (lv.shape() != tv.shape()) {
    Mismatch("cross-entropy-with-soft-targets", logits, targets);
  }
  const int64_t n = LastDim(logits, "cross-entropy-with-soft-targets");
  const int64_t rows = lv.size() / n;
  // log-softmax per row, kept for the backward pass.
  std::vector<double> log_p(lv.size());
  double total = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = lv.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (int64_t j = 0; j < n; ++j) z += std::exp(in[j] - mx);
    const double log_z = mx + std::log(z);
    for (int64_t j = 0; j < n; ++j) {
      log_p[r * n + j] = in[j] - log_z;
      total -= tv[r * n + j] * log_p[r * n + j];
    }
  }
  const int il = logits.id(), it = targets.id();
  return tape.Record(
      Primitive::kSoftCrossEntropy,
      Array::Scalar(total / static_cast<double>(rows)), {il, it},
      [il, it, rows, n, log_p = std::move(log_p)](Tape& t, const Array&,
                                                  const Array& g) {
        const Array& tv = t.value(it);
        Array* gl = t.GradSlot(il);
        Array* gt = t.GradSlot(it);
        const double s = g[0] / static_cast<double>(rows);
        for (int64_t r = 0; r < rows; ++r) {
          double mass = 0.0;
          for (int64_t j = 0; j < n; ++j) mass += tv[r * n + j];
          for (int64_t j = 0; j < n; ++j) {
            const int64_t i = r * n + j;
            if (gl) (*gl)[i] += s * (std::exp(log_p[i]) * mass - tv[i]);
            if (gt) (*gt)[i] -= s * log_p[i];
          }
        }
      });
}

Var DropoutApply(const Var& x, const Array& mask, double rate) {
  Tape& tape = TapeOf(x);
  if (mask.shape() != x.shape()) {
    throw ShapeError("dropout-mask-apply: mask shape " +
                     ShapeToString(mask.shape()) + " vs input " +
                     ShapeToString(x.shape()));
  }
  if (rate < 0.0 || rate >= 1.0) {
    throw ShapeError("dropout-mask-apply: rate must lie in [0, 1)");
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Array factors(mask.shape());
  for (int64_t i = 0; i < mask.size(); ++i) factors[i] = mask[i] * keep_scale;
  Array out = x.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= factors[i];
  const int ix = x.id();
  return tape.Record(
      Primitive::kDropout, std::move(out), {ix},
      [ix, factors = std::move(factors)](Tape& t, const Array&,
                                         const Array& g) {
        Array* gx = t.GradSlot(ix);
        for (int64_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * factors[i];
      });
}

Var Reshape(const Var& x, Shape shape) {
  Tape& tape = TapeOf(x);
  Array out = x.value().Reshaped(std::move(shape));
  const int ix = x.id();
  return tape.Record(Primitive::kReshape, std::move(out), {ix},
                     [ix](Tape& t, const Array&, const Array& g) {
                       Array* gx = t.GradSlot(ix);
                       for (int64_t i = 0; i < g.size(); ++i) {
                         (*gx)[i] += g[i];
                       }
                     });
}

Var SplitHeads(const Var& x, int64_t heads) {
  Tape& tape = TapeOf(x);
  const Array& xv = x.value();
  if (xv.rank() != 3 || heads < 1 || xv.dim(2) % heads != 0) {
    throw ShapeError("split-heads: cannot split " + ShapeToString(xv.shape()) +
                     " into " + std::to_string(heads) + " heads");
  }
  const int64_t batch = xv.dim(0), tokens = xv.dim(1);
  const int64_t d = xv.dim(2) / heads;
  Array out({batch * heads, tokens, d});
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t t = 0; t < tokens; ++t) {
      const double* src = xv.data() + (b * tokens + t) * heads * d;
      for (int64_t h = 0; h < heads; ++h) {
        std::copy_n(src + h * d, d,
                    out.data() + ((b * heads + h) * tokens + t) * d);
      }
    }
  }
  const int ix = x.id();
  return tape.Record(
      Primitive::kSplitHeads, std::move(out), {ix},
      [ix, batch, tokens, heads, d](Tape& tp, const Array&, const Array& g) {
        Array* gx = tp.GradSlot(ix);
        for (int64_t b = 0; b < batch; ++b) {
          for (int64_t t = 0; t < tokens; ++t) {
            double* dst = gx->data() + (b * tokens + t) * heads * d;
            for (int64_t h = 0; h < heads; ++h) {
              const double* src = g.data() + ((b * heads + h) * tokens + t) * d;
              for (int64_t j = 0; j < d; ++j) dst[h * d + j] += src[j];
            }
          }
        }
      });
}

Var MergeHeads(const Var& x, int64_t heads) {
  Tape& tape = TapeOf(x);
  const Array& xv = x.value();
  if (xv.rank() != 3 || heads < 1 || xv.dim(0) % heads != 0) {
    throw ShapeError("merge-heads: cannot merge " + ShapeToString(xv.shape()) +
                     " over " + std::to_string(heads) + " heads");
  }
  const int64_t batch = xv.dim(0) / heads, tokens = xv.dim(1), d = xv.dim(2);
  Array out({batch, tokens, heads * d});
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t h = 0; h < heads; ++h) {
      for (int64_t t = 0; t < tokens; ++t) {
        std::copy_n(xv.data() + ((b * heads + h) * tokens + t) * d, d,
                    out.data() + (b * tokens + t) * heads * d + h * d);
      }
    }
  }
  const int ix = x.id();
  return tape.Record(
      Primitive::kMergeHeads, std::move(out), {ix},
      [ix, batch, tokens, heads, d](Tape& tp, const Array&, const Array& g) {
        Array* gx = tp.GradSlot(ix);
        for (int64_t b = 0; b < batch; ++b) {
          for (int64_t h = 0; h < heads; ++h) {
            for (int64_t t = 0; t < tokens; ++t) {
              double* dst = gx->data() + ((b * heads + h) * tokens + t) * d;
              const double* src = g.data() + (b * tokens + t) * heads * d + h * d;
              for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
          }
        }
      });
}

Var ExpandTokens(const Var& x, int64_t tokens) {
  Tape& tape = TapeOf(x);
  const Array& xv = x.value();
  if (xv.rank() != 2 || tokens < 1) {
    throw ShapeError("expand-tokens: expects [B, d], got " +
                     ShapeToString(xv.shape()));
  }
  const int64_t batch = xv.dim(0), d = xv.dim(1);
  Array out({batch, tokens, d});
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t t = 0; t < tokens; ++t) {
      std::copy_n(xv.data() + b * d, d, out.data() + (b * tokens + t) * d);
    }
  }
  const int ix = x.id();
  return tape.Record(Primitive::kExpandTokens, std::move(out), {ix},
                     [ix, batch, tokens, d](Tape& tp, const Array&,
                                            const Array& g) {
                       Array* gx = tp.GradSlot(ix);
                       for (int64_t b = 0; b < batch; ++b) {
                         for (int64_t t = 0; t < tokens; ++t) {
                           const double* src = g.data() + (b * tokens + t) * d;
                           for (int64_t j = 0; j < d; ++j) {
                             (*gx)[b * d + j] += src[j];
                           }
                         }
                       }
                     });
}

Var MeanTokens(const Var& x) {
  Tape& tape = TapeOf(x);
  const Array& xv = x.value();
  if (xv.rank() != 3) {
    throw ShapeError("mean-tokens: expects [B, T, d], got " +
                     ShapeToString(xv.shape()));
  }
  const int64_t batch = xv.dim(0), tokens = xv.dim(1), d = xv.dim(2);
  const double inv = 1.0 / static_cast<double>(tokens);
  Array out({batch, d});
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t t = 0; t < tokens; ++t) {
      const double* src = xv.data() + (b * tokens + t) * d;
      for (int64_t j = 0; j < d; ++j) out[b * d + j] += src[j] * inv;
    }
  }
  const int ix = x.id();
  return tape.Record(Primitive::kMeanTokens, std::move(out), {ix},
                     [ix, batch, tokens, d, inv](Tape& tp, const Array&,
                                                 const Array& g) {
                       Array* gx = tp.GradSlot(ix);
                       for (int64_t b = 0; b < batch; ++b) {
                         for (int64_t t = 0; t < tokens; ++t) {
                           double* dst = gx->data() + (b * tokens + t) * d;
                           for (int64_t j = 0; j < d; ++j) {
                             dst[j] += g[b * d + j] * inv;
                           }
                         }
                       }
                     });
}

Var GatherRows(const Var& x, const std::vector<int64_t>& rows) {
  Tape& tape = TapeOf(x);
  const Array& xv = x.value();
  if (xv.rank() < 1 || rows.empty()) {
    throw ShapeError("gather-rows: needs rank >= 1 and at least one row");
  }
  const int64_t n = xv.dim(0);
  const int64_t width = xv.size() / n;
  Shape out_shape = xv.shape();
  out_shape[0] = static_cast<int64_t>(rows.size());
  Array out(out_shape);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= n) {
      throw ShapeError("gather-rows: row " + std::to_string(rows[i]) +
                       " out of range for " + ShapeToString(xv.shape()));
    }
    std::copy_n(xv.data() + rows[i] * width, width,
                out.data() + static_cast<int64_t>(i) * width);
  }
  const int ix = x.id();
  return tape.Record(Primitive::kGatherRows, std::move(out), {ix},
                     [ix, rows, width](Tape& tp, const Array&, const Array& g) {
                       Array* gx = tp.GradSlot(ix);
                       for (size_t i = 0; i < rows.size(); ++i) {
                         const double* src =
                             g.data() + static_cast<int64_t>(i) * width;
                         double* dst = gx->data() + rows[i] * width;
                         for (int64_t j = 0; j < width; ++j) dst[j] += src[j];
                       }
                     });
}

}  // namespace trajdiff::tensor
