// Copyright 2026 The KAC Grounding Authors.
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

#include "kac/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kac/errors.hpp"

namespace kac {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kMatmulTransposed: return "matmul_transposed";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kLog: return "log";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kAbs: return "abs";
    case OpKind::kSmoothL1: return "smooth_l1";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSumAxis: return "sum_axis";
    case OpKind::kMeanAxis: return "mean_axis";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kPick: return "pick";
    case OpKind::kReshape: return "reshape";
    case OpKind::kBroadcastRows: return "broadcast_rows";
    case OpKind::kCustom: return "custom";
  }
  return "unknown";
}

// ---- Var / BackwardContext ------------------------------------------------

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("Var: use of an unbound variable");
  return tape_->value(id_);
}

bool Var::requires_grad() const {
  return tape_ != nullptr && tape_->requires_grad(id_);
}

const Tensor& BackwardContext::out_value() const {
  return tape_.nodes_[node_].value;
}

const Tensor& BackwardContext::out_grad() const {
  return tape_.nodes_[node_].grad;
}

const Tensor& BackwardContext::input(std::size_t i) const {
  return tape_.nodes_[parents_.at(i)].value;
}

bool BackwardContext::needs_grad(std::size_t i) const {
  return tape_.nodes_[parents_.at(i)].requires_grad;
}

Tensor& BackwardContext::input_grad(std::size_t i) {
  return tape_.grad_buffer(parents_.at(i));
}

// ---- Tape -----------------------------------------------------------------

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpKind::kConstant, std::move(value), {}, false, false,
                        {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{OpKind::kInput, std::move(value), {}, true, false, {},
                        {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& parameter) {
  if (auto it = bound_.find(&parameter); it != bound_.end()) {
    return Var(this, it->second);
  }
  nodes_.push_back(Node{OpKind::kParameter, parameter.value, {}, true, false,
                        {}, {}});
  bound_.emplace(&parameter, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, Tensor value, std::span<const Var> parents,
                 BackwardFn backward) {
  Node node{kind, std::move(value), {}, false, false, {}, {}};
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (&p.tape() != this) {
      throw ContractError(std::string(op_name(kind)) +
                          ": operand belongs to a different tape");
    }
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) {
    node.backward = std::move(backward);
  } else {
    node.parents.clear();
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  node.has_grad = true;
  return node.grad;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || &loss.tape() != this) {
    throw ContractError("backward: loss is not recorded on this tape");
  }
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        to_string(loss.shape()));
  }
  for (Node& node : nodes_) {
    node.has_grad = false;
    if (node.requires_grad) node.grad = Tensor(node.value.shape());
  }
  Node& root = nodes_[loss.id()];
  if (root.requires_grad) {
    root.grad.fill(1.0);
    root.has_grad = true;
  }
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    BackwardContext ctx(*this, id, node.parents);
    node.backward(ctx);
  }
  for (auto& [parameter, id] : bound_) {
    if (parameter->grad.shape() != parameter->value.shape()) {
      parameter->zero_grad();
    }
    const Tensor& g = nodes_[id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) parameter->grad[i] += g[i];
  }
  backward_done_ = true;
}

const Tensor& Tape::grad(Var v) const {
  if (!backward_done_) {
    throw ContractError("Tape::grad: backward() has not been run");
  }
  const Node& node = nodes_.at(v.id());
  if (!node.requires_grad) {
    throw ContractError("Tape::grad: node does not track a gradient");
  }
  return node.grad;
}

// ---- Kernels --------------------------------------------------------------

namespace {

// C[n x m] += A[n x k] . B[k x m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[n x m] += A[n x k] . B[m x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * m + j] += acc;
    }
  }
}

// C[k x m] += A[n x k]^T . B[n x m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

[[noreturn]] void shape_error(std::string_view op, const Shape& a,
                              const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       to_string(a) + " and " + to_string(b));
}

void require_matrix(std::string_view op, const Tensor& t) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         to_string(t.shape()));
  }
}

struct Broadcast {
  std::size_t rows, cols;
  Shape out;
};

Broadcast broadcast(std::string_view op, const Tensor& a, const Tensor& b) {
  auto combine = [&](std::size_t x, std::size_t y) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    shape_error(op, a.shape(), b.shape());
  };
  Broadcast bc{combine(a.rows(), b.rows()), combine(a.cols(), b.cols()), {}};
  if (a.shape() == b.shape()) {
    bc.out = a.shape();
  } else if (a.rows() == bc.rows && a.cols() == bc.cols) {
    bc.out = a.shape();
  } else if (b.rows() == bc.rows && b.cols() == bc.cols) {
    bc.out = b.shape();
  } else {
    bc.out = {bc.rows, bc.cols};
  }
  return bc;
}

inline std::size_t bindex(const Tensor& t, std::size_t r, std::size_t c) {
  return (t.rows() == 1 ? 0 : r) * t.cols() + (t.cols() == 1 ? 0 : c);
}

// Elementwise binary op with broadcasting. `da`/`db` return the partial
// derivatives at (x, y).
template <typename F, typename DA, typename DB>
Var binary(OpKind kind, Var a, Var b, F f, DA da, DB db) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast bc = broadcast(op_name(kind), av, bv);
  Tensor out(bc.out);
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) {
      out[r * bc.cols + c] = f(av[bindex(av, r, c)], bv[bindex(bv, r, c)]);
    }
  }
  return a.tape().record(
      kind, std::move(out), {a, b},
      [bc, da, db](BackwardContext& ctx) {
        const Tensor& x = ctx.input(0);
        const Tensor& y = ctx.input(1);
        const Tensor& g = ctx.out_grad();
        const bool gx = ctx.needs_grad(0);
        const bool gy = ctx.needs_grad(1);
        for (std::size_t r = 0; r < bc.rows; ++r) {
          for (std::size_t c = 0; c < bc.cols; ++c) {
            const std::size_t ix = bindex(x, r, c);
            const std::size_t iy = bindex(y, r, c);
            const double go = g[r * bc.cols + c];
            if (gx) ctx.input_grad(0)[ix] += go * da(x[ix], y[iy]);
            if (gy) ctx.input_grad(1)[iy] += go * db(x[ix], y[iy]);
          }
        }
      });
}

// Elementwise unary op; `d` is the derivative given input x and output y.
template <typename F, typename D>
Var unary(OpKind kind, Var a, F f, D d) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return a.tape().record(kind, std::move(out), {a},
                         [d](BackwardContext& ctx) {
                           const Tensor& x = ctx.input(0);
                           const Tensor& y = ctx.out_value();
                           const Tensor& g = ctx.out_grad();
                           Tensor& gx = ctx.input_grad(0);
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             gx[i] += g[i] * d(x[i], y[i]);
                           }
                         });
}

// Iteration over the 1-D lanes of a tensor along an axis.
struct Lanes {
  std::size_t count, length, stride;
  std::size_t offset(std::size_t lane, const Tensor& t) const {
    return stride == 1 ? lane * length : lane % t.cols();
  }
};

Lanes lanes_of(std::string_view op, const Tensor& t, std::size_t axis) {
  if (t.rank() <= 1) {
    if (axis != 0) {
      throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                           " out of range for shape " + to_string(t.shape()));
    }
    return {1, t.size(), 1};
  }
  if (axis == 1) return {t.rows(), t.cols(), 1};
  if (axis == 0) return {t.cols(), t.rows(), t.cols()};
  throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                       " out of range for shape " + to_string(t.shape()));
}

}  // namespace

// ---- Linear algebra -------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("matmul", av);
  require_matrix("matmul", bv);
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  if (bv.rows() != k) shape_error("matmul", av.shape(), bv.shape());
  Tensor out(Shape{n, m});
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), n, k, m);
  return a.tape().record(
      OpKind::kMatmul, std::move(out), {a, b},
      [n, k, m](BackwardContext& ctx) {
        const double* g = ctx.out_grad().data().data();
        if (ctx.needs_grad(0)) {
          gemm_nt(g, ctx.input(1).data().data(),
                  ctx.input_grad(0).data().data(), n, m, k);
        }
        if (ctx.needs_grad(1)) {
          gemm_tn(ctx.input(0).data().data(), g,
                  ctx.input_grad(1).data().data(), n, k, m);
        }
      });
}

Var matmul_transposed(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("matmul_transposed", av);
  require_matrix("matmul_transposed", bv);
  const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
  if (bv.cols() != k) shape_error("matmul_transposed", av.shape(), bv.shape());
  Tensor out(Shape{n, m});
  gemm_nt(av.data().data(), bv.data().data(), out.data().data(), n, k, m);
  return a.tape().record(
      OpKind::kMatmulTransposed, std::move(out), {a, b},
      [n, k, m](BackwardContext& ctx) {
        const double* g = ctx.out_grad().data().data();
        if (ctx.needs_grad(0)) {
          gemm_nn(g, ctx.input(1).data().data(),
                  ctx.input_grad(0).data().data(), n, m, k);
        }
        if (ctx.needs_grad(1)) {
          gemm_tn(g, ctx.input(0).data().data(),
                  ctx.input_grad(1).data().data(), n, m, k);
        }
      });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_matrix("transpose", av);
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return a.tape().record(OpKind::kTranspose, std::move(out), {a},
                         [r, c](BackwardContext& ctx) {
                           const Tensor& g = ctx.out_grad();
                           Tensor& gx = ctx.input_grad(0);
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               gx.at(i, j) += g.at(j, i);
                         });
}

// ---- Elementwise ----------------------------------------------------------

Var add(Var a, Var b) {
  return binary(
      OpKind::kAdd, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      OpKind::kSub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      OpKind::kMul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      OpKind::kDiv, a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var scale(Var a, double factor) {
  return unary(
      OpKind::kScale, a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      OpKind::kAddScalar, a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary(
      OpKind::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      OpKind::kSigmoid, a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      OpKind::kTanh, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var log(Var a) {
  for (double x : a.value().data()) {
    if (!(x > 0.0)) throw DomainError("log: non-positive argument");
  }
  return unary(
      OpKind::kLog, a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
  for (double x : a.value().data()) {
    if (x < 0.0) throw DomainError("sqrt: negative argument");
  }
  return unary(
      OpKind::kSqrt, a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Var abs(Var a) {
  return unary(
      OpKind::kAbs, a, [](double x) { return std::abs(x); },
      [](double x, double) {
        return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      });
}

Var smooth_l1(Var a) {
  return unary(
      OpKind::kSmoothL1, a,
      [](double x) {
        const double ax = std::abs(x);
        return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
      },
      [](double x, double) {
        if (std::abs(x) < 1.0) return x;
        return x > 0.0 ? 1.0 : -1.0;
      });
}

// ---- Softmax --------------------------------------------------------------

namespace {

Var softmax_impl(OpKind kind, Var a, std::size_t axis, bool log_space) {
  const Tensor& av = a.value();
  const Lanes lanes = lanes_of(op_name(kind), av, axis);
  if (lanes.length == 0) {
    throw DomainError(std::string(op_name(kind)) + ": empty axis");
  }
  Tensor out(av.shape());
  for (std::size_t l = 0; l < lanes.count; ++l) {
    const std::size_t base = lanes.offset(l, av);
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lanes.length; ++i)
      hi = std::max(hi, av[base + i * lanes.stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < lanes.length; ++i)
      total += std::exp(av[base + i * lanes.stride] - hi);
    const double log_total = std::log(total);
    for (std::size_t i = 0; i < lanes.length; ++i) {
      const std::size_t idx = base + i * lanes.stride;
      out[idx] = log_space ? av[idx] - hi - log_total
                           : std::exp(av[idx] - hi) / total;
    }
  }
  return a.tape().record(
      kind, std::move(out), {a}, [lanes, log_space](BackwardContext& ctx) {
        const Tensor& y = ctx.out_value();
        const Tensor& g = ctx.out_grad();
        Tensor& gx = ctx.input_grad(0);
        for (std::size_t l = 0; l < lanes.count; ++l) {
          const std::size_t base = lanes.offset(l, y);
          if (log_space) {
            double gsum = 0.0;
            for (std::size_t i = 0; i < lanes.length; ++i)
              gsum += g[base + i * lanes.stride];
            for (std::size_t i = 0; i < lanes.length; ++i) {
              const std::size_t idx = base + i * lanes.stride;
              gx[idx] += g[idx] - std::exp(y[idx]) * gsum;
            }
          } else {
            double dot = 0.0;
            for (std::size_t i = 0; i < lanes.length; ++i) {
              const std::size_t idx = base + i * lanes.stride;
              dot += g[idx] * y[idx];
            }
            for (std::size_t i = 0; i < lanes.length; ++i) {
              const std::size_t idx = base + i * lanes.stride;
              gx[idx] += y[idx] * (g[idx] - dot);
            }
          }
        }
      });
}

}  // namespace

Var softmax(Var a, std::size_t axis) {
  return softmax_impl(OpKind::kSoftmax, a, axis, false);
}

Var log_softmax(Var a, std::size_t axis) {
  return softmax_impl(OpKind::kLogSoftmax, a, axis, true);
}

// ---- Reductions -----------------------------------------------------------

namespace {

Var full_reduce(OpKind kind, Var a, double factor) {
  const Tensor& av = a.value();
  double total = 0.0;
  for (double x : av.data()) total += x;
  return a.tape().record(kind, Tensor::scalar(total * factor), {a},
                         [factor](BackwardContext& ctx) {
                           const double g = ctx.out_grad()[0] * factor;
                           for (double& x : ctx.input_grad(0).data()) x += g;
                         });
}

Var axis_reduce(OpKind kind, Var a, std::size_t axis, bool average) {
  const Tensor& av = a.value();
  if (av.rank() <= 1) {
    lanes_of(op_name(kind), av, axis);
    if (average && av.size() == 0) {
      throw DomainError(std::string(op_name(kind)) + ": empty axis");
    }
    return full_reduce(kind, a, average ? 1.0 / av.size() : 1.0);
  }
  const Lanes lanes = lanes_of(op_name(kind), av, axis);
  if (average && lanes.length == 0) {
    throw DomainError(std::string(op_name(kind)) + ": empty axis");
  }
  const double factor = average ? 1.0 / lanes.length : 1.0;
  Tensor out(axis == 0 ? Shape{1, av.cols()} : Shape{av.rows(), 1});
  for (std::size_t l = 0; l < lanes.count; ++l) {
    const std::size_t base = lanes.offset(l, av);
    double total = 0.0;
    for (std::size_t i = 0; i < lanes.length; ++i)
      total += av[base + i * lanes.stride];
    out[l] = total * factor;
  }
  return a.tape().record(kind, std::move(out), {a},
                         [lanes, factor](BackwardContext& ctx) {
                           const Tensor& g = ctx.out_grad();
                           Tensor& gx = ctx.input_grad(0);
                           for (std::size_t l = 0; l < lanes.count; ++l) {
                             const std::size_t base = lanes.offset(l, gx);
                             for (std::size_t i = 0; i < lanes.length; ++i)
                               gx[base + i * lanes.stride] += g[l] * factor;
                           }
                         });
}

}  // namespace

Var sum(Var a) { return full_reduce(OpKind::kSum, a, 1.0); }

Var mean(Var a) {
  if (a.value().size() == 0) throw DomainError("mean: empty tensor");
  return full_reduce(OpKind::kMean, a, 1.0 / a.value().size());
}

Var sum(Var a, std::size_t axis) {
  return axis_reduce(OpKind::kSumAxis, a, axis, false);
}

Var mean(Var a, std::size_t axis) {
  return axis_reduce(OpKind::kMeanAxis, a, axis, true);
}

// ---- Structural -----------------------------------------------------------

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != rows) {
      shape_error("concat_cols", parts[0].shape(), p.shape());
    }
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out(Shape{rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c)
        out.at(r, offset + c) = v[r * widths[k] + c];
    offset += widths[k];
  }
  return parts[0].tape().record(
      OpKind::kConcatCols, std::move(out), parts,
      [rows, widths, total](BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (ctx.needs_grad(k)) {
            Tensor& gx = ctx.input_grad(k);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < widths[k]; ++c)
                gx[r * widths[k] + c] += g[r * total + offset + c];
          }
          offset += widths[k];
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  const std::size_t cols = parts[0].value().cols();
  std::vector<std::size_t> sizes;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.value().cols() != cols) {
      shape_error("concat_rows", parts[0].shape(), p.shape());
    }
    sizes.push_back(p.value().size());
    rows += p.value().rows();
  }
  Tensor out(Shape{rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto src = p.value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + offset);
    offset += src.size();
  }
  return parts[0].tape().record(
      OpKind::kConcatRows, std::move(out), parts,
      [sizes](BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
          if (ctx.needs_grad(k)) {
            Tensor& gx = ctx.input_grad(k);
            for (std::size_t i = 0; i < sizes[k]; ++i) gx[i] += g[offset + i];
          }
          offset += sizes[k];
        }
      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix("slice_cols", av);
  if (begin >= end || end > av.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for shape " +
                         to_string(av.shape()));
  }
  const std::size_t rows = av.rows(), cols = av.cols(), width = end - begin;
  Tensor out(Shape{rows, width});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) out.at(r, c) = av.at(r, begin + c);
  return a.tape().record(OpKind::kSliceCols, std::move(out), {a},
                         [rows, cols, width, begin](BackwardContext& ctx) {
                           const Tensor& g = ctx.out_grad();
                           Tensor& gx = ctx.input_grad(0);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < width; ++c)
                               gx[r * cols + begin + c] += g[r * width + c];
                         });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix("slice_rows", av);
  if (begin >= end || end > av.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for shape " +
                         to_string(av.shape()));
  }
  const std::size_t cols = av.cols();
  std::vector<double> values(av.data().begin() + begin * cols,
                             av.data().begin() + end * cols);
  return a.tape().record(
      OpKind::kSliceRows, Tensor(Shape{end - begin, cols}, std::move(values)),
      {a}, [begin, cols](BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        Tensor& gx = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin * cols + i] += g[i];
      });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value();
  require_matrix("gather_rows", tv);
  const std::size_t d = tv.cols();
  Tensor out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(ids[i]) +
                           " out of range for shape " + to_string(tv.shape()));
    }
    for (std::size_t c = 0; c < d; ++c) out.at(i, c) = tv.at(ids[i], c);
  }
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return table.tape().record(OpKind::kGatherRows, std::move(out), {table},
                             [rows, d](BackwardContext& ctx) {
                               const Tensor& g = ctx.out_grad();
                               Tensor& gx = ctx.input_grad(0);
                               for (std::size_t i = 0; i < rows.size(); ++i)
                                 for (std::size_t c = 0; c < d; ++c)
                                   gx[rows[i] * d + c] += g[i * d + c];
                             });
}

Var pick(Var a, std::span<const std::size_t> cols) {
  const Tensor& av = a.value();
  require_matrix("pick", av);
  if (cols.size() != av.rows()) {
    throw DimensionError("pick: " + std::to_string(cols.size()) +
                         " indices for shape " + to_string(av.shape()));
  }
  const std::size_t width = av.cols();
  Tensor out(Shape{cols.size()});
  for (std::size_t r = 0; r < cols.size(); ++r) {
    if (cols[r] >= width) {
      throw DimensionError("pick: column " + std::to_string(cols[r]) +
                           " out of range for shape " + to_string(av.shape()));
    }
    out[r] = av.at(r, cols[r]);
  }
  std::vector<std::size_t> index(cols.begin(), cols.end());
  return a.tape().record(OpKind::kPick, std::move(out), {a},
                         [index, width](BackwardContext& ctx) {
                           const Tensor& g = ctx.out_grad();
                           Tensor& gx = ctx.input_grad(0);
                           for (std::size_t r = 0; r < index.size(); ++r)
                             gx[r * width + index[r]] += g[r];
                         });
}

Var reshape(Var a, Shape shape) {
  const Tensor& av = a.value();
  if (shape_size(shape) != av.size()) shape_error("reshape", av.shape(), shape);
  std::vector<double> values(av.data().begin(), av.data().end());
  return a.tape().record(OpKind::kReshape,
                         Tensor(std::move(shape), std::move(values)), {a},
                         [](BackwardContext& ctx) {
                           const Tensor& g = ctx.out_grad();
                           Tensor& gx = ctx.input_grad(0);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             gx[i] += g[i];
                         });
}

Var broadcast_rows(Var row, std::size_t n) {
  const Tensor& rv = row.value();
  if (rv.rows() != 1) {
    throw DimensionError("broadcast_rows: expected a single row, got " +
                         to_string(rv.shape()));
  }
  const std::size_t d = rv.cols();
  Tensor out(Shape{n, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out.at(r, c) = rv[c];
  return row.tape().record(OpKind::kBroadcastRows, std::move(out), {row},
                           [n, d](BackwardContext& ctx) {
                             const Tensor& g = ctx.out_grad();
                             Tensor& gx = ctx.input_grad(0);
                             for (std::size_t r = 0; r < n; ++r)
                               for (std::size_t c = 0; c < d; ++c)
                                 gx[c] += g[r * d + c];
                           });
}

}  // namespace kac
