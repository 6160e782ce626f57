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

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kac/tensor.hpp"

namespace kac {

// A named learnable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

enum class OpKind {
  kConstant,
  kInput,
  kParameter,
  kMatmul,
  kMatmulTransposed,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddScalar,
  kRelu,
  kSigmoid,
  kTanh,
  kSoftmax,
  kLogSoftmax,
  kLog,
  kSqrt,
  kAbs,
  kSmoothL1,
  kSum,
  kMean,
  kSumAxis,
  kMeanAxis,
  kConcatCols,
  kConcatRows,
  kSliceCols,
  kSliceRows,
  kGatherRows,
  kPick,
  kReshape,
  kBroadcastRows,
  kCustom,
};

std::string_view op_name(OpKind kind);

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
// tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// View handed to a node's backward rule.
class BackwardContext {
 public:
  const Tensor& out_value() const;
  const Tensor& out_grad() const;
  std::size_t num_inputs() const { return parents_.size(); }
  const Tensor& input(std::size_t i) const;
  bool needs_grad(std::size_t i) const;
  // Gradient buffer of input i; accumulate into it. Only valid when
  // needs_grad(i).
  Tensor& input_grad(std::size_t i);

 private:
  friend class Tape;
  BackwardContext(Tape& tape, std::size_t node,
                  const std::vector<std::size_t>& parents)
      : tape_(tape), node_(node), parents_(parents) {}

  Tape& tape_;
  std::size_t node_;
  const std::vector<std::size_t>& parents_;
};

// Dynamically built computation record. Nodes are appended in evaluation
// order, so the node list is always topologically sorted. A tape and its
// values belong to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void(BackwardContext&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf that receives a gradient.
  Var input(Tensor value);
  // Leaf bound to a parameter. Binding the same parameter twice returns the
  // same node; backward() accumulates into Parameter::grad.
  Var param(Parameter& parameter);

  // Appends a node. When no parent requires a gradient the node is recorded
  // as a constant and `backward` is dropped.
  Var record(OpKind kind, Tensor value, std::span<const Var> parents,
             BackwardFn backward);
  Var record(OpKind kind, Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward) {
    return record(kind, std::move(value),
                  std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  // Reverse sweep from a scalar loss. Each node is visited once, gradients
  // add across fan-out. Parameters bound to this tape have their gradient
  // added to Parameter::grad; parameters the loss does not reach get zero.
  void backward(Var loss);

  // Gradient of a node after backward(); zeros for unreached nodes.
  const Tensor& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.id()).kind; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const {
    return nodes_.at(id).requires_grad;
  }

 private:
  friend class BackwardContext;

  struct Node {
    OpKind kind;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  Tensor& grad_buffer(std::size_t id);

  // Deque keeps references to earlier values stable as nodes are appended.
  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> bound_;
  bool backward_done_ = false;
};

// ---- Primitives -----------------------------------------------------------
//
// Shapes: "matrix" means rank 2; rank-1 operands act as a single row.
// Binary elementwise ops broadcast a side whose row or column count is 1.

// [n x k] . [k x m] -> [n x m]
Var matmul(Var a, Var b);
// [n x k] . [m x k]^T -> [n x m]
Var matmul_transposed(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var log(Var a);
Var sqrt(Var a);
Var abs(Var a);
// Elementwise 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
Var smooth_l1(Var a);

// Softmax along `axis`. Rank-1 inputs only accept axis 0.
Var softmax(Var a, std::size_t axis);
Var log_softmax(Var a, std::size_t axis);

// Full reductions to a rank-0 scalar.
Var sum(Var a);
Var mean(Var a);
// Reductions of a rank-2 input along one axis, keeping that axis with
// extent 1. Rank-1 input reduces to a scalar.
Var sum(Var a, std::size_t axis);
Var mean(Var a, std::size_t axis);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
// Columns [begin, end) of a matrix.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
// Rows [begin, end) of a matrix; result stays rank 2.
Var slice_rows(Var a, std::size_t begin, std::size_t end);
// Rows `ids` of a [V x d] table -> [ids.size() x d].
Var gather_rows(Var table, std::span<const std::size_t> ids);
// Element (r, cols[r]) of each row of a [R x C] matrix -> [R].
Var pick(Var a, std::span<const std::size_t> cols);
Var reshape(Var a, Shape shape);
// Repeats a single row n times -> [n x d].
Var broadcast_rows(Var row, std::size_t n);

}  // namespace kac
