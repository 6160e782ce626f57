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
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kac/autodiff.hpp"

namespace kac {

using Rng = std::mt19937_64;

// Uniform Xavier/Glorot initialization of a [fan_out x fan_in] matrix.
Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng);

// Fully connected layer computing x W^T + b for x of shape [batch x in].
class FcLayer {
 public:
  FcLayer() = default;
  FcLayer(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
          bool with_bias = true);

  Var forward(Var x);

  std::size_t in_features() const { return weight.value.cols(); }
  std::size_t out_features() const { return weight.value.rows(); }
  bool has_bias() const { return has_bias_; }
  void collect(std::vector<Parameter*>& out);

  Parameter weight;  // [out x in]
  Parameter bias;    // [out], unused when has_bias() is false

 private:
  bool has_bias_ = true;
};

// Single-layer LSTM cell. Gate blocks in the stacked weights are ordered
// input, forget, candidate, output.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t input_size,
           std::size_t hidden_size, Rng& rng);

  // One step: i, f, o = sigmoid, g = tanh, c' = f*c + i*g, h' = o*tanh(c').
  // Inputs are [batch x input_size] and [batch x hidden_size].
  std::pair<Var, Var> step(Var x, Var h, Var c);

  std::size_t input_size() const { return w_input.value.cols(); }
  std::size_t hidden_size() const { return w_hidden.value.cols(); }
  void collect(std::vector<Parameter*>& out);

  Parameter w_input;   // [4d x input_size]
  Parameter w_hidden;  // [4d x d]
  Parameter bias;      // [4d]
};

// Per-column batch normalization over the rows of a [rows x m] input.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, std::size_t features,
            double momentum = 0.9, double epsilon = 1e-5);

  // Train mode normalizes by the batch's biased statistics and folds them
  // into the running estimates (running = momentum * running + (1 -
  // momentum) * batch). Eval mode uses the running estimates only.
  Var forward(Var x);

  std::size_t features() const { return gamma.value.size(); }
  void collect(std::vector<Parameter*>& out);

  Parameter gamma;  // scale [m]
  Parameter beta;   // shift [m]
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;
  bool training = true;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are created on first use of a
// parameter.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<Parameter* const> params);

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    Tensor first;
    Tensor second;
  };
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::unordered_map<const Parameter*, Moments> moments_;
};

// Rescales all gradients so their joint l2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

// Sum of squared Frobenius norms of the layers' weight matrices. Biases are
// not included.
Var l2_regularizer(Tape& tape, std::span<FcLayer* const> layers);

}  // namespace kac
