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

#include "kac/layers.hpp"

#include <cmath>

#include "kac/errors.hpp"

namespace kac {

Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(Shape{fan_out, fan_in});
  for (double& x : t.data()) x = dist(rng);
  return t;
}

// ---- FcLayer --------------------------------------------------------------

FcLayer::FcLayer(const std::string& name, std::size_t in, std::size_t out,
                 Rng& rng, bool with_bias)
    : weight(name + ".weight", xavier_uniform(out, in, rng)),
      bias(name + ".bias", Tensor(Shape{out})),
      has_bias_(with_bias) {}

Var FcLayer::forward(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != in_features()) {
    throw DimensionError("fc_forward(" + weight.name + "): input " +
                         to_string(xv.shape()) + " vs weight " +
                         to_string(weight.value.shape()));
  }
  Tape& tape = x.tape();
  Var y = matmul_transposed(x, tape.param(weight));
  return has_bias_ ? add(y, tape.param(bias)) : y;
}

void FcLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (has_bias_) out.push_back(&bias);
}

// ---- LstmCell -------------------------------------------------------------

LstmCell::LstmCell(const std::string& name, std::size_t input_size,
                   std::size_t hidden_size, Rng& rng)
    : w_input(name + ".w_input", xavier_uniform(4 * hidden_size, input_size, rng)),
      w_hidden(name + ".w_hidden",
               xavier_uniform(4 * hidden_size, hidden_size, rng)),
      bias(name + ".bias", Tensor(Shape{4 * hidden_size})) {
  for (std::size_t j = hidden_size; j < 2 * hidden_size; ++j) {
    bias.value[j] = 1.0;
  }
}

std::pair<Var, Var> LstmCell::step(Var x, Var h, Var c) {
  const std::size_t d = hidden_size();
  const Tensor& xv = x.value();
  const Tensor& hv = h.value();
  const Tensor& cv = c.value();
  if (xv.rank() != 2 || xv.cols() != input_size() || hv.rank() != 2 ||
      hv.cols() != d || cv.shape() != hv.shape() || hv.rows() != xv.rows()) {
    throw DimensionError("recurrent_step(" + w_input.name + "): x " +
                         to_string(xv.shape()) + ", h " +
                         to_string(hv.shape()) + ", c " +
                         to_string(cv.shape()) + " for input size " +
                         std::to_string(input_size()) + ", hidden size " +
                         std::to_string(d));
  }
  Tape& tape = x.tape();
  Var z = add(add(matmul_transposed(x, tape.param(w_input)),
                  matmul_transposed(h, tape.param(w_hidden))),
              tape.param(bias));
  Var in_gate = sigmoid(slice_cols(z, 0, d));
  Var forget_gate = sigmoid(slice_cols(z, d, 2 * d));
  Var candidate = tanh(slice_cols(z, 2 * d, 3 * d));
  Var out_gate = sigmoid(slice_cols(z, 3 * d, 4 * d));
  Var c_next = add(mul(forget_gate, c), mul(in_gate, candidate));
  Var h_next = mul(out_gate, tanh(c_next));
  return {h_next, c_next};
}

void LstmCell::collect(std::vector<Parameter*>& out) {
  out.push_back(&w_input);
  out.push_back(&w_hidden);
  out.push_back(&bias);
}

// ---- BatchNorm ------------------------------------------------------------

BatchNorm::BatchNorm(const std::string& name, std::size_t features,
                     double momentum_, double epsilon_)
    : gamma(name + ".gamma", Tensor(Shape{features}, 1.0)),
      beta(name + ".beta", Tensor(Shape{features})),
      running_mean(Shape{features}),
      running_var(Shape{features}, 1.0),
      momentum(momentum_),
      epsilon(epsilon_) {}

Var BatchNorm::forward(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != features()) {
    throw DimensionError("batch_norm_forward(" + gamma.name + "): input " +
                         to_string(xv.shape()) + " for " +
                         std::to_string(features()) + " features");
  }
  Tape& tape = x.tape();
  Var normalized;
  if (training) {
    if (xv.rows() < 2) {
      throw ContractError("batch_norm_forward: train mode needs >= 2 rows, got " +
                          std::to_string(xv.rows()));
    }
    Var mu = mean(x, 0);
    Var centered = sub(x, mu);
    Var var = mean(mul(centered, centered), 0);
    normalized = div(centered, sqrt(add_scalar(var, epsilon)));
    const Tensor& mv = mu.value();
    const Tensor& vv = var.value();
    for (std::size_t j = 0; j < features(); ++j) {
      running_mean[j] = momentum * running_mean[j] + (1.0 - momentum) * mv[j];
      running_var[j] = momentum * running_var[j] + (1.0 - momentum) * vv[j];
    }
  } else {
    Tensor denom(Shape{features()});
    for (std::size_t j = 0; j < features(); ++j) {
      denom[j] = std::sqrt(running_var[j] + epsilon);
    }
    normalized = div(sub(x, tape.constant(running_mean)),
                     tape.constant(std::move(denom)));
  }
  return add(mul(normalized, tape.param(gamma)), tape.param(beta));
}

void BatchNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

// ---- Adam -----------------------------------------------------------------

void Adam::step(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    if (p->grad.shape() != p->value.shape()) {
      throw DimensionError("adam_step: gradient of " + p->name + " has shape " +
                           to_string(p->grad.shape()) + ", parameter " +
                           to_string(p->value.shape()));
    }
    for (double g : p->grad.data()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in " + p->name);
      }
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (Parameter* p : params) {
    auto [it, inserted] = moments_.try_emplace(p);
    Moments& m = it->second;
    if (inserted) {
      m.first = Tensor(p->value.shape());
      m.second = Tensor(p->value.shape());
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m.first[i] = config_.beta1 * m.first[i] + (1.0 - config_.beta1) * g;
      m.second[i] = config_.beta2 * m.second[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m.first[i] / correction1;
      const double v_hat = m.second[i] / correction2;
      p->value[i] -=
          config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double total = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data()) total += g * g;
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.data()) g *= factor;
  }
  return norm;
}

Var l2_regularizer(Tape& tape, std::span<FcLayer* const> layers) {
  Var total = tape.constant(Tensor::scalar(0.0));
  for (FcLayer* layer : layers) {
    Var w = tape.param(layer->weight);
    total = add(total, sum(mul(w, w)));
  }
  return total;
}

}  // namespace kac
