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

#include "kac/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "kac/errors.hpp"

namespace kac {

namespace {

double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("gradient check: non-finite ") + what);
  }
  return v;
}

void consider(GradCheckResult& result, std::size_t operand, std::size_t index,
              double analytic, double numeric) {
  finite_or_throw(analytic, "analytic gradient");
  finite_or_throw(numeric, "numeric gradient");
  const double denom =
      std::max(1e-6, std::abs(analytic) + std::abs(numeric));
  const double err = std::abs(analytic - numeric) / denom;
  if (err >= result.max_relative_error) {
    result = {err, operand, index, analytic, numeric};
  }
}

}  // namespace

GradCheckResult check_gradients(const TensorFunction& f,
                                const std::vector<Tensor>& inputs, double h) {
  if (!(h > 0.0)) throw ContractError("gradient check: step must be positive");
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.input(t));
    Var loss = f(tape, vars);
    finite_or_throw(loss.value().item(), "loss");
    tape.backward(loss);
    for (const Var& v : vars) analytic.push_back(tape.grad(v));
  }
  auto evaluate = [&](const std::vector<Tensor>& point) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : point) vars.push_back(tape.input(t));
    return finite_or_throw(f(tape, vars).value().item(), "loss");
  };
  GradCheckResult result;
  std::vector<Tensor> point = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      point[k][i] = x0 + h;
      const double up = evaluate(point);
      point[k][i] = x0 - h;
      const double down = evaluate(point);
      point[k][i] = x0;
      consider(result, k, i, analytic[k][i], (up - down) / (2.0 * h));
    }
  }
  return result;
}

double finite_difference_check(const std::function<Var(Tape&, Var)>& f,
                               const Tensor& x, double h) {
  return check_gradients(
             [&](Tape& tape, std::span<const Var> v) { return f(tape, v[0]); },
             {x}, h)
      .max_relative_error;
}

GradCheckResult check_parameter_gradients(
    std::span<Parameter* const> params, const std::function<Var(Tape&)>& f,
    double h) {
  if (!(h > 0.0)) throw ContractError("gradient check: step must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    finite_or_throw(loss.value().item(), "loss");
    tape.backward(loss);
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);
  auto evaluate = [&] {
    Tape tape;
    return finite_or_throw(f(tape).value().item(), "loss");
  };
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k]->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      // Five-point stencil: truncation error O(h^4).
      const double x0 = value[i];
      auto at = [&](double offset) {
        value[i] = x0 + offset;
        return evaluate();
      };
      const double near = at(h) - at(-h);
      const double far = at(2.0 * h) - at(-2.0 * h);
      value[i] = x0;
      consider(result, k, i, analytic[k][i], (8.0 * near - far) / (12.0 * h));
    }
  }
  return result;
}

}  // namespace kac
