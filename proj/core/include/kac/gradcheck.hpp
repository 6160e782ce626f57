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
#include <functional>
#include <span>
#include <vector>

#include "kac/autodiff.hpp"

namespace kac {

struct GradCheckResult {
  double max_relative_error = 0.0;
  // Location of the worst coordinate: operand index and flat offset.
  std::size_t operand = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of a scalar function against central
// differences. Relative error per coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Throws NumericError on non-finite values.
using TensorFunction = std::function<Var(Tape&, std::span<const Var>)>;
GradCheckResult check_gradients(const TensorFunction& f,
                                const std::vector<Tensor>& inputs, double h);

// Single-input convenience form; returns the max relative error.
double finite_difference_check(const std::function<Var(Tape&, Var)>& f,
                               const Tensor& x, double h);

// Same check over parameters that `f` binds through Tape::param.
GradCheckResult check_parameter_gradients(
    std::span<Parameter* const> params, const std::function<Var(Tape&)>& f,
    double h);

}  // namespace kac
