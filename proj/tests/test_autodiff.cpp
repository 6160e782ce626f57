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

#include <doctest.h>

#include <cmath>
#include <string>

#include "kac/autodiff.hpp"
#include "kac/errors.hpp"
#include "kac/gradcheck.hpp"
#include "support/fixtures.hpp"
#include "support/primitive_cases.hpp"

using namespace kac;
using kac::test::uniform;

namespace {

bool message_contains(const std::function<void()>& fn, const std::string& text) {
  try {
    fn();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(text) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_CASE("tensor shapes and accessors") {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6.0);
  Tensor v = Tensor::vector({1, 2});
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 2);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK(Tensor().item() == 0.0);
  CHECK(shape_size(Shape{2, 3}) == 6);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 1}), DimensionError);
  CHECK_THROWS_AS(m.item(), DimensionError);
}

TEST_CASE("primitive forward values") {
  Tape tape;
  SUBCASE("softmax of equal logits is uniform") {
    Var s = softmax(tape.constant(Tensor::vector({0.0, 0.0})), 0);
    CHECK(s.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.value()[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("relu clips negatives") {
    Var r = relu(tape.constant(Tensor::vector({-1.0, 0.0, 2.0})));
    CHECK(r.value().values() == std::vector<double>{0.0, 0.0, 2.0});
  }
  SUBCASE("sigmoid at one") {
    Var s = sigmoid(tape.constant(Tensor::scalar(1.0)));
    CHECK(std::fabs(s.value().item() - 0.7310585786300049) < 1e-12);
  }
  SUBCASE("softmax of [2, 1, 0]") {
    Var s = softmax(tape.constant(Tensor::vector({2.0, 1.0, 0.0})), 0);
    CHECK(std::fabs(s.value()[0] - 0.66524095589355) < 1e-9);
    CHECK(std::fabs(s.value()[1] - 0.24472847105479767) < 1e-9);
    CHECK(std::fabs(s.value()[2] - 0.09003057317038046) < 1e-9);
  }
  SUBCASE("matmul against a scalar triple loop") {
    Rng rng(3);
    const Tensor a = kac::test::random_tensor({3, 4}, rng);
    const Tensor b = kac::test::random_tensor({4, 2}, rng);
    Var c = matmul(tape.constant(a), tape.constant(b));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 4; ++k) acc += a.at(i, k) * b.at(k, j);
        CHECK(std::fabs(c.value().at(i, j) - acc) < 1e-14);
      }
  }
  SUBCASE("large logits do not overflow") {
    Var s = softmax(tape.constant(Tensor::vector({1000.0, 0.0})), 0);
    CHECK(s.value()[0] == 1.0);
    Var l = log_softmax(tape.constant(Tensor::vector({1000.0, 0.0})), 0);
    CHECK(l.value()[1] == doctest::Approx(-1000.0));
  }
  SUBCASE("smooth l1 branches") {
    Var s = smooth_l1(tape.constant(Tensor::vector({0.5, 1.0, 2.0, -2.0})));
    CHECK(s.value().values() == std::vector<double>{0.125, 0.5, 1.5, 1.5});
  }
}

TEST_CASE("softmax rows sum to one and stay positive") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    Var s = softmax(tape.constant(kac::test::random_tensor({4, 6}, rng, -20, 20)), 1);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 6; ++c) {
        CHECK(s.value().at(r, c) > 0.0);
        total += s.value().at(r, c);
      }
      CHECK(std::fabs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("relu is idempotent") {
  Rng rng(12);
  Tape tape;
  Var x = tape.constant(kac::test::random_tensor({3, 5}, rng));
  CHECK(relu(relu(x)).value() == relu(x).value());
}

TEST_CASE("backward basics") {
  SUBCASE("gradient of a sum is all ones") {
    Tape tape;
    Var x = tape.input(Tensor(Shape{2, 3}, 0.7));
    tape.backward(sum(x));
    for (double g : tape.grad(x).data()) CHECK(g == 1.0);
  }
  SUBCASE("sigmoid slope at zero") {
    Tape tape;
    Var x = tape.input(Tensor::scalar(0.0));
    tape.backward(sigmoid(x));
    CHECK(tape.grad(x).item() == 0.25);
  }
  SUBCASE("fan-out accumulates") {
    Tape tape;
    Var x = tape.input(Tensor::scalar(3.0));
    tape.backward(add(mul(x, x), x));
    CHECK(tape.grad(x).item() == 7.0);
  }
  SUBCASE("unreached parameters get zero gradients") {
    Parameter used("used", Tensor::vector({1.0, 2.0}));
    Parameter unused("unused", Tensor::vector({5.0}));
    Tape tape;
    Var a = tape.param(used);
    tape.param(unused);
    tape.backward(sum(mul(a, a)));
    CHECK(used.grad.values() == std::vector<double>{2.0, 4.0});
    CHECK(unused.grad.values() == std::vector<double>{0.0});
    CHECK(unused.grad.shape() == unused.value.shape());
  }
  SUBCASE("parameter gradients accumulate across tapes") {
    Parameter p("p", Tensor::scalar(2.0));
    for (int pass = 0; pass < 2; ++pass) {
      Tape tape;
      Var v = tape.param(p);
      tape.backward(mul(v, v));
    }
    CHECK(p.grad.item() == 8.0);
  }
  SUBCASE("constants record no backward rule") {
    Tape tape;
    Var c = tape.constant(Tensor::scalar(2.0));
    Var y = mul(c, c);
    CHECK_FALSE(y.requires_grad());
  }
}

TEST_CASE("backward contract errors") {
  Tape tape;
  Var x = tape.input(Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(tape.grad(x), ContractError);
  CHECK_THROWS_AS(tape.backward(x), ContractError);
  Tape other;
  Var y = other.input(Tensor::scalar(1.0));
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("primitive errors name the operation and shapes") {
  Tape tape;
  Var a = tape.constant(Tensor(Shape{2, 3}));
  Var b = tape.constant(Tensor(Shape{2, 2}));
  CHECK(message_contains([&] { matmul(a, a); }, "matmul"));
  CHECK(message_contains([&] { matmul(a, a); }, "[2 x 3]"));
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(concat_cols(std::span<const Var>{}), DimensionError);
  CHECK_THROWS_AS(slice_cols(a, 2, 5), DimensionError);
  CHECK_THROWS_AS(log(tape.constant(Tensor::vector({1.0, 0.0}))), DomainError);
  CHECK_THROWS_AS(sqrt(tape.constant(Tensor::vector({-1.0}))), DomainError);
  CHECK_THROWS_AS(softmax(tape.constant(Tensor(Shape{0})), 0), DomainError);
  CHECK_THROWS_AS(softmax(a, 2), DimensionError);
}

TEST_CASE("every primitive matches central finite differences") {
  for (const auto& c : kac::test::primitive_cases()) {
    CAPTURE(c.name);
    Rng rng(1000);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inputs = kac::test::sample_inputs(c, rng);
      const GradCheckResult r = check_gradients(
          [&](Tape& t, std::span<const Var> v) {
            return kac::test::weighted_total(c.op(t, v));
          },
          inputs, 1e-5);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("finite difference check of a square") {
  const double err = finite_difference_check(
      [](Tape&, Var x) { return mul(x, x); }, Tensor::scalar(3.0), 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("random three layer composition") {
  Rng rng(21);
  const Tensor w1 = kac::test::random_tensor({4, 3}, rng);
  const Tensor w2 = kac::test::random_tensor({3, 2}, rng);
  const Tensor x = kac::test::random_tensor({2, 4}, rng);
  const double err = finite_difference_check(
      [&](Tape& t, Var in) {
        Var h1 = tanh(matmul(in, t.constant(w1)));
        Var h2 = sigmoid(matmul(h1, t.constant(w2)));
        return mean(log_softmax(h2, 1));
      },
      x, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("a wrong backward rule is caught") {
  // Square with a derivative of 3x instead of 2x.
  auto broken_square = [](Var x) {
    Tensor out = x.value();
    for (double& v : out.data()) v = v * v;
    return x.tape().record(OpKind::kCustom, std::move(out), {x},
                           [](BackwardContext& ctx) {
                             for (std::size_t i = 0; i < ctx.out_grad().size(); ++i) {
                               ctx.input_grad(0)[i] +=
                                   3.0 * ctx.input(0)[i] * ctx.out_grad()[i];
                             }
                           });
  };
  Rng rng(5);
  const double err = finite_difference_check(
      [&](Tape&, Var x) { return sum(broken_square(x)); },
      kac::test::random_tensor({2, 2}, rng, 0.5, 1.5), 1e-5);
  CHECK(err > 1e-2);
}

TEST_CASE("finite difference check rejects non-finite values") {
  CHECK_THROWS_AS(finite_difference_check(
                      [](Tape&, Var x) { return scale(sum(x), INFINITY); },
                      Tensor::scalar(1.0), 1e-5),
                  NumericError);
  CHECK_THROWS_AS(finite_difference_check([](Tape&, Var x) { return x; },
                                          Tensor::scalar(1.0), 0.0),
                  ContractError);
}

TEST_CASE("gradient linearity") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = kac::test::random_tensor({3, 3}, rng);
    const double a = uniform(rng, -2, 2), b = uniform(rng, -2, 2);
    auto f = [](Var v) { return sum(tanh(v)); };
    auto g = [](Var v) { return mean(mul(v, sigmoid(v))); };
    Tape t1;
    Var x1 = t1.input(x);
    t1.backward(add(scale(f(x1), a), scale(g(x1), b)));
    Tape t2;
    Var x2 = t2.input(x);
    t2.backward(f(x2));
    Tape t3;
    Var x3 = t3.input(x);
    t3.backward(g(x3));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::fabs(t1.grad(x1)[i] - (a * t2.grad(x2)[i] + b * t3.grad(x3)[i])) <
            1e-10);
    }
  }
}

TEST_CASE("gradient buffers match value shapes") {
  Tape tape;
  Var a = tape.input(Tensor(Shape{2, 3}, 1.0));
  Var b = tape.input(Tensor::vector({1.0, 2.0, 3.0}));
  tape.backward(sum(add(a, b)));
  CHECK(tape.grad(a).shape() == Shape{2, 3});
  CHECK(tape.grad(b).shape() == Shape{3});
  CHECK(tape.grad(b).values() == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("op names") {
  CHECK(op_name(OpKind::kMatmul) == "matmul");
  CHECK(op_name(OpKind::kSoftmax) == "softmax");
}
