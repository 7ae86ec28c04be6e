/*
 * Copyright 2026 The rmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include "oracles.hpp"
#include "rmamba/gradcheck.hpp"
#include "rmamba/ops.hpp"

using namespace rmamba;

TEST_CASE("tensor construction keeps shape and data in step") {
  const auto t = Tensor<float>::zeros({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(numel(t.shape()) == t.size());
  CHECK(t.dim(-1) == 4);
  CHECK_THROWS_AS(Tensor<float>({2, 2}, Tensor<float>::Array::Zero(3)), DimensionError);
  CHECK(Tensor<float>::from({2}, {1.f, 2.f}).at({1}) == 2.f);
}

TEST_CASE("sum(x) has an all-ones gradient") {
  Tape<double>::active().clear();
  auto x = Tensor<double>::from({3}, {1, -2, 5}, true);
  backward(sum(x));
  CHECK((x.grad() == 1.0).all());
  CHECK(x.grad().size() == x.size());
}

TEST_CASE("sigmoid slope at zero is a quarter") {
  Tape<double>::active().clear();
  auto x = Tensor<double>::scalar(0.0, true);
  backward(sigmoid(x));
  CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("silu at zero: value 0, slope one half") {
  Tape<double>::active().clear();
  auto x = Tensor<double>::scalar(0.0, true);
  auto y = silu(x);
  CHECK(y.item() == 0.0);
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(0.5).epsilon(1e-12));
  const auto fd = finite_diff_grad<double>([](const Tensor<double>& v) { return silu(v); },
                                           Tensor<double>::scalar(0.0), 1e-6);
  CHECK(fd.item() == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("fan-out gradients add up") {
  Tape<double>::active().clear();
  auto x = Tensor<double>::from({2}, {0.3, -0.7}, true);
  backward(sum(add(exp(x), mul(x, x))));
  for (Index i = 0; i < 2; ++i) {
    const double v = x.data()[i];
    CHECK(x.grad()[i] == doctest::Approx(std::exp(v) + 2 * v).epsilon(1e-12));
  }
}

TEST_CASE("backward rejects non-scalar and detached losses") {
  Tape<double>::active().clear();
  auto x = Tensor<double>::from({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), AutodiffError);
  auto c = Tensor<double>::scalar(3.0);
  CHECK_THROWS_AS(backward(c), AutodiffError);
  CHECK_THROWS_AS(backward(sum(x).detach()), AutodiffError);
}

TEST_CASE("NoGradGuard suppresses recording") {
  auto& tape = Tape<float>::active();
  tape.clear();
  auto x = Tensor<float>::ones({4}, true);
  {
    NoGradGuard guard;
    auto y = sum(x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(tape.size() == 0);
  auto y = sum(x);
  CHECK(y.requires_grad());
  CHECK(tape.size() == 1);
  tape.clear();
}

TEST_CASE("finite_diff_grad: sum of squares and sigmoid") {
  const auto g = finite_diff_grad<double>(
      [](const Tensor<double>& v) { return sum(mul(v, v)); }, Tensor<double>::from({2}, {1, 2}),
      1e-4);
  CHECK(g.data()[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(g.data()[1] == doctest::Approx(4.0).epsilon(1e-6));
  const auto s = finite_diff_grad<double>([](const Tensor<double>& v) { return sigmoid(v); },
                                          Tensor<double>::scalar(0.0), 1e-4);
  CHECK(s.item() == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("non-finite forward values raise when checks are on") {
  set_finite_checks(true);
  const auto x = Tensor<float>::from({2}, {0.f, 1.f});
  CHECK_THROWS_AS(log(x), NumericError);
  set_finite_checks(false);
  CHECK_NOTHROW(log(x));
}

TEST_CASE("identical inputs give bit-identical outputs") {
  std::mt19937_64 r1(5), r2(5);
  const auto a = oracle::random_tensor<float>({2, 3, 6, 6}, r1);
  const auto b = oracle::random_tensor<float>({2, 3, 6, 6}, r2);
  const auto w = oracle::random_tensor<float>({4, 3, 3, 3}, r1);
  const auto ya = conv2d(a, w, Tensor<float>(), 1, 1);
  const auto yb = conv2d(b, w, Tensor<float>(), 1, 1);
  CHECK((ya.data() == yb.data()).all());
}
