// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dtsv/autodiff/grad_check.hpp"
#include "dtsv/autodiff/ops.hpp"
#include "dtsv/error.hpp"
#include "grad_suite.hpp"
#include "support.hpp"

using namespace dtsv;
using ad::Graph;
using ad::Tensor;
using ad::Var;

TEST_CASE("every op passes the finite-difference check on ten random shapes") {
  for (const auto& r : testing::run_op_grad_suite(2024)) {
    CAPTURE(r.name);
    CHECK(r.shapes == 10);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("softmax of a constant vector is uniform and rows sum to one") {
  Graph g;
  const Var u = ad::softmax(g.constant(Tensor({1, 7}, 3.25)), 1);
  for (double v : u.value().values()) CHECK(v == doctest::Approx(1.0 / 7.0).epsilon(1e-15));

  Rng rng(5);
  const Var a = g.constant(testing::random_tensor({4, 9}, rng, 5.0));
  for (std::size_t axis : {0u, 1u}) {
    const Tensor& s = ad::softmax(a, axis).value();
    const std::size_t outer = axis == 0 ? 9 : 4, len = axis == 0 ? 4 : 9;
    for (std::size_t o = 0; o < outer; ++o) {
      double total = 0.0;
      for (std::size_t i = 0; i < len; ++i) total += axis == 0 ? s.at(i, o) : s.at(o, i);
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("matmul by identity returns the input and passes the gradient through") {
  Rng rng(6);
  Graph g;
  const Tensor x = testing::random_tensor({3, 4}, rng);
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  const Var xv = g.input(x);
  const Var y = ad::matmul(xv, g.constant(eye));
  CHECK(y.value() == x);
  const Tensor w = testing::random_tensor({3, 4}, rng);
  g.backward(ad::sum(ad::mul(y, g.constant(w))));
  CHECK(g.grad(xv) == w);
}

TEST_CASE("grad_check of constant and linear functions") {
  Rng rng(7);
  const std::vector<Tensor> in{testing::random_tensor({2, 3}, rng)};
  const auto constant = ad::grad_check(
      [](Graph& g, std::span<const Var>) { return g.constant(Tensor::scalar(4.0)); }, in);
  CHECK(constant.max_rel_error == 0.0);
  CHECK(constant.analytic == 0.0);

  Graph g;
  const Var x = g.input(in[0]);
  g.backward(ad::sum(x));
  for (double v : g.grad(x).values()) CHECK(v == 1.0);
  const auto linear = ad::grad_check([](Graph&, std::span<const Var> v) { return ad::sum(v[0]); }, in);
  CHECK(linear.max_rel_error < 1e-9);
  CHECK(linear.probes == 6);
}

TEST_CASE("fan-out accumulates exactly") {
  Rng rng(8);
  Graph g;
  const Var x = g.input(testing::random_tensor({2, 5}, rng));
  g.backward(ad::sum(ad::add(x, x)));
  for (double v : g.grad(x).values()) CHECK(v == 2.0);
}

TEST_CASE("kl_div of a distribution with itself is zero") {
  Rng rng(9);
  Graph g;
  const Var p = ad::softmax(g.constant(testing::random_tensor({5, 8}, rng, 3.0)), 1);
  for (double v : ad::kl_div(p, p).value().values()) CHECK(std::abs(v) <= 1e-12);
  const Var a = g.constant(testing::random_tensor({5, 8}, rng, 3.0));
  for (double v : ad::kl_div_logits(a, a).value().values()) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("kl_div_logits agrees with kl_div over softmax and stays finite when saturated") {
  Rng rng(10);
  Graph g;
  const Var a = g.constant(testing::random_tensor({1, 6}, rng, 2.0));
  const Var b = g.constant(testing::random_tensor({4, 6}, rng, 2.0));
  const Tensor fused = ad::kl_div_logits(a, b).value();
  const Tensor plain = ad::kl_div(ad::softmax(a, 1), ad::softmax(b, 1)).value();
  CHECK(testing::max_abs_diff(fused.values(), plain.values()) <= 1e-12);

  Tensor big({1, 3}, std::vector<double>{900.0, 0.0, -900.0});
  Tensor other({1, 3}, std::vector<double>{-900.0, 0.0, 900.0});
  const Tensor kl = ad::kl_div_logits(g.constant(big), g.constant(other)).value();
  CHECK(std::isfinite(kl[0]));
  CHECK(kl[0] == doctest::Approx(1800.0));
}

TEST_CASE("shape errors and invalid arguments throw") {
  Graph g;
  const Var a = g.constant(Tensor({2, 3}));
  CHECK_THROWS_AS(ad::add(a, g.constant(Tensor({3, 2}))), Error);
  CHECK_THROWS_AS(ad::matmul(a, g.constant(Tensor({2, 3}))), Error);
  CHECK_THROWS_AS(ad::softmax(a, 2), Error);
  CHECK_THROWS_AS(ad::layer_norm(a, 1, 0.0), Error);
  CHECK_THROWS_AS(ad::conv1d(g.constant(Tensor({3})), g.constant(Tensor({2, 4})), 1), Error);
}

TEST_CASE("non-finite values are numeric errors") {
  Graph g;
  try {
    ad::log1p(g.constant(Tensor({2}, std::vector<double>{0.5, -2.0})));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
  try {
    ad::scale(g.constant(Tensor({1}, 1e300)), 1e300);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
  try {
    ad::cosine_sim(g.constant(Tensor({1, 3})), g.constant(Tensor({1, 3}, 1.0)));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

TEST_CASE("backward is bit-identical across repeated runs") {
  auto run = [] {
    Rng rng(77);
    Graph g;
    const Var x = g.input(testing::random_tensor({6, 8}, rng));
    const Var w = g.input(testing::random_tensor({5, 8}, rng));
    const Var h = ad::layer_norm(ad::matmul(x, w, false, true), 1);
    const Var s = ad::softmax(h, 1);
    g.backward(ad::mean(ad::kl_div_logits(ad::slice_rows(h, 0, 1), h)));
    (void)s;
    return std::pair{g.grad(x), g.grad(w)};
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("backward runs once and unreached inputs have no gradient") {
  Graph g;
  const Var x = g.input(Tensor({2}, 1.0));
  const Var unused = g.input(Tensor({2}, 1.0));
  const Var loss = ad::sum(ad::square(x));
  g.backward(loss);
  CHECK(g.grad(unused).empty());
  CHECK_THROWS_AS(g.backward(loss), Error);
}

TEST_CASE("grad_check_parameters restores parameter values") {
  ad::Parameter p("w", Tensor({2, 2}, std::vector<double>{0.3, -1.2, 2.0, 0.7}));
  const Tensor before = p.value;
  ad::Parameter* ps[] = {&p};
  const auto r = ad::grad_check_parameters(
      [&](Graph& g) { return ad::sum(ad::square(ad::square(g.param(p)))); }, ps);
  CHECK(r.max_rel_error < 1e-7);
  CHECK(p.value == before);
}
