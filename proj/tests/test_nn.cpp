#include <cmath>
#include <random>
#include <sstream>

#include "adepinn/errors.hpp"
#include "adepinn/nn.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace adepinn;
namespace tu = adepinn::testutil;

TEST_CASE("xavier_init draws within the Glorot bound, zero biases") {
  auto ps = xavier_init({2, 1}, 7);
  const double bound = std::sqrt(6.0 / 3.0);
  for (double w : ps.weights(0)) {
    CHECK(std::abs(w) <= bound);
  }
  for (double b : ps.biases(0)) CHECK(b == 0.0);
}

TEST_CASE("xavier_init is seed-deterministic and seed-sensitive") {
  auto a = xavier_init({3, 8, 1}, 42);
  auto b = xavier_init({3, 8, 1}, 42);
  auto c = xavier_init({3, 8, 1}, 43);
  REQUIRE(a.size() == b.size());
  bool identical = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical = identical && a.flat()[i] == b.flat()[i];
    differs = differs || a.flat()[i] != c.flat()[i];
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("invalid architectures are rejected") {
  CHECK_THROWS_AS(xavier_init({}, 1), InvalidArchitectureError);
  CHECK_THROWS_AS(xavier_init({3}, 1), InvalidArchitectureError);
  CHECK_THROWS_AS(xavier_init({3, 0, 1}, 1), InvalidArchitectureError);
  CHECK_THROWS_AS(xavier_init({3, 8, 2}, 1), InvalidArchitectureError);
}

TEST_CASE("affine single layer: value, gradient, vanishing second derivatives") {
  ParamSet ps(MlpSpec{{2, 1}});
  ps.weights(0)[0] = 2.0;
  ps.weights(0)[1] = 3.0;
  ps.biases(0)[0] = 1.0;
  EvalRequest req{{1.0, 1.0}, DerivMask::full(2)};
  auto res = evaluate(ps, req);
  CHECK(res.value == doctest::Approx(6.0));
  CHECK(res.grad_input[0] == doctest::Approx(2.0));
  CHECK(res.grad_input[1] == doctest::Approx(3.0));
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) CHECK(res.second_input[j][k] == doctest::Approx(0.0));
}

TEST_CASE("single tanh neuron matches the chain-rule closed form") {
  ParamSet ps(MlpSpec{{1, 1, 1}});
  const double w = 1.3, b = -0.2;
  ps.weights(0)[0] = w;
  ps.biases(0)[0] = b;
  ps.weights(1)[0] = 1.0;
  ps.biases(1)[0] = 0.0;
  const double x = 0.37;
  auto res = evaluate(ps, {{x}, DerivMask::full(1)});
  const double th = std::tanh(w * x + b);
  CHECK(res.value == doctest::Approx(th).epsilon(1e-14));
  CHECK(res.grad_input[0] == doctest::Approx(w * (1.0 - th * th)).epsilon(1e-14));
  CHECK(res.second_input[0][0] ==
        doctest::Approx(-2.0 * w * w * th * (1.0 - th * th)).epsilon(1e-13));
}

TEST_CASE("random tanh network derivatives match central finite differences") {
  std::mt19937_64 rng(11);
  auto ps = xavier_init({2, 16, 16, 1}, 5);
  for (int rep = 0; rep < 5; ++rep) {
    auto x = tu::random_point(rng, 2);
    auto res = evaluate(ps, {x, DerivMask::full(2)});
    for (int k = 0; k < 2; ++k) {
      CHECK(tu::rel_err(res.grad_input[k], tu::fd_grad_input(ps, x, k), 1e-6) < 1e-5);
    }
    for (int j = 0; j < 2; ++j)
      for (int k = j; k < 2; ++k) {
        CHECK(tu::rel_err(res.second_input[j][k], tu::fd_second_input(ps, x, j, k), 1e-6) < 1e-5);
      }
  }
}

TEST_CASE("second_input is symmetric on random networks") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    auto ps = xavier_init({3, 10, 10, 1}, 100 + rep);
    auto x = tu::random_point(rng, 3);
    auto res = evaluate(ps, {x, DerivMask::full(3)});
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        CHECK(std::abs(res.second_input[j][k] - res.second_input[k][j]) <= 1e-12);
  }
}

TEST_CASE("parameter gradients of the value match finite differences") {
  std::mt19937_64 rng(31);
  auto ps = xavier_init({3, 8, 8, 1}, 9);
  auto x = tu::random_point(rng, 3);
  DerivMask mask = DerivMask::value_only();
  mask.param_grads = true;
  auto res = evaluate(ps, {x, mask});
  REQUIRE(res.param_grads.size() == ps.size());
  std::uniform_int_distribution<std::size_t> pick(0, ps.size() - 1);
  auto value_at = [&](const ParamSet& q) { return tu::net_value(q, x); };
  for (int rep = 0; rep < 24; ++rep) {
    const std::size_t i = pick(rng);
    CHECK(tu::rel_err(res.param_grads[i], tu::fd_param(value_at, ps, i), 1e-7) < 1e-5);
  }
}

TEST_CASE("sigmoid output stays in (0,1), softplus stays positive") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    auto sig = xavier_init({2, 12, 1}, 200 + rep, Activation::Tanh, OutputActivation::Sigmoid);
    auto sp = xavier_init({2, 12, 1}, 300 + rep, Activation::Tanh, OutputActivation::Softplus);
    auto x = tu::random_point(rng, 2, -3.0, 3.0);
    const double vs = tu::net_value(sig, x);
    const double vp = tu::net_value(sp, x);
    CHECK(vs > 0.0);
    CHECK(vs < 1.0);
    CHECK(vp > 0.0);
  }
}

TEST_CASE("sigmoid and softplus output derivatives match finite differences") {
  std::mt19937_64 rng(51);
  for (auto out : {OutputActivation::Sigmoid, OutputActivation::Softplus}) {
    auto ps = xavier_init({2, 10, 1}, 77, Activation::Tanh, out);
    auto x = tu::random_point(rng, 2);
    auto res = evaluate(ps, {x, DerivMask::full(2)});
    for (int k = 0; k < 2; ++k)
      CHECK(tu::rel_err(res.grad_input[k], tu::fd_grad_input(ps, x, k), 1e-7) < 1e-5);
    for (int j = 0; j < 2; ++j)
      for (int k = j; k < 2; ++k)
        CHECK(tu::rel_err(res.second_input[j][k], tu::fd_second_input(ps, x, j, k), 1e-7) < 2e-5);
  }
}

TEST_CASE("evaluation is bit-deterministic") {
  auto ps = xavier_init({3, 20, 20, 1}, 1234);
  std::vector<double> x{0.1, -0.2, 0.3};
  auto r1 = evaluate(ps, {x, DerivMask::full(3)});
  auto r2 = evaluate(ps, {x, DerivMask::full(3)});
  CHECK(r1.value == r2.value);
  for (int k = 0; k < 3; ++k) CHECK(r1.grad_input[k] == r2.grad_input[k]);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) CHECK(r1.second_input[j][k] == r2.second_input[j][k]);
}

TEST_CASE("dimension mismatch raises invalid-input") {
  auto ps = xavier_init({2, 4, 1}, 3);
  CHECK_THROWS_AS(evaluate(ps, {{1.0, 2.0, 3.0}, DerivMask::value_only()}), InvalidInputError);
}

TEST_CASE("non-finite evaluation raises numeric-overflow") {
  ParamSet ps(MlpSpec{{1, 1}});
  ps.weights(0)[0] = 1e308;
  CHECK_THROWS_AS(evaluate(ps, {{1e308}, DerivMask::value_only()}), NumericOverflowError);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  auto ps = xavier_init({3, 7, 5, 1}, 90, Activation::Tanh, OutputActivation::Sigmoid);
  std::stringstream ss;
  save_checkpoint(ps, ss);
  auto loaded = load_checkpoint(ss);
  CHECK(loaded.spec() == ps.spec());
  REQUIRE(loaded.size() == ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(loaded.flat()[i] == ps.flat()[i]);
}

TEST_CASE("checkpoint rejects foreign content") {
  std::stringstream ss("not a checkpoint\n");
  CHECK_THROWS_AS(load_checkpoint(ss), InvalidInputError);
}
