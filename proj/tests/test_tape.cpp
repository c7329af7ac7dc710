#include <cmath>
#include <random>

#include "adepinn/errors.hpp"
#include "adepinn/nn.hpp"
#include "adepinn/tape.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace adepinn;
namespace tu = adepinn::testutil;

TEST_CASE("quadratic of an affine layer has the closed-form parameter gradient") {
  ParamSet ps(MlpSpec{{2, 1}});
  ps.weights(0)[0] = 0.8;
  ps.weights(0)[1] = -1.1;
  ps.biases(0)[0] = 0.4;
  const std::vector<double> x{0.3, -0.7};

  Tape tape;
  const int slot = tape.add_slot(ps.size());
  auto out = tape.eval_network(slot, ps, x, DerivMask::value_only());
  Expr loss = sq(out.value);
  tape.backward(loss);

  const double u = 0.8 * 0.3 + (-1.1) * (-0.7) + 0.4;
  CHECK(loss.value() == doctest::Approx(u * u));
  auto g = tape.slot_grad(slot);
  CHECK(g[0] == doctest::Approx(2.0 * u * x[0]));
  CHECK(g[1] == doctest::Approx(2.0 * u * x[1]));
  CHECK(g[2] == doctest::Approx(2.0 * u));
}

TEST_CASE("squared input-gradient of a tanh neuron matches parameter finite differences") {
  auto ps = xavier_init({1, 1, 1}, 17);
  const std::vector<double> x{0.25};
  DerivMask mask;
  mask.grad_mask = 1;

  Tape tape;
  const int slot = tape.add_slot(ps.size());
  auto out = tape.eval_network(slot, ps, x, mask);
  tape.backward(sq(out.d(0)));
  auto g = tape.slot_grad(slot);

  auto scalar = [&](const ParamSet& q) {
    EvalRequest req{x, mask};
    auto r = evaluate(q, req);
    return r.grad_input[0] * r.grad_input[0];
  };
  for (std::size_t i = 0; i < ps.size(); ++i)
    CHECK(tu::rel_err(g[i], tu::fd_param(scalar, ps, i), 1e-8) < 1e-5);
}

TEST_CASE("expressions not touching a slot leave its gradient exactly zero") {
  auto a = xavier_init({2, 6, 1}, 1);
  auto b = xavier_init({2, 6, 1}, 2);
  Tape tape;
  const int sa = tape.add_slot(a.size());
  const int sb = tape.add_slot(b.size());
  const std::vector<double> x{0.1, 0.2};
  auto out = tape.eval_network(sa, a, x, DerivMask::value_only());
  tape.backward(sq(out.value) + 3.0);
  for (double v : tape.slot_grad(sb)) CHECK(v == 0.0);
  double norm = 0.0;
  for (double v : tape.slot_grad(sa)) norm += std::abs(v);
  CHECK(norm > 0.0);
}

TEST_CASE("frozen network evaluation contributes values but no gradients") {
  auto a = xavier_init({2, 6, 1}, 3);
  Tape tape;
  const std::vector<double> x{0.4, -0.1};
  auto out = tape.eval_network(-1, a, x, DerivMask::value_only());
  Expr root = sq(out.value);
  tape.backward(root);
  CHECK(root.value() == doctest::Approx(tu::net_value(a, x) * tu::net_value(a, x)));
}

TEST_CASE("residual-shaped expression gradient matches finite differences") {
  std::mt19937_64 rng(7);
  auto ps = xavier_init({3, 10, 10, 1}, 23);
  auto x = tu::random_point(rng, 3);
  DerivMask mask = DerivMask::with_grads(3);
  mask.pair_mask |= static_cast<std::uint8_t>(1u << pair_index(0, 0));
  mask.pair_mask |= static_cast<std::uint8_t>(1u << pair_index(1, 1));
  mask.pair_mask |= static_cast<std::uint8_t>(1u << pair_index(0, 1));

  auto residual_value = [&](const ParamSet& q) {
    auto r = evaluate(q, {x, DerivMask::full(3)});
    const double res = r.grad_input[2] + 0.7 * r.grad_input[0] - 0.3 * r.second_input[0][0] -
                       0.2 * r.second_input[1][1] - 0.05 * r.second_input[0][1] +
                       1.3 * r.value;
    return res * res;
  };

  Tape tape;
  const int slot = tape.add_slot(ps.size());
  auto out = tape.eval_network(slot, ps, x, mask);
  Expr res = out.d(2) + 0.7 * out.d(0) - 0.3 * out.d2(0, 0) - 0.2 * out.d2(1, 1) -
             0.05 * out.d2(0, 1) + 1.3 * out.value;
  tape.backward(sq(res));
  auto g = tape.slot_grad(slot);

  std::uniform_int_distribution<std::size_t> pick(0, ps.size() - 1);
  for (int rep = 0; rep < 32; ++rep) {
    const std::size_t i = pick(rng);
    CHECK(tu::rel_err(g[i], tu::fd_param(residual_value, ps, i, 1e-5), 1e-7) < 1e-4);
  }
}

TEST_CASE("elementary tape operations differentiate correctly") {
  Tape tape;
  auto check_unary = [&](auto make, double x0, double expect) {
    tape.reset_nodes();
    Expr x = tape.leaf(x0);
    Expr y = make(x);
    tape.backward(y);
    CHECK(tape.adjoint(x) == doctest::Approx(expect).epsilon(1e-12));
  };
  check_unary([](Expr x) { return exp(x); }, 0.3, std::exp(0.3));
  check_unary([](Expr x) { return log(x); }, 0.7, 1.0 / 0.7);
  check_unary([](Expr x) { return sqrt(x); }, 2.0, 0.5 / std::sqrt(2.0));
  check_unary([](Expr x) { return tanh(x); }, 0.2, 1.0 - std::tanh(0.2) * std::tanh(0.2));

  tape.reset_nodes();
  Expr a = tape.leaf(1.5);
  Expr b = tape.leaf(-2.0);
  Expr z = (a * b - a / b + 2.0) * b;
  tape.backward(z);
  // z = b*(ab - a/b + 2) => dz/da = b*(b - 1/b); dz/db = ab - a/b + 2 + b*(a + a/b^2)
  CHECK(tape.adjoint(a) == doctest::Approx(-2.0 * (-2.0 - 1.0 / -2.0)));
  CHECK(tape.adjoint(b) ==
        doctest::Approx((1.5 * -2.0 - 1.5 / -2.0 + 2.0) + -2.0 * (1.5 + 1.5 / 4.0)));
}

TEST_CASE("backward seed scales gradients linearly") {
  auto ps = xavier_init({2, 5, 1}, 8);
  const std::vector<double> x{0.2, 0.3};
  Tape t1, t2;
  const int s1 = t1.add_slot(ps.size());
  const int s2 = t2.add_slot(ps.size());
  auto o1 = t1.eval_network(s1, ps, x, DerivMask::value_only());
  auto o2 = t2.eval_network(s2, ps, x, DerivMask::value_only());
  t1.backward(sq(o1.value), 1.0);
  t2.backward(sq(o2.value), 2.5);
  for (std::size_t i = 0; i < ps.size(); ++i)
    CHECK(t2.slot_grad(s2)[i] == doctest::Approx(2.5 * t1.slot_grad(s1)[i]).epsilon(1e-13));
}

TEST_CASE("tape reuse across points accumulates gradients") {
  auto ps = xavier_init({2, 5, 1}, 9);
  Tape tape;
  const int slot = tape.add_slot(ps.size());
  std::vector<std::vector<double>> pts{{0.1, 0.2}, {-0.3, 0.4}};

  std::vector<double> expect(ps.size(), 0.0);
  for (auto& p : pts) {
    Tape one;
    const int s = one.add_slot(ps.size());
    auto o = one.eval_network(s, ps, p, DerivMask::value_only());
    one.backward(sq(o.value));
    for (std::size_t i = 0; i < ps.size(); ++i) expect[i] += one.slot_grad(s)[i];
  }

  for (auto& p : pts) {
    tape.reset_nodes();
    auto o = tape.eval_network(slot, ps, p, DerivMask::value_only());
    tape.backward(sq(o.value));
  }
  for (std::size_t i = 0; i < ps.size(); ++i)
    CHECK(tape.slot_grad(slot)[i] == doctest::Approx(expect[i]).epsilon(1e-13));
}
