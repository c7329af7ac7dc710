#include <cmath>
#include <random>

#include "adepinn/optim.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace adepinn;

namespace {

// 0.5 x'Ax - b'x with SPD A.
struct Quadratic {
  std::vector<std::vector<double>> A;
  std::vector<double> b;

  double operator()(std::span<const double> x, std::span<double> g) const {
    const std::size_t n = b.size();
    double val = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double ax = 0.0;
      for (std::size_t j = 0; j < n; ++j) ax += A[i][j] * x[j];
      g[i] = ax - b[i];
      val += 0.5 * x[i] * ax - b[i] * x[i];
    }
    return val;
  }
};

Quadratic random_spd(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> B(n, std::vector<double>(n));
  for (auto& row : B)
    for (auto& v : row) v = u(rng);
  Quadratic q;
  q.A.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) q.A[i][j] += B[k][i] * B[k][j];
      if (i == j) q.A[i][j] += 0.5;
    }
  q.b.resize(n);
  for (auto& v : q.b) v = u(rng);
  return q;
}

double rosenbrock(std::span<const double> x, std::span<double> g) {
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("adam drives a convex quadratic below 1e-6") {
  // shifted quadratic |theta - theta*|^2
  const std::vector<double> target{1.0, -2.0, 0.5, 3.0};
  auto f = [&](int, std::span<const double> x, std::span<double> g) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - target[i];
      g[i] = 2.0 * d;
      v += d * d;
    }
    return v;
  };
  OptimConfig cfg;
  cfg.adam_lr = 0.01;
  cfg.adam_epochs = 5000;
  auto res = adam_minimize(f, {4.0, 4.0, 4.0, 4.0}, cfg);
  CHECK(res.stop == StopReason::Completed);
  CHECK(res.history.back() < 1e-6);
}

TEST_CASE("adam leaves parameters unchanged under a zero gradient") {
  auto f = [](int, std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    return 1.5;
  };
  OptimConfig cfg;
  cfg.adam_epochs = 50;
  auto res = adam_minimize(f, {0.3, -0.4}, cfg);
  CHECK(res.params[0] == 0.3);
  CHECK(res.params[1] == -0.4);
}

TEST_CASE("adam trajectories are reproducible") {
  auto quad = random_spd(6, 3);
  auto f = [&](int, std::span<const double> x, std::span<double> g) { return quad(x, g); };
  OptimConfig cfg;
  cfg.adam_lr = 0.02;
  cfg.adam_epochs = 300;
  auto a = adam_minimize(f, std::vector<double>(6, 1.0), cfg);
  auto b = adam_minimize(f, std::vector<double>(6, 1.0), cfg);
  CHECK(a.history == b.history);
  CHECK(a.params == b.params);
}

TEST_CASE("adam aborts on non-finite gradients with the best iterate") {
  int calls = 0;
  auto f = [&](int, std::span<const double>, std::span<double> g) {
    ++calls;
    std::fill(g.begin(), g.end(), calls > 3 ? std::nan("") : 0.1);
    return 1.0;
  };
  OptimConfig cfg;
  cfg.adam_epochs = 100;
  auto res = adam_minimize(f, {0.0}, cfg);
  CHECK(res.stop == StopReason::NonFinite);
  CHECK(!res.diagnostic.empty());
}

TEST_CASE("lbfgs solves Rosenbrock from the classic start") {
  OptimConfig cfg;
  cfg.lbfgs_tol = 1e-14;
  cfg.lbfgs_max_iters = 200;
  auto res = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, cfg);
  CHECK(res.stop == StopReason::Tolerance);
  CHECK(static_cast<int>(res.history.size()) <= 200);
  CHECK(std::abs(res.params[0] - 1.0) < 1e-6);
  CHECK(std::abs(res.params[1] - 1.0) < 1e-6);
}

TEST_CASE("lbfgs stops immediately at an already-optimal start") {
  auto quad = random_spd(3, 5);
  // Solve for the exact minimizer via the gradient equation.
  std::vector<double> x{0.0, 0.0, 0.0}, g(3);
  OptimConfig cfg;
  cfg.lbfgs_tol = 1e-10;
  cfg.lbfgs_max_iters = 500;
  auto stage1 = lbfgs_minimize([&](std::span<const double> p, std::span<double> gr) {
    return quad(p, gr);
  }, x, cfg);
  // Quadratic minimum value may be negative; shift so the optimum value is 0.
  const double fmin = quad(stage1.params, g);
  auto shifted = [&](std::span<const double> p, std::span<double> gr) {
    return quad(p, gr) - fmin + 1e-18;
  };
  auto res = lbfgs_minimize(shifted, stage1.params, cfg);
  CHECK(res.history.size() <= 2);
  CHECK(res.stop == StopReason::Tolerance);
}

TEST_CASE("lbfgs shows superlinear decrease on a quadratic") {
  auto quad = random_spd(5, 11);
  std::vector<double> g(5);
  OptimConfig cfg;
  cfg.lbfgs_tol = 1e-18;
  cfg.lbfgs_max_iters = 60;
  auto sol = lbfgs_minimize([&](std::span<const double> p, std::span<double> gr) {
    return quad(p, gr);
  }, std::vector<double>(5, 2.0), cfg);
  const double fmin = quad(sol.params, g);
  auto shifted = [&](std::span<const double> p, std::span<double> gr) {
    return quad(p, gr) - fmin;
  };
  auto res = lbfgs_minimize(shifted, std::vector<double>(5, 2.0), cfg);
  REQUIRE(res.history.size() >= 4);
  // best-so-far is monotone
  double best = res.history.front();
  for (double v : res.history) {
    CHECK(v <= best * (1.0 + 1e-12) + 1e-18);
    best = std::min(best, v);
  }
  // the late contraction factor beats the early one decisively
  const double early = res.history[1] / res.history[0];
  const auto last = res.history.size() - 1;
  const double late = res.history[last] / std::max(res.history[last - 1], 1e-300);
  CHECK(late < early);
  CHECK(res.history.back() < 1e-10);
}

TEST_CASE("two-loop recursion with full memory reproduces the Newton direction") {
  for (int n = 2; n <= 5; ++n) {
    auto quad = random_spd(n, 40 + n);
    // Exact-line-search BFGS iteration driven by the exposed two-loop.
    std::vector<double> x(n, 1.5), g(n), gn(n);
    quad(x, g);
    std::vector<std::vector<double>> s_list, y_list;
    double gamma = 1.0;
    for (int it = 0; it < n; ++it) {
      auto d = lbfgs_two_loop(g, s_list, y_list, gamma);
      // exact step for a quadratic: a = -g.d / d'Ad
      double gd = 0.0, dad = 0.0;
      for (int i = 0; i < n; ++i) {
        gd += g[i] * d[i];
        double ad = 0.0;
        for (int j = 0; j < n; ++j) ad += quad.A[i][j] * d[j];
        dad += d[i] * ad;
      }
      const double a = -gd / dad;
      std::vector<double> s(n), y(n);
      for (int i = 0; i < n; ++i) s[i] = a * d[i];
      std::vector<double> xn(n);
      for (int i = 0; i < n; ++i) xn[i] = x[i] + s[i];
      quad(xn, gn);
      for (int i = 0; i < n; ++i) y[i] = gn[i] - g[i];
      double sy = 0.0, yy = 0.0;
      for (int i = 0; i < n; ++i) {
        sy += s[i] * y[i];
        yy += y[i] * y[i];
      }
      gamma = sy / yy;
      s_list.push_back(s);
      y_list.push_back(y);
      x = xn;
      g = gn;
    }
    // After n conjugate steps the two-loop inverse equals A^{-1} on R^n:
    // compare d against the Newton direction for a fresh gradient.
    std::mt19937_64 rng(7 * n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> gr(n);
    for (auto& v : gr) v = u(rng);
    auto d = lbfgs_two_loop(gr, s_list, y_list, gamma);
    // Solve A z = -gr by Gaussian elimination for the reference.
    std::vector<std::vector<double>> M = quad.A;
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = -gr[i];
    for (int c = 0; c < n; ++c) {
      int piv = c;
      for (int r = c + 1; r < n; ++r)
        if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
      std::swap(M[c], M[piv]);
      std::swap(rhs[c], rhs[piv]);
      for (int r = c + 1; r < n; ++r) {
        const double w = M[r][c] / M[c][c];
        for (int k = c; k < n; ++k) M[r][k] -= w * M[c][k];
        rhs[r] -= w * rhs[c];
      }
    }
    std::vector<double> z(n);
    for (int r = n - 1; r >= 0; --r) {
      double acc = rhs[r];
      for (int k = r + 1; k < n; ++k) acc -= M[r][k] * z[k];
      z[r] = acc / M[r][r];
    }
    for (int i = 0; i < n; ++i) CHECK(d[i] == doctest::Approx(z[i]).epsilon(1e-6));
  }
}
