#include <cmath>

#include "adepinn/analytic.hpp"
#include "adepinn/errors.hpp"
#include "adepinn/fd.hpp"
#include "adepinn/metrics.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace adepinn;
namespace tu = adepinn::testutil;

namespace {
FieldGrid fill_grid(int n1, int n2, double L1, double L2,
                    const std::function<double(double, double)>& f) {
  FieldGrid g;
  g.kind = FieldKind::Concentration;
  g.nx1 = n1;
  g.nx2 = n2;
  g.dx1 = L1 / n1;
  g.dx2 = L2 / n2;
  g.values.resize(static_cast<std::size_t>(n1) * n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) g.at(i, j) = f(g.x1(i), g.x2(j));
  return g;
}
}  // namespace

TEST_CASE("rel_l2 basics: exact, doubled, constant offset") {
  auto u = fill_grid(12, 8, 1.0, 1.0, [](double x, double y) { return 1.0 + x * y; });
  CHECK(rel_l2_at_time(u, u) == 0.0);

  auto two = u;
  for (double& v : two.values) v *= 2.0;
  CHECK(rel_l2_at_time(two, u) == doctest::Approx(1.0));

  const double c = 0.37;
  auto off = u;
  for (double& v : off.values) v += c;
  double sum2 = 0.0;
  for (double v : u.values) sum2 += v * v;
  const double expect = std::sqrt(u.values.size() * c * c / sum2);
  CHECK(rel_l2_at_time(off, u) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("rel_l2 is absolutely homogeneous in the error") {
  auto u = fill_grid(10, 10, 1.0, 1.0, [](double x, double y) { return std::sin(3 * x) + y; });
  auto e = fill_grid(10, 10, 1.0, 1.0, [](double x, double y) { return std::cos(2 * x * y); });
  for (double c : {0.5, -2.0, 3.7}) {
    auto hat = u;
    for (std::size_t i = 0; i < hat.values.size(); ++i) hat.values[i] += c * e.values[i];
    auto hat1 = u;
    for (std::size_t i = 0; i < hat1.values.size(); ++i) hat1.values[i] += e.values[i];
    CHECK(rel_l2_at_time(hat, u) ==
          doctest::Approx(std::abs(c) * rel_l2_at_time(hat1, u)).epsilon(1e-12));
  }
}

TEST_CASE("rel_l2_time_avg pools sums rather than averaging ratios") {
  auto u1 = fill_grid(6, 6, 1.0, 1.0, [](double, double) { return 1.0; });
  auto u2 = fill_grid(6, 6, 1.0, 1.0, [](double, double) { return 10.0; });
  auto h1 = u1;
  for (double& v : h1.values) v += 1.0;  // error^2 sums to 36
  auto h2 = u2;                          // exact

  std::vector<FieldGrid> hat{h1, h2}, ref{u1, u2};
  // pooled: sqrt(36 / (36*1 + 36*100)) = sqrt(1/101)
  CHECK(rel_l2_time_avg(hat, ref) == doctest::Approx(std::sqrt(1.0 / 101.0)).epsilon(1e-12));

  std::vector<FieldGrid> one_hat{h1}, one_ref{u1};
  CHECK(rel_l2_time_avg(one_hat, one_ref) == doctest::Approx(rel_l2_at_time(h1, u1)));

  std::vector<FieldGrid> exact{u1, u2};
  CHECK(rel_l2_time_avg(exact, ref) == 0.0);
}

TEST_CASE("rel_l2 rejects zero references and mismatched grids") {
  auto z = fill_grid(4, 4, 1.0, 1.0, [](double, double) { return 0.0; });
  CHECK_THROWS_AS(rel_l2_at_time(z, z), UndefinedMetricError);
  auto u = fill_grid(4, 4, 1.0, 1.0, [](double, double) { return 1.0; });
  auto w = fill_grid(4, 5, 1.0, 1.0, [](double, double) { return 1.0; });
  CHECK_THROWS_AS(rel_l2_at_time(u, w), InvalidInputError);
}

TEST_CASE("plume center of a symmetric Gaussian sits at its center") {
  const double a = 0.6, b = 0.45;
  auto u = fill_grid(96, 96, 1.0, 1.0, [&](double x, double y) {
    return std::exp(-((x - a) * (x - a) + (y - b) * (y - b)) / (2 * 0.05 * 0.05));
  });
  auto d = plume_diagnostics(u);
  REQUIRE(d.center_defined);
  CHECK(std::abs(d.x1c - a) < 1e-3);
  CHECK(std::abs(d.x2c - b) < 1e-3);
}

TEST_CASE("plume diagnostics of the mean-field solution match the analytic moments") {
  MeanFieldParams p;
  p.M = 1.0;
  p.epsilon = 0.05;
  p.x1_star = 0.85;
  p.x2_star = 1.0;
  p.V = 0.5;
  p.Dx1 = 0.03;
  p.Dx2 = 0.02;
  p.T = 0.5;
  const double t = 0.3;  // plume center lands at (1.0, 1.0), 7 sigma inside
  auto u = fill_grid(160, 160, 2.0, 2.0, [&](double x, double y) {
    return mean_field_2d(x, y, t, p);
  });
  auto d = plume_diagnostics(u);
  REQUIRE(d.center_defined);
  CHECK(d.mass == doctest::Approx(p.M).epsilon(1e-4));
  CHECK(std::abs(d.x1c - (p.x1_star + p.V * t)) < 1e-3 * 2.0);
  CHECK(std::abs(d.x2c - p.x2_star) < 1e-3 * 2.0);
}

TEST_CASE("plume mass is linear in u and the center flags non-positive mass") {
  auto u = fill_grid(20, 20, 1.0, 1.0, [](double x, double y) { return x + y; });
  auto d1 = plume_diagnostics(u);
  auto scaled = u;
  for (double& v : scaled.values) v *= 3.0;
  auto d3 = plume_diagnostics(scaled);
  CHECK(d3.mass == doctest::Approx(3.0 * d1.mass).epsilon(1e-12));

  auto zero = fill_grid(8, 8, 1.0, 1.0, [](double, double) { return 0.0; });
  auto dz = plume_diagnostics(zero);
  CHECK(dz.mass == 0.0);
  CHECK(!dz.center_defined);
}

TEST_CASE("heterogeneous backward reference keeps about 70% of the mass at T=0.2") {
  ProblemSpec spec;  // library defaults: the heterogeneous aquifer
  spec.T = 0.2;
  const int n1 = 64, n2 = 32;
  auto K = grf_sample(n1, n2, spec.L1 / n1, spec.L2 / n2, spec.mean_Y, spec.sigma_Y,
                      spec.lambda_corr, 6);
  auto h = solve_darcy_fd(K, spec.H, spec.q);
  auto [v1, v2] = darcy_velocity(K, h, spec.phi);
  AdeOptions opts;
  opts.nt_save = 20;
  auto sol = solve_ade_fd(v1, v2, spec, opts);
  auto d = plume_diagnostics(sol.snapshots.back());
  MESSAGE("mass remaining at T=0.2: ", d.mass);
  CHECK(d.mass > 0.60);
  CHECK(d.mass < 0.80);
}
