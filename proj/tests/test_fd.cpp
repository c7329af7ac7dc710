#include <cmath>
#include <filesystem>

#include "adepinn/analytic.hpp"
#include "adepinn/errors.hpp"
#include "adepinn/fd.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace adepinn;
namespace tu = adepinn::testutil;

namespace {

FieldGrid const_grid(int n1, int n2, double L1, double L2, FieldKind kind, double fill) {
  FieldGrid g;
  g.kind = kind;
  g.nx1 = n1;
  g.nx2 = n2;
  g.dx1 = L1 / n1;
  g.dx2 = L2 / n2;
  g.values.assign(static_cast<std::size_t>(n1) * n2, fill);
  return g;
}

double grid_mass(const FieldGrid& u) {
  double m = 0.0;
  for (double v : u.values) m += v;
  return m * u.dx1 * u.dx2;
}

// Relative L2 distance to the analytic mean-field solution over cells at
// least `margin` from every boundary.
double rel_l2_vs_meanfield(const FieldGrid& u, double t, const MeanFieldParams& p,
                           double margin) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < u.nx1; ++i)
    for (int j = 0; j < u.nx2; ++j) {
      const double x1 = u.x1(i), x2 = u.x2(j);
      if (x1 < margin || x1 > u.length1() - margin) continue;
      if (x2 < margin || x2 > u.length2() - margin) continue;
      const double ref = mean_field_2d(x1, x2, t, p);
      const double d = u.at(i, j) - ref;
      num += d * d;
      den += ref * ref;
    }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("constant-conductivity darcy head is exactly linear") {
  const double k = 1.7, H = 0.3, q = 1.2, L1 = 1.0, L2 = 0.5;
  auto K = const_grid(32, 16, L1, L2, FieldKind::Conductivity, k);
  auto h = solve_darcy_fd(K, H, q);
  for (int i = 0; i < h.nx1; ++i)
    for (int j = 0; j < h.nx2; ++j) {
      const double expect = H + q * (L1 - h.x1(i)) / k;
      CHECK(std::abs(h.at(i, j) - expect) < 1e-8);
    }
}

TEST_CASE("layered conductivity head matches the series-resistance profile") {
  const double k1 = 0.5, k2 = 4.0, H = 0.0, q = 1.0, L1 = 1.0, L2 = 0.5;
  auto K = const_grid(32, 8, L1, L2, FieldKind::Conductivity, k1);
  for (int i = 16; i < 32; ++i)
    for (int j = 0; j < 8; ++j) K.at(i, j) = k2;
  auto h = solve_darcy_fd(K, H, q);
  const double mid = L1 / 2.0;
  for (int i = 0; i < h.nx1; ++i)
    for (int j = 0; j < h.nx2; ++j) {
      const double x = h.x1(i);
      const double expect = x >= mid ? H + q * (L1 - x) / k2
                                     : H + q * (L1 - mid) / k2 + q * (mid - x) / k1;
      CHECK(std::abs(h.at(i, j) - expect) < 1e-8);
    }
}

TEST_CASE("darcy discrete flux through every cross-section equals q L2") {
  const double H = 0.0, q = 1.0, L1 = 1.0, L2 = 0.5;
  auto K = grf_sample(24, 12, L1 / 24, L2 / 12, 0.0, 0.9, 0.5, 11);
  auto h = solve_darcy_fd(K, H, q);
  auto harm = [](double a, double b) { return 2.0 * a * b / (a + b); };
  for (int i = 0; i + 1 < K.nx1; ++i) {
    double flux = 0.0;
    for (int j = 0; j < K.nx2; ++j)
      flux += K.dx2 * harm(K.at(i, j), K.at(i + 1, j)) / K.dx1 * (h.at(i, j) - h.at(i + 1, j));
    CHECK(tu::rel_err(flux, q * L2) < 1e-8);
  }
  double out = 0.0;
  for (int j = 0; j < K.nx2; ++j)
    out += K.dx2 * K.at(K.nx1 - 1, j) / (0.5 * K.dx1) * (h.at(K.nx1 - 1, j) - H);
  CHECK(tu::rel_err(out, q * L2) < 1e-8);
}

TEST_CASE("darcy velocity from the fd head is near divergence-free") {
  const double q = 1.0, L1 = 1.0, L2 = 0.5, phi = 0.317;
  auto K = grf_sample(32, 16, L1 / 32, L2 / 16, 0.0, 0.9, 0.5, 21);
  auto h = solve_darcy_fd(K, 0.0, q);
  auto [v1, v2] = darcy_velocity(K, h, phi);
  double net = 0.0, mag = 0.0;
  int cells = 0;
  for (int i = 1; i + 1 < K.nx1; ++i)
    for (int j = 1; j + 1 < K.nx2; ++j) {
      const double div = (v1.at(i + 1, j) - v1.at(i - 1, j)) / (2.0 * K.dx1) +
                         (v2.at(i, j + 1) - v2.at(i, j - 1)) / (2.0 * K.dx2);
      net += div * K.dx1 * K.dx2;
      mag += std::hypot(v1.at(i, j), v2.at(i, j));
      ++cells;
    }
  mag /= cells;
  CHECK(std::abs(net) / (mag * L2) < 1e-2);
}

TEST_CASE("darcy solver rejects tiny grids") {
  auto K = const_grid(2, 2, 1.0, 1.0, FieldKind::Conductivity, 1.0);
  CHECK_THROWS_AS(solve_darcy_fd(K, 0.0, 1.0), InvalidInputError);
}

TEST_CASE("pure-dispersion transport matches the analytic Gaussian spreading") {
  ProblemSpec spec;
  spec.L1 = spec.L2 = 1.0;
  spec.T = 0.5;
  spec.x1_star = spec.x2_star = 0.5;
  spec.epsilon = 0.05;
  spec.Dw = 0.03;
  spec.aL = spec.aT = 0.0;
  spec.Dx1 = spec.Dx2 = 0.03;
  spec.V = 0.0;

  auto v1 = const_grid(64, 64, 1.0, 1.0, FieldKind::VelocityX1, 0.0);
  auto v2 = const_grid(64, 64, 1.0, 1.0, FieldKind::VelocityX2, 0.0);
  AdeOptions opts;
  opts.nt_save = 10;
  auto sol = solve_ade_fd(v1, v2, spec, opts);

  auto p = spec.mean_field();
  for (std::size_t k = 2; k < sol.times.size(); ++k) {
    CHECK(rel_l2_vs_meanfield(sol.snapshots[k], sol.times[k], p, 0.1) < 0.03);
  }

  // Mass conserved while the plume is in the interior, non-increasing always.
  double prev = grid_mass(sol.snapshots[0]);
  CHECK(prev == doctest::Approx(spec.M).epsilon(1e-12));
  for (std::size_t k = 1; k < sol.times.size(); ++k) {
    const double m = grid_mass(sol.snapshots[k]);
    CHECK(m <= prev + 1e-12);
    const double sigma = std::sqrt(spec.epsilon * spec.epsilon + 2.0 * 0.03 * sol.times[k]);
    if (4.0 * sigma < 0.5) CHECK(tu::rel_err(m, spec.M) < 1e-3);
    prev = m;
  }

  for (const auto& snap : sol.snapshots)
    for (double u : snap.values) CHECK(u >= -1e-12);
}

TEST_CASE("constant-velocity transport matches the advected analytic solution") {
  ProblemSpec spec;
  spec.L1 = spec.L2 = 1.0;
  spec.T = 0.5;
  spec.x1_star = 0.3;
  spec.x2_star = 0.5;
  spec.epsilon = 0.05;
  spec.Dw = 0.0;
  spec.aL = 0.04 / 0.3;
  spec.aT = 0.03 / 0.3;
  spec.V = 0.3;  // D11 = 0.04, D22 = 0.03 along the x1-aligned flow
  spec.Dx1 = 0.04;
  spec.Dx2 = 0.03;

  auto run = [&](int n) {
    auto v1 = const_grid(n, n, 1.0, 1.0, FieldKind::VelocityX1, 0.3);
    auto v2 = const_grid(n, n, 1.0, 1.0, FieldKind::VelocityX2, 0.0);
    AdeOptions opts;
    opts.nt_save = 5;
    auto sol = solve_ade_fd(v1, v2, spec, opts);
    auto p = spec.mean_field();
    return rel_l2_vs_meanfield(sol.snapshots.back(), sol.times.back(), p, 0.1);
  };

  const double err32 = run(32);
  const double err64 = run(64);
  MESSAGE("rel L2 at 32: ", err32, ", at 64: ", err64);
  CHECK(err64 < 0.05);
  CHECK(err32 / err64 >= 1.3);  // first-order reduction (IC resolution limits 32)
}

TEST_CASE("heterogeneous transport keeps positivity and loses mass monotonically") {
  ProblemSpec spec;  // library defaults: heterogeneous aquifer
  auto K = grf_sample(32, 16, spec.L1 / 32, spec.L2 / 16, spec.mean_Y, spec.sigma_Y,
                      spec.lambda_corr, 97);
  auto h = solve_darcy_fd(K, spec.H, spec.q);
  auto [v1, v2] = darcy_velocity(K, h, spec.phi);
  ProblemSpec run = spec;
  run.T = 0.2;
  AdeOptions opts;
  opts.nt_save = 8;
  auto sol = solve_ade_fd(v1, v2, run, opts);

  double prev = grid_mass(sol.snapshots[0]);
  for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
    for (double u : sol.snapshots[k].values) CHECK(u >= -1e-12);
    const double m = grid_mass(sol.snapshots[k]);
    CHECK(m <= prev + 1e-12);
    prev = m;
  }
}

TEST_CASE("snapshot manifest round-trips") {
  ProblemSpec spec;
  spec.L1 = spec.L2 = 1.0;
  spec.T = 0.1;
  spec.x1_star = spec.x2_star = 0.5;
  spec.epsilon = 0.1;
  spec.Dw = 0.02;
  spec.aL = spec.aT = 0.0;
  spec.V = 0.0;
  auto v1 = const_grid(16, 16, 1.0, 1.0, FieldKind::VelocityX1, 0.0);
  auto v2 = const_grid(16, 16, 1.0, 1.0, FieldKind::VelocityX2, 0.0);
  AdeOptions opts;
  opts.nt_save = 3;
  auto sol = solve_ade_fd(v1, v2, spec, opts);

  const auto dir = std::filesystem::temp_directory_path() / "adepinn_snap_test";
  std::filesystem::create_directories(dir);
  const std::string prefix = (dir / "u").string();
  save_snapshots(sol, prefix);
  auto loaded = load_snapshots(prefix + ".manifest");
  REQUIRE(loaded.times.size() == sol.times.size());
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    CHECK(loaded.times[k] == sol.times[k]);
    for (std::size_t i = 0; i < sol.snapshots[k].values.size(); ++i)
      CHECK(loaded.snapshots[k].values[i] == sol.snapshots[k].values[i]);
  }
  std::filesystem::remove_all(dir);
}
