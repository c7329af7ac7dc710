#include "adepinn/fd.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "adepinn/errors.hpp"

namespace adepinn {

namespace {
inline double harm(double a, double b) { return 2.0 * a * b / (a + b); }
}

FieldGrid solve_darcy_fd(const FieldGrid& K, double H, double q) {
  K.validate();
  if (K.nx1 < 3 || K.nx2 < 3) throw InvalidInputError("darcy solver requires at least a 3x3 grid");
  const int n1 = K.nx1, n2 = K.nx2;
  const double dx1 = K.dx1, dx2 = K.dx2;
  const int n = n1 * n2;
  auto idx = [n2](int i, int j) { return i * n2 + j; };

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * 5);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);

  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const int a = idx(i, j);
      if (i + 1 < n1) {
        const double t = dx2 * harm(K.at(i, j), K.at(i + 1, j)) / dx1;
        diag(a) += t;
        diag(idx(i + 1, j)) += t;
        trips.emplace_back(a, idx(i + 1, j), -t);
        trips.emplace_back(idx(i + 1, j), a, -t);
      } else {
        // Dirichlet head at x1 = L1 through the half cell.
        const double t = dx2 * K.at(i, j) / (0.5 * dx1);
        diag(a) += t;
        b(a) += t * H;
      }
      if (j + 1 < n2) {
        const double t = dx1 * harm(K.at(i, j), K.at(i, j + 1)) / dx2;
        diag(a) += t;
        diag(idx(i, j + 1)) += t;
        trips.emplace_back(a, idx(i, j + 1), -t);
        trips.emplace_back(idx(i, j + 1), a, -t);
      }
      if (i == 0) b(a) += q * dx2;  // prescribed influx at x1 = 0
    }
  for (int a = 0; a < n; ++a) trips.emplace_back(a, a, diag(a));

  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success) throw SolverFailureError("darcy system factorization failed");
  Eigen::VectorXd h = solver.solve(b);
  if (solver.info() != Eigen::Success) throw SolverFailureError("darcy solve failed");
  const double resid = (A * h - b).norm() / std::max(1.0, b.norm());
  if (!(resid < 1e-10))
    throw SolverFailureError("darcy residual norm " + std::to_string(resid) + " exceeds 1e-10");

  FieldGrid out = K;
  out.kind = FieldKind::Head;
  for (int a = 0; a < n; ++a) out.values[a] = h(a);
  return out;
}

AdeSolution solve_ade_fd(const FieldGrid& v1, const FieldGrid& v2, const ProblemSpec& spec,
                         const AdeOptions& opts) {
  v1.validate();
  v2.validate();
  spec.validate();
  if (!v1.same_grid(v2)) throw InvalidInputError("velocity component grids do not match");
  if (opts.nt_save < 1) throw InvalidInputError("nt_save must be at least 1");
  const int n1 = v1.nx1, n2 = v1.nx2;
  const double dx1 = v1.dx1, dx2 = v1.dx2;
  const std::size_t n = static_cast<std::size_t>(n1) * n2;

  // Cell dispersion tensors from the local velocity.
  std::vector<double> D11(n), D22(n), D12(n), D21(n);
  for (std::size_t a = 0; a < n; ++a) {
    const auto d = dispersion_tensor(v1.values[a], v2.values[a], spec.Dw, spec.aL, spec.aT,
                                     opts.dispersion_form);
    D11[a] = d.d11;
    D22[a] = d.d22;
    D12[a] = d.d12;
    D21[a] = d.d21;
  }

  // Stability limit over cells.
  double lim = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    const double denom = std::abs(v1.values[a]) / dx1 + std::abs(v2.values[a]) / dx2 +
                         2.0 * D11[a] / (dx1 * dx1) + 2.0 * D22[a] / (dx2 * dx2) +
                         (std::abs(D12[a]) + std::abs(D21[a])) / (dx1 * dx2);
    if (denom > 0.0) lim = std::min(lim, 1.0 / denom);
  }
  double dt = std::isfinite(lim) ? opts.cfl * lim : spec.T / opts.nt_save;
  if (dt < spec.T * 1e-8)
    throw StabilityError("stable time step below T*1e-8; refine the grid or reduce velocities");

  // Initial condition, rescaled to exact discrete mass M.
  FieldGrid u = v1;
  u.kind = FieldKind::Concentration;
  const double e2 = spec.epsilon * spec.epsilon;
  const double amp = spec.M / (2.0 * std::numbers::pi * e2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const double d1 = u.x1(i) - spec.x1_star;
      const double d2 = u.x2(j) - spec.x2_star;
      u.at(i, j) = amp * std::exp(-(d1 * d1 + d2 * d2) / (2.0 * e2));
    }
  double mass = 0.0;
  for (double v : u.values) mass += v;
  mass *= dx1 * dx2;
  if (!(mass > 0.0)) throw InvalidInputError("initial condition has nonpositive discrete mass");
  for (double& v : u.values) v *= spec.M / mass;

  AdeSolution sol;
  sol.times.push_back(0.0);
  sol.snapshots.push_back(u);

  std::vector<double> du1(n), du2(n), unew(n);
  auto at = [n2](std::vector<double>& w, int i, int j) -> double& {
    return w[static_cast<std::size_t>(i) * n2 + j];
  };

  auto step = [&](double h) {
    // Cell-centered gradients for the cross-dispersion terms.
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n2; ++j) {
        double g1;
        if (n1 == 1)
          g1 = 0.0;
        else if (i == 0)
          g1 = (u.at(1, j) - u.at(0, j)) / dx1;
        else if (i == n1 - 1)
          g1 = (u.at(i, j) - u.at(i - 1, j)) / dx1;
        else
          g1 = (u.at(i + 1, j) - u.at(i - 1, j)) / (2.0 * dx1);
        double g2;
        if (n2 == 1)
          g2 = 0.0;
        else if (j == 0)
          g2 = (u.at(i, 1) - u.at(i, 0)) / dx2;
        else if (j == n2 - 1)
          g2 = (u.at(i, j) - u.at(i, j - 1)) / dx2;
        else
          g2 = (u.at(i, j + 1) - u.at(i, j - 1)) / (2.0 * dx2);
        at(du1, i, j) = g1;
        at(du2, i, j) = g2;
      }

    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n2; ++j) {
        const std::size_t a = static_cast<std::size_t>(i) * n2 + j;
        // Fluxes in +x1 at the left and right faces of the cell.
        double fxl, fxr;
        if (i == 0) {
          const double vf = v1.values[a];
          const double adv = vf >= 0.0 ? 0.0 : vf * u.values[a];  // Dirichlet u=0 upstream
          fxl = adv - D11[a] * (u.values[a] - 0.0) / (0.5 * dx1);
        } else {
          const std::size_t al = a - n2;
          const double vf = 0.5 * (v1.values[al] + v1.values[a]);
          const double uu = vf >= 0.0 ? u.values[al] : u.values[a];
          const double d11f = 0.5 * (D11[al] + D11[a]);
          const double d12f = 0.5 * (D12[al] + D12[a]);
          const double g2f = 0.5 * (du2[al] + du2[a]);
          fxl = vf * uu - d11f * (u.values[a] - u.values[al]) / dx1 - d12f * g2f;
        }
        if (i == n1 - 1) {
          const double vf = v1.values[a];
          fxr = vf >= 0.0 ? vf * u.values[a] : 0.0;  // zero-gradient outflow
        } else {
          const std::size_t ar = a + n2;
          const double vf = 0.5 * (v1.values[a] + v1.values[ar]);
          const double uu = vf >= 0.0 ? u.values[a] : u.values[ar];
          const double d11f = 0.5 * (D11[a] + D11[ar]);
          const double d12f = 0.5 * (D12[a] + D12[ar]);
          const double g2f = 0.5 * (du2[a] + du2[ar]);
          fxr = vf * uu - d11f * (u.values[ar] - u.values[a]) / dx1 - d12f * g2f;
        }
        // Fluxes in +x2 at the bottom and top faces.
        double fyb, fyt;
        if (j == 0) {
          const double vf = v2.values[a];
          fyb = vf >= 0.0 ? 0.0 : vf * u.values[a];
        } else {
          const std::size_t ab = a - 1;
          const double vf = 0.5 * (v2.values[ab] + v2.values[a]);
          const double uu = vf >= 0.0 ? u.values[ab] : u.values[a];
          const double d22f = 0.5 * (D22[ab] + D22[a]);
          const double d21f = 0.5 * (D21[ab] + D21[a]);
          const double g1f = 0.5 * (du1[ab] + du1[a]);
          fyb = vf * uu - d22f * (u.values[a] - u.values[ab]) / dx2 - d21f * g1f;
        }
        if (j == n2 - 1) {
          const double vf = v2.values[a];
          fyt = vf >= 0.0 ? vf * u.values[a] : 0.0;
        } else {
          const std::size_t atp = a + 1;
          const double vf = 0.5 * (v2.values[a] + v2.values[atp]);
          const double uu = vf >= 0.0 ? u.values[a] : u.values[atp];
          const double d22f = 0.5 * (D22[a] + D22[atp]);
          const double d21f = 0.5 * (D21[a] + D21[atp]);
          const double g1f = 0.5 * (du1[a] + du1[atp]);
          fyt = vf * uu - d22f * (u.values[atp] - u.values[a]) / dx2 - d21f * g1f;
        }
        unew[a] = u.values[a] - h * ((fxr - fxl) / dx1 + (fyt - fyb) / dx2);
      }
    u.values.swap(unew);
  };

  for (int k = 1; k <= opts.nt_save; ++k) {
    const double t0 = spec.T * (k - 1) / opts.nt_save;
    const double t1 = spec.T * k / opts.nt_save;
    const int steps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / dt - 1e-12)));
    const double h = (t1 - t0) / steps;
    for (int s = 0; s < steps; ++s) step(h);
    sol.times.push_back(t1);
    sol.snapshots.push_back(u);
  }
  return sol;
}

namespace {
constexpr const char* kManifestMagic = "adepinn-manifest-1";
}

void save_snapshots(const AdeSolution& sol, const std::string& prefix) {
  std::ofstream mf(prefix + ".manifest");
  if (!mf) throw InvalidInputError("cannot open manifest for writing: " + prefix + ".manifest");
  mf << kManifestMagic << "\n";
  char buf[64];
  for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
    std::ostringstream name;
    name << prefix << "_" << k << ".txt";
    save_field_file(sol.snapshots[k], name.str());
    std::snprintf(buf, sizeof buf, "%.17g ", sol.times[k]);
    mf << buf << std::filesystem::path(name.str()).filename().string() << "\n";
  }
}

AdeSolution load_snapshots(const std::string& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw InvalidInputError("cannot open manifest: " + manifest_path);
  std::string magic;
  std::getline(mf, magic);
  if (magic != kManifestMagic) throw InvalidInputError("not an adepinn snapshot manifest");
  AdeSolution sol;
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  double t;
  std::string name;
  while (mf >> t >> name) {
    sol.times.push_back(t);
    sol.snapshots.push_back(load_field_file((dir / name).string()));
  }
  if (sol.times.empty()) throw InvalidInputError("snapshot manifest is empty");
  return sol;
}

}  // namespace adepinn
