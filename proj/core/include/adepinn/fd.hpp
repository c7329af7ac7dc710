#pragma once

#include <string>
#include <vector>

#include "adepinn/fields.hpp"

namespace adepinn {

/// Steady Darcy flow on the cell-centered grid of K:
///   div(K grad h) = 0,  h = H at x1 = L1,  -K dh/dx1 = q at x1 = 0,
///   no-flow at the x2 boundaries.
/// Five-point stencil with harmonic-mean inter-cell conductivities, solved
/// directly to a relative residual below 1e-10.
FieldGrid solve_darcy_fd(const FieldGrid& K, double H, double q);

/// Reference transport solution: times[k] and the matching concentration
/// snapshot, including the (mass-rescaled) initial condition at times[0] = 0.
struct AdeSolution {
  std::vector<double> times;
  std::vector<FieldGrid> snapshots;
};

struct AdeOptions {
  int nt_save = 100;          // snapshots after t = 0
  double cfl = 0.5;           // fraction of the stability limit
  DispersionForm dispersion_form = DispersionForm::StandardBear;
};

/// Integrates the conservative ADE u_t + div(v u) = div(D grad u) with the
/// Gaussian source initial condition (rescaled so the discrete mass is
/// exactly M), u = 0 at x1 = 0 and zero-gradient boundaries elsewhere.
/// Explicit first-order upwind advection with central dispersion; the time
/// step satisfies the advective and diffusive stability limits.
AdeSolution solve_ade_fd(const FieldGrid& v1, const FieldGrid& v2, const ProblemSpec& spec,
                         const AdeOptions& opts = {});

/// Writes snapshot files <prefix>_NNN.txt plus a manifest <prefix>.manifest
/// listing "time filename" pairs.
void save_snapshots(const AdeSolution& sol, const std::string& prefix);
AdeSolution load_snapshots(const std::string& manifest_path);

}  // namespace adepinn
