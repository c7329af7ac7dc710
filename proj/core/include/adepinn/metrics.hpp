#pragma once

#include <span>
#include <string>
#include <vector>

#include "adepinn/fields.hpp"

namespace adepinn {

/// Relative L2 error at one time: sqrt(sum (u_hat - u)^2 / sum u^2) over all
/// grid nodes.
double rel_l2_at_time(const FieldGrid& u_hat, const FieldGrid& u_ref);

/// Time-averaged relative L2 error with the sums pooled over all snapshots
/// (a single ratio, not the mean of per-time errors).
double rel_l2_time_avg(std::span<const FieldGrid> u_hat, std::span<const FieldGrid> u_ref);

struct PlumeDiagnostics {
  double mass = 0.0;
  double x1c = 0.0;
  double x2c = 0.0;
  bool center_defined = false;
};

/// Mass and center of mass by 2D trapezoidal quadrature over the cell-center
/// samples. Non-positive mass leaves the center undefined (flagged), with the
/// mass still reported.
PlumeDiagnostics plume_diagnostics(const FieldGrid& u);

/// One CSV row per snapshot: time, rel_l2, mass, x1c, x2c.
void write_metrics_csv(const std::string& path, std::span<const double> times,
                       std::span<const double> rel_l2, std::span<const PlumeDiagnostics> diags);

}  // namespace adepinn
