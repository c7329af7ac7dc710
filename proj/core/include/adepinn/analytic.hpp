#pragma once

#include "adepinn/weights.hpp"

namespace adepinn {

/// Parameters of the constant-coefficient ("mean-field") transport problem
/// whose closed-form solution defines the time-dependent normalizer. V is the
/// mean-field speed along x1; Dx1/Dx2 are the longitudinal/transverse
/// dispersion coefficients seen by the normalizer.
struct MeanFieldParams {
  double M = 1.0;
  double epsilon = 0.025;
  double x1_star = 0.15;
  double x2_star = 0.25;
  double V = 0.0;
  double Dx1 = 0.0;
  double Dx2 = 0.0;
  double T = 0.5;

  void validate() const;
};

/// Free-space solution of the 1D constant-coefficient ADE with a Gaussian
/// source of unit mass:  (2 pi (eps^2 + 2 D t))^{-1/2}
/// exp(-(x - x0 - v t)^2 / (2 (eps^2 + 2 D t))).
double solution_1d(double x, double t, double eps, double x0, double D, double v);

/// Peak height of solution_1d at time t (its value at x = x0 + v t).
double solution_1d_peak(double t, double eps, double D);

/// Free-space product-Gaussian solution of the 2D mean-field ADE with total
/// mass M, advected along x1 at speed V.
double mean_field_2d(double x1, double x2, double t, const MeanFieldParams& p);

/// The time-dependent normalizer: the spatial maximum of mean_field_2d,
/// g(t) = M / (2 pi sqrt(eps^2 + 2 Dx1 t) sqrt(eps^2 + 2 Dx2 t)).
double normalizer_g(double t, const MeanFieldParams& p);

/// dg/dt, in the original (physical) time variable.
double normalizer_dg_dt(double t, const MeanFieldParams& p);

/// The dimensionless source factor f(t) = -(T/g) dg/dt
///   = T [ Dx1/(eps^2 + 2 Dx1 t) + Dx2/(eps^2 + 2 Dx2 t) ],
/// nonnegative and decreasing for positive dispersion.
double source_decay_f(double t, const MeanFieldParams& p);

/// max_t f(t), attained at t = 0: T (Dx1 + Dx2) / eps^2.
double f_max(const MeanFieldParams& p);

/// Time average (1/T) \int_0^T f dt in closed form; its square is the
/// mean-based initial-condition weight.
double mean_source_decay(const MeanFieldParams& p);

/// Loss-weight criteria derived from the mean-field solution:
///   lambda_res = 1,
///   lambda_ic  = [ 0.5 ln(2 Dx1 T + eps^2) + 0.5 ln(2 Dx2 T + eps^2)
///                  - ln(eps^2) ]^2   (floored at 1),
///   lambda_bcd = lambda_ic,
///   lambda_bcn = delta_x_tilde^2 * lambda_ic.
/// lambda_data is set equal to lambda_ic; the Darcy weights stay 1.
LossWeights weight_criteria(const MeanFieldParams& p, double delta_x_tilde);

}  // namespace adepinn
