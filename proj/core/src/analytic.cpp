#include "adepinn/analytic.hpp"

#include <cmath>
#include <numbers>

#include "adepinn/errors.hpp"

namespace adepinn {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void MeanFieldParams::validate() const {
  if (!(M > 0.0)) throw InvalidInputError("mean-field M must be positive");
  if (!(epsilon > 0.0)) throw InvalidInputError("source spread epsilon must be positive");
  if (Dx1 < 0.0 || Dx2 < 0.0) throw InvalidInputError("dispersion coefficients must be nonnegative");
  if (!(T > 0.0)) throw InvalidInputError("time horizon T must be positive");
}

void LossWeights::validate() const {
  for (double w : {lambda_res, lambda_ic_or_tc, lambda_bcd, lambda_bcn, lambda_data,
                   lambda_darcy_bcd, lambda_darcy_bcn, lambda_darcy_res})
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInputError("loss weights must be finite and nonnegative");
}

double solution_1d(double x, double t, double eps, double x0, double D, double v) {
  const double var = eps * eps + 2.0 * D * t;
  const double dx = x - x0 - v * t;
  return std::exp(-dx * dx / (2.0 * var)) / std::sqrt(kTwoPi * var);
}

double solution_1d_peak(double t, double eps, double D) {
  return 1.0 / std::sqrt(kTwoPi * (eps * eps + 2.0 * D * t));
}

double mean_field_2d(double x1, double x2, double t, const MeanFieldParams& p) {
  const double v1 = p.epsilon * p.epsilon + 2.0 * p.Dx1 * t;
  const double v2 = p.epsilon * p.epsilon + 2.0 * p.Dx2 * t;
  const double d1 = x1 - p.x1_star - p.V * t;
  const double d2 = x2 - p.x2_star;
  return p.M / (kTwoPi * std::sqrt(v1) * std::sqrt(v2)) *
         std::exp(-0.5 * (d1 * d1 / v1 + d2 * d2 / v2));
}

double normalizer_g(double t, const MeanFieldParams& p) {
  const double v1 = p.epsilon * p.epsilon + 2.0 * p.Dx1 * t;
  const double v2 = p.epsilon * p.epsilon + 2.0 * p.Dx2 * t;
  return p.M / (kTwoPi * std::sqrt(v1) * std::sqrt(v2));
}

double normalizer_dg_dt(double t, const MeanFieldParams& p) {
  const double v1 = p.epsilon * p.epsilon + 2.0 * p.Dx1 * t;
  const double v2 = p.epsilon * p.epsilon + 2.0 * p.Dx2 * t;
  return -normalizer_g(t, p) * (p.Dx1 / v1 + p.Dx2 / v2);
}

double source_decay_f(double t, const MeanFieldParams& p) {
  const double e2 = p.epsilon * p.epsilon;
  return p.T * (p.Dx1 / (e2 + 2.0 * p.Dx1 * t) + p.Dx2 / (e2 + 2.0 * p.Dx2 * t));
}

double f_max(const MeanFieldParams& p) {
  return p.T * (p.Dx1 + p.Dx2) / (p.epsilon * p.epsilon);
}

double mean_source_decay(const MeanFieldParams& p) {
  const double e2 = p.epsilon * p.epsilon;
  return 0.5 * std::log(2.0 * p.Dx1 * p.T + e2) + 0.5 * std::log(2.0 * p.Dx2 * p.T + e2) -
         std::log(e2);
}

LossWeights weight_criteria(const MeanFieldParams& p, double delta_x_tilde) {
  p.validate();
  if (!(delta_x_tilde > 0.0) || delta_x_tilde >= 1.0)
    throw InvalidInputError("delta_x_tilde must lie in (0,1)");
  const double m = mean_source_decay(p);
  LossWeights w;
  w.lambda_res = 1.0;
  // Floored at lambda_res: weights below 1 would under-enforce the source.
  w.lambda_ic_or_tc = std::max(1.0, m * m);
  w.lambda_bcd = w.lambda_ic_or_tc;
  w.lambda_bcn = delta_x_tilde * delta_x_tilde * w.lambda_ic_or_tc;
  w.lambda_data = w.lambda_ic_or_tc;
  w.lambda_darcy_bcd = w.lambda_darcy_bcn = w.lambda_darcy_res = 1.0;
  return w;
}

}  // namespace adepinn
