#include "adepinn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "adepinn/errors.hpp"

namespace adepinn {

void OptimConfig::validate() const {
  if (!(adam_lr > 0.0)) throw InvalidInputError("adam learning rate must be positive");
  if (adam_epochs < 0) throw InvalidInputError("adam epoch count must be nonnegative");
  if (batch_size < 1) throw InvalidInputError("batch size must be positive");
  if (lbfgs_memory < 1) throw InvalidInputError("lbfgs memory must be positive");
  if (!(lbfgs_tol > 0.0)) throw InvalidInputError("lbfgs tolerance must be positive");
  if (lbfgs_max_iters < 0) throw InvalidInputError("lbfgs iteration cap must be nonnegative");
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Completed: return "completed";
    case StopReason::Tolerance: return "tolerance";
    case StopReason::LineSearch: return "line_search";
    case StopReason::NonFinite: return "non_finite";
  }
  return "completed";
}

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

OptimResult adam_minimize(const SteppedObjective& f, std::vector<double> params0,
                          const OptimConfig& cfg) {
  cfg.validate();
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const std::size_t n = params0.size();
  OptimResult res;
  res.params = std::move(params0);
  res.history.reserve(cfg.adam_epochs);

  std::vector<double> grad(n), m(n, 0.0), v(n, 0.0);
  std::vector<double> best = res.params;
  double best_loss = std::numeric_limits<double>::infinity();

  for (int step = 0; step < cfg.adam_epochs; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss = f(step, res.params, grad);
    if (!std::isfinite(loss) || !all_finite(grad)) {
      res.stop = StopReason::NonFinite;
      res.diagnostic = "non-finite loss or gradient at adam step " + std::to_string(step);
      res.params = best;
      return res;
    }
    res.history.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = res.params;
    }
    const double bc1 = 1.0 - std::pow(beta1, step + 1);
    const double bc2 = 1.0 - std::pow(beta2, step + 1);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      res.params[i] -= cfg.adam_lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
  res.stop = StopReason::Completed;
  return res;
}

std::vector<double> lbfgs_two_loop(std::span<const double> grad,
                                   const std::vector<std::vector<double>>& s_list,
                                   const std::vector<std::vector<double>>& y_list,
                                   double gamma) {
  const std::size_t n = grad.size();
  const std::size_t m = s_list.size();
  std::vector<double> q(grad.begin(), grad.end());
  std::vector<double> alpha(m), rho(m);
  for (std::size_t k = 0; k < m; ++k) rho[k] = 1.0 / dot(s_list[k], y_list[k]);
  for (std::size_t k = m; k-- > 0;) {
    alpha[k] = rho[k] * dot(s_list[k], q);
    for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y_list[k][i];
  }
  for (double& x : q) x *= gamma;
  for (std::size_t k = 0; k < m; ++k) {
    const double beta = rho[k] * dot(y_list[k], q);
    for (std::size_t i = 0; i < n; ++i) q[i] += (alpha[k] - beta) * s_list[k][i];
  }
  for (double& x : q) x = -x;
  return q;
}

OptimResult lbfgs_minimize(const Objective& f, std::vector<double> params0,
                           const OptimConfig& cfg) {
  cfg.validate();
  constexpr double c1 = 1e-4, c2 = 0.9;
  const std::size_t n = params0.size();

  OptimResult res;
  res.params = std::move(params0);
  std::vector<double> x = res.params;
  std::vector<double> g(n), gnew(n), xnew(n);

  double fx = f(x, g);
  if (!std::isfinite(fx) || !all_finite(g)) {
    res.stop = StopReason::NonFinite;
    res.diagnostic = "non-finite loss or gradient at the initial point";
    return res;
  }
  res.history.push_back(fx);
  std::vector<double> best = x;
  double best_loss = fx;

  if (fx < cfg.lbfgs_tol) {
    res.stop = StopReason::Tolerance;
    res.params = x;
    return res;
  }

  std::vector<std::vector<double>> s_list, y_list;
  double gamma = 1.0;

  auto finish = [&](StopReason why, std::string diag) {
    res.stop = why;
    res.diagnostic = std::move(diag);
    res.params = best;
    return res;
  };

  for (int iter = 0; iter < cfg.lbfgs_max_iters; ++iter) {
    std::vector<double> d = lbfgs_two_loop(g, s_list, y_list, gamma);
    double dg = dot(d, g);
    if (!(dg < 0.0)) {
      // Not a descent direction (can happen after degenerate updates); reset.
      s_list.clear();
      y_list.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      dg = dot(d, g);
      if (!(dg < 0.0)) return finish(StopReason::LineSearch, "zero gradient direction");
    }

    // Strong Wolfe line search (bracket then zoom).
    const double phi0 = fx, dphi0 = dg;
    double a_prev = 0.0, phi_prev = phi0;
    double a = 1.0;
    double a_lo = 0.0, a_hi = 0.0, phi_lo = phi0;
    bool bracketed = false;
    double phi_a = 0.0, dphi_a = 0.0;
    bool fail = false;

    auto eval_at = [&](double step) {
      for (std::size_t i = 0; i < n; ++i) xnew[i] = x[i] + step * d[i];
      phi_a = f(xnew, gnew);
      dphi_a = dot(gnew, d);
    };

    int evals = 0;
    const int max_evals = 60;
    for (;; ++evals) {
      if (evals >= max_evals) {
        fail = true;
        break;
      }
      eval_at(a);
      if (!std::isfinite(phi_a)) {
        a = 0.5 * (a_prev + a);  // backtrack out of the non-finite region
        continue;
      }
      if (phi_a > phi0 + c1 * a * dphi0 || (evals > 0 && phi_a >= phi_prev)) {
        a_lo = a_prev;
        phi_lo = phi_prev;
        a_hi = a;
        bracketed = true;
        break;
      }
      if (std::abs(dphi_a) <= -c2 * dphi0) break;  // strong Wolfe satisfied
      if (dphi_a >= 0.0) {
        a_lo = a;
        phi_lo = phi_a;
        a_hi = a_prev;
        bracketed = true;
        break;
      }
      a_prev = a;
      phi_prev = phi_a;
      a *= 2.0;
      if (a > 1e10) {
        fail = true;
        break;
      }
    }
    if (bracketed && !fail) {
      for (;; ++evals) {
        if (evals >= max_evals || std::abs(a_hi - a_lo) < 1e-16 * std::max(1.0, std::abs(a_lo))) {
          fail = true;
          break;
        }
        a = 0.5 * (a_lo + a_hi);
        eval_at(a);
        if (!std::isfinite(phi_a) || phi_a > phi0 + c1 * a * dphi0 || phi_a >= phi_lo) {
          a_hi = a;
          continue;
        }
        if (std::abs(dphi_a) <= -c2 * dphi0) break;
        if (dphi_a * (a_hi - a_lo) >= 0.0) a_hi = a_lo;
        a_lo = a;
        phi_lo = phi_a;
      }
    }
    if (fail) return finish(StopReason::LineSearch, "line search failed at iteration " +
                                                        std::to_string(iter));
    if (!all_finite(gnew))
      return finish(StopReason::NonFinite,
                    "non-finite gradient at iteration " + std::to_string(iter));

    // Accept the step; update curvature pairs.
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xnew[i] - x[i];
      y[i] = gnew[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
      if (static_cast<int>(s_list.size()) == cfg.lbfgs_memory) {
        s_list.erase(s_list.begin());
        y_list.erase(y_list.begin());
      }
      gamma = sy / dot(y, y);
      s_list.push_back(std::move(s));
      y_list.push_back(std::move(y));
    }
    x.swap(xnew);
    g.swap(gnew);
    fx = phi_a;
    res.history.push_back(fx);
    if (fx < best_loss) {
      best_loss = fx;
      best = x;
    }
    if (fx < cfg.lbfgs_tol) return finish(StopReason::Tolerance, "");
  }
  return finish(StopReason::Completed, "");
}

}  // namespace adepinn
