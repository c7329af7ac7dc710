#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "adepinn/nn.hpp"

namespace adepinn::testutil {

inline double rel_err(double got, double want, double floor = 1e-9) {
  return std::abs(got - want) / std::max(floor, std::abs(want));
}

// Symmetric relative error, for comparing two independently computed values.
inline double rel_err_sym(double a, double b, double floor = 1e-9) {
  return std::abs(a - b) / std::max(floor, 0.5 * (std::abs(a) + std::abs(b)));
}

inline double net_value(const ParamSet& ps, std::vector<double> x) {
  EvalRequest req{std::move(x), DerivMask::value_only()};
  return evaluate(ps, req).value;
}

// Central finite difference of the network value along input coordinate k.
inline double fd_grad_input(const ParamSet& ps, const std::vector<double>& x, int k,
                            double h = 1e-4) {
  auto xp = x, xm = x;
  xp[k] += h;
  xm[k] -= h;
  return (net_value(ps, xp) - net_value(ps, xm)) / (2.0 * h);
}

// Central finite difference for second derivatives of the network value.
inline double fd_second_input(const ParamSet& ps, const std::vector<double>& x, int j, int k,
                              double h = 1e-4) {
  if (j == k) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    return (net_value(ps, xp) - 2.0 * net_value(ps, x) + net_value(ps, xm)) / (h * h);
  }
  auto xpp = x, xpm = x, xmp = x, xmm = x;
  xpp[j] += h; xpp[k] += h;
  xpm[j] += h; xpm[k] -= h;
  xmp[j] -= h; xmp[k] += h;
  xmm[j] -= h; xmm[k] -= h;
  return (net_value(ps, xpp) - net_value(ps, xpm) - net_value(ps, xmp) + net_value(ps, xmm)) /
         (4.0 * h * h);
}

// Central finite difference of a scalar function of the flat parameter vector.
inline double fd_param(const std::function<double(const ParamSet&)>& f, const ParamSet& ps,
                       std::size_t i, double h = 1e-5) {
  ParamSet pp = ps, pm = ps;
  pp.flat()[i] += h;
  pm.flat()[i] -= h;
  return (f(pp) - f(pm)) / (2.0 * h);
}

inline std::vector<double> random_point(std::mt19937_64& rng, int dim, double lo = -0.5,
                                        double hi = 0.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(dim);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace adepinn::testutil
