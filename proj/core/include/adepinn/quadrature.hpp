#pragma once

#include <cstddef>

namespace adepinn {

/// Composite Simpson rule on [a,b] with n subintervals (n rounded up to even).
template <typename F>
double simpson(F&& f, double a, double b, std::size_t n) {
  if (n < 2) n = 2;
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double sum = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) sum += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

/// Composite trapezoid rule on [a,b] with n subintervals.
template <typename F>
double trapezoid(F&& f, double a, double b, std::size_t n) {
  if (n < 1) n = 1;
  const double h = (b - a) / static_cast<double>(n);
  double sum = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i < n; ++i) sum += f(a + h * i);
  return sum * h;
}

}  // namespace adepinn
