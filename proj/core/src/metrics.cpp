#include "adepinn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "adepinn/errors.hpp"

namespace adepinn {

namespace {
void accumulate_sq(const FieldGrid& u_hat, const FieldGrid& u_ref, double& num, double& den) {
  u_hat.validate();
  u_ref.validate();
  if (!u_hat.same_grid(u_ref)) throw InvalidInputError("rel_l2 grids do not match");
  for (std::size_t i = 0; i < u_ref.values.size(); ++i) {
    const double d = u_hat.values[i] - u_ref.values[i];
    num += d * d;
    den += u_ref.values[i] * u_ref.values[i];
  }
}
}  // namespace

double rel_l2_at_time(const FieldGrid& u_hat, const FieldGrid& u_ref) {
  double num = 0.0, den = 0.0;
  accumulate_sq(u_hat, u_ref, num, den);
  if (!(den > 0.0)) throw UndefinedMetricError("reference norm is zero; rel_l2 undefined");
  return std::sqrt(num / den);
}

double rel_l2_time_avg(std::span<const FieldGrid> u_hat, std::span<const FieldGrid> u_ref) {
  if (u_hat.size() != u_ref.size() || u_hat.empty())
    throw InvalidInputError("rel_l2_time_avg needs matching nonempty snapshot lists");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < u_hat.size(); ++k) accumulate_sq(u_hat[k], u_ref[k], num, den);
  if (!(den > 0.0)) throw UndefinedMetricError("reference norm is zero; rel_l2 undefined");
  return std::sqrt(num / den);
}

PlumeDiagnostics plume_diagnostics(const FieldGrid& u) {
  u.validate();
  PlumeDiagnostics d;
  double m = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < u.nx1; ++i) {
    const double wi = (i == 0 || i == u.nx1 - 1) ? 0.5 : 1.0;
    for (int j = 0; j < u.nx2; ++j) {
      const double wj = (j == 0 || j == u.nx2 - 1) ? 0.5 : 1.0;
      const double w = wi * wj * u.at(i, j);
      m += w;
      m1 += w * u.x1(i);
      m2 += w * u.x2(j);
    }
  }
  const double da = u.dx1 * u.dx2;
  d.mass = m * da;
  if (d.mass > 0.0) {
    d.center_defined = true;
    d.x1c = m1 * da / d.mass;
    d.x2c = m2 * da / d.mass;
  }
  return d;
}

void write_metrics_csv(const std::string& path, std::span<const double> times,
                       std::span<const double> rel_l2, std::span<const PlumeDiagnostics> diags) {
  if (times.size() != rel_l2.size() || times.size() != diags.size())
    throw InvalidInputError("metrics CSV columns must have equal lengths");
  std::ofstream os(path);
  if (!os) throw InvalidInputError("cannot open metrics CSV for writing: " + path);
  os << "time,rel_l2,mass,x1c,x2c\n";
  char buf[200];
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", times[k], rel_l2[k],
                  diags[k].mass, diags[k].center_defined ? diags[k].x1c : std::nan(""),
                  diags[k].center_defined ? diags[k].x2c : std::nan(""));
    os << buf;
  }
}

}  // namespace adepinn
