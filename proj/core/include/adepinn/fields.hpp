#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adepinn/analytic.hpp"

namespace adepinn {

enum class FieldKind : std::uint8_t {
  Conductivity,
  Head,
  Concentration,
  VelocityX1,
  VelocityX2,
};

const char* to_string(FieldKind k);
FieldKind field_kind_from_string(const std::string& s);

/// Cell-centered scalar samples on a uniform rectangular grid covering
/// [0, nx1*dx1] x [0, nx2*dx2]. values is row-major over (i1, i2):
/// values[i1 * nx2 + i2]; cell (i1, i2) is centered at
/// ((i1+0.5)*dx1, (i2+0.5)*dx2).
struct FieldGrid {
  FieldKind kind = FieldKind::Concentration;
  int nx1 = 0;
  int nx2 = 0;
  double dx1 = 0.0;
  double dx2 = 0.0;
  std::vector<double> values;

  double& at(int i1, int i2) { return values[static_cast<std::size_t>(i1) * nx2 + i2]; }
  double at(int i1, int i2) const { return values[static_cast<std::size_t>(i1) * nx2 + i2]; }
  double x1(int i1) const { return (i1 + 0.5) * dx1; }
  double x2(int i2) const { return (i2 + 0.5) * dx2; }
  double length1() const { return nx1 * dx1; }
  double length2() const { return nx2 * dx2; }
  bool same_grid(const FieldGrid& o) const {
    return nx1 == o.nx1 && nx2 == o.nx2 && dx1 == o.dx1 && dx2 == o.dx2;
  }
  void validate() const;
};

/// Text format: header lines (magic, kind, dims, spacing, count) followed by
/// one value per line in row-major order. Used to pass fields between CLI
/// subcommands.
void save_field(const FieldGrid& g, std::ostream& os);
FieldGrid load_field(std::istream& is);
void save_field_file(const FieldGrid& g, const std::string& path);
FieldGrid load_field_file(const std::string& path);

/// Physical problem description: domain, source, flow and transport
/// coefficients. Dx1/Dx2 are the constant mean-field dispersion coefficients
/// consumed by the normalizer; the heterogeneous dispersion tensor is built
/// from (Dw, aL, aT) and the local velocity.
struct ProblemSpec {
  double L1 = 1.0;
  double L2 = 0.5;
  double T = 0.5;
  double x1_star = 0.15;
  double x2_star = 0.25;
  double M = 1.0;
  double epsilon = 0.025;
  double phi = 0.317;
  double H = 0.0;
  double q = 1.0;
  double Dw = 0.0;
  double aL = 0.02945;
  double aT = 0.02045;
  double sigma_Y = 0.9;
  double lambda_corr = 0.5;
  double mean_Y = 0.0;
  double Dx1 = 0.0929;
  double Dx2 = 0.0645;
  std::optional<double> V;  // mean-field speed override; default q/phi

  void validate() const;
  /// Mean-field speed: user override, else the uniform-flow value q/phi
  /// (the geometric-mean conductivity drops out under a prescribed flux).
  double mean_field_speed() const;
  MeanFieldParams mean_field() const;
  /// Closed-form head scale q*L1/Kbar + H with Kbar = exp(mean_Y).
  double head_scale() const;
};

/// Log-conductivity Gaussian random field with squared-exponential covariance
/// sigma_Y^2 exp(-|x-x'|^2 / lambda^2), sampled by dense Cholesky with 1e-10
/// diagonal jitter; returns K = exp(Y), strictly positive, seed-deterministic.
FieldGrid grf_sample(int nx1, int nx2, double dx1, double dx2, double mean_Y, double sigma_Y,
                     double lambda_corr, std::uint64_t seed);

enum class DispersionForm : std::uint8_t {
  StandardBear,  // off-diagonal (aL - aT) v1 v2 / |v|, no molecular term
  AsWritten,     // off-diagonal includes the molecular coefficient
};

struct DispersionTensor {
  double d11 = 0.0;
  double d22 = 0.0;
  double d12 = 0.0;
  double d21 = 0.0;
};

/// Velocity-dependent dispersion tensor. A stagnation point (|v| = 0) returns
/// the isotropic molecular tensor Dw*I by convention.
DispersionTensor dispersion_tensor(double v1, double v2, double Dw, double aL, double aT,
                                   DispersionForm form = DispersionForm::StandardBear);

/// Darcy velocity v = -(K/phi) grad h with central differences in the
/// interior and one-sided differences at the boundary cells.
std::pair<FieldGrid, FieldGrid> darcy_velocity(const FieldGrid& K, const FieldGrid& h,
                                               double phi);

}  // namespace adepinn
