#include "adepinn/fields.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "adepinn/errors.hpp"

namespace adepinn {

const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::Conductivity: return "conductivity";
    case FieldKind::Head: return "head";
    case FieldKind::Concentration: return "concentration";
    case FieldKind::VelocityX1: return "velocity_x1";
    case FieldKind::VelocityX2: return "velocity_x2";
  }
  return "concentration";
}

FieldKind field_kind_from_string(const std::string& s) {
  if (s == "conductivity") return FieldKind::Conductivity;
  if (s == "head") return FieldKind::Head;
  if (s == "concentration") return FieldKind::Concentration;
  if (s == "velocity_x1") return FieldKind::VelocityX1;
  if (s == "velocity_x2") return FieldKind::VelocityX2;
  throw InvalidInputError("unknown field kind: " + s);
}

void FieldGrid::validate() const {
  if (nx1 <= 0 || nx2 <= 0) throw InvalidInputError("field grid dimensions must be positive");
  if (!(dx1 > 0.0) || !(dx2 > 0.0)) throw InvalidInputError("field grid spacing must be positive");
  if (values.size() != static_cast<std::size_t>(nx1) * nx2)
    throw InvalidInputError("field value count does not match grid dimensions");
  if (kind == FieldKind::Conductivity)
    for (double v : values)
      if (!(v > 0.0)) throw InvalidInputError("conductivity values must be strictly positive");
}

namespace {
constexpr const char* kFieldMagic = "adepinn-field-1";
}

void save_field(const FieldGrid& g, std::ostream& os) {
  g.validate();
  os << kFieldMagic << "\n";
  os << "kind " << to_string(g.kind) << "\n";
  os << "dims " << g.nx1 << ' ' << g.nx2 << "\n";
  char buf[80];
  std::snprintf(buf, sizeof buf, "spacing %.17g %.17g\n", g.dx1, g.dx2);
  os << buf;
  os << "values " << g.values.size() << "\n";
  for (double v : g.values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    os << buf;
  }
}

FieldGrid load_field(std::istream& is) {
  std::string magic;
  std::getline(is, magic);
  if (magic != kFieldMagic) throw InvalidInputError("not an adepinn field file (bad magic)");
  FieldGrid g;
  std::string line, key;
  std::size_t count = 0;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    ls >> key;
    if (key == "kind") {
      std::string v;
      ls >> v;
      g.kind = field_kind_from_string(v);
    } else if (key == "dims") {
      ls >> g.nx1 >> g.nx2;
    } else if (key == "spacing") {
      ls >> g.dx1 >> g.dx2;
    } else if (key == "values") {
      ls >> count;
      break;
    } else {
      throw InvalidInputError("unexpected field header line: " + line);
    }
  }
  g.values.reserve(count);
  double v;
  while (g.values.size() < count && is >> v) g.values.push_back(v);
  if (g.values.size() != count) throw InvalidInputError("field file truncated");
  g.validate();
  return g;
}

void save_field_file(const FieldGrid& g, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInputError("cannot open field file for writing: " + path);
  save_field(g, os);
}

FieldGrid load_field_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInputError("cannot open field file: " + path);
  return load_field(is);
}

void ProblemSpec::validate() const {
  for (double v : {L1, L2, T, M, epsilon, phi})
    if (!(v > 0.0)) throw InvalidInputError("lengths, T, M, epsilon, and phi must be positive");
  if (aT < 0.0 || aL < aT) throw InvalidInputError("dispersivities must satisfy aL >= aT >= 0");
  if (Dw < 0.0) throw InvalidInputError("molecular diffusion must be nonnegative");
  if (sigma_Y < 0.0) throw InvalidInputError("sigma_Y must be nonnegative");
  if (!(lambda_corr > 0.0)) throw InvalidInputError("correlation length must be positive");
  if (Dx1 < 0.0 || Dx2 < 0.0) throw InvalidInputError("mean-field dispersion must be nonnegative");
}

double ProblemSpec::mean_field_speed() const { return V ? *V : q / phi; }

MeanFieldParams ProblemSpec::mean_field() const {
  MeanFieldParams p;
  p.M = M;
  p.epsilon = epsilon;
  p.x1_star = x1_star;
  p.x2_star = x2_star;
  p.V = mean_field_speed();
  p.Dx1 = Dx1;
  p.Dx2 = Dx2;
  p.T = T;
  return p;
}

double ProblemSpec::head_scale() const { return q * L1 / std::exp(mean_Y) + H; }

FieldGrid grf_sample(int nx1, int nx2, double dx1, double dx2, double mean_Y, double sigma_Y,
                     double lambda_corr, std::uint64_t seed) {
  if (nx1 <= 0 || nx2 <= 0 || !(dx1 > 0.0) || !(dx2 > 0.0))
    throw InvalidInputError("grf_sample requires a valid grid");
  if (!(lambda_corr > 0.0)) throw InvalidInputError("correlation length must be positive");
  if (sigma_Y < 0.0) throw InvalidInputError("sigma_Y must be nonnegative");

  FieldGrid g;
  g.kind = FieldKind::Conductivity;
  g.nx1 = nx1;
  g.nx2 = nx2;
  g.dx1 = dx1;
  g.dx2 = dx2;
  const std::size_t n = static_cast<std::size_t>(nx1) * nx2;
  g.values.assign(n, 0.0);

  if (sigma_Y == 0.0) {
    std::fill(g.values.begin(), g.values.end(), std::exp(mean_Y));
    return g;
  }

  Eigen::MatrixXd cov(n, n);
  const double inv_l2 = 1.0 / (lambda_corr * lambda_corr);
  const double s2 = sigma_Y * sigma_Y;
  for (std::size_t a = 0; a < n; ++a) {
    const int i1 = static_cast<int>(a) / nx2, i2 = static_cast<int>(a) % nx2;
    const double xa1 = (i1 + 0.5) * dx1, xa2 = (i2 + 0.5) * dx2;
    for (std::size_t b = a; b < n; ++b) {
      const int j1 = static_cast<int>(b) / nx2, j2 = static_cast<int>(b) % nx2;
      const double d1 = xa1 - (j1 + 0.5) * dx1;
      const double d2 = xa2 - (j2 + 0.5) * dx2;
      const double c = s2 * std::exp(-(d1 * d1 + d2 * d2) * inv_l2);
      cov(a, b) = c;
      cov(b, a) = c;
    }
    cov(a, a) += 1e-10;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw SolverFailureError(
        "covariance factorization failed: matrix not positive definite after 1e-10 jitter "
        "(grid too fine for the correlation length)");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z(static_cast<Eigen::Index>(i)) = nd(rng);
  Eigen::VectorXd y = llt.matrixL() * z;
  for (std::size_t i = 0; i < n; ++i)
    g.values[i] = std::exp(mean_Y + y(static_cast<Eigen::Index>(i)));
  return g;
}

DispersionTensor dispersion_tensor(double v1, double v2, double Dw, double aL, double aT,
                                   DispersionForm form) {
  DispersionTensor d;
  const double vn = std::hypot(v1, v2);
  if (vn == 0.0) {
    d.d11 = d.d22 = Dw;
    d.d12 = d.d21 = 0.0;
    return d;
  }
  d.d11 = Dw + aL * v1 * v1 / vn + aT * v2 * v2 / vn;
  d.d22 = Dw + aL * v2 * v2 / vn + aT * v1 * v1 / vn;
  double off = (aL - aT) * v1 * v2 / vn;
  if (form == DispersionForm::AsWritten) off += Dw;
  d.d12 = d.d21 = off;
  return d;
}

std::pair<FieldGrid, FieldGrid> darcy_velocity(const FieldGrid& K, const FieldGrid& h,
                                               double phi) {
  K.validate();
  h.validate();
  if (!K.same_grid(h)) throw InvalidInputError("conductivity and head grids do not match");
  if (!(phi > 0.0)) throw InvalidInputError("porosity must be positive");

  FieldGrid v1 = K, v2 = K;
  v1.kind = FieldKind::VelocityX1;
  v2.kind = FieldKind::VelocityX2;
  for (int i = 0; i < K.nx1; ++i)
    for (int j = 0; j < K.nx2; ++j) {
      double dh1, dh2;
      if (K.nx1 == 1)
        dh1 = 0.0;
      else if (i == 0)
        dh1 = (h.at(1, j) - h.at(0, j)) / K.dx1;
      else if (i == K.nx1 - 1)
        dh1 = (h.at(i, j) - h.at(i - 1, j)) / K.dx1;
      else
        dh1 = (h.at(i + 1, j) - h.at(i - 1, j)) / (2.0 * K.dx1);
      if (K.nx2 == 1)
        dh2 = 0.0;
      else if (j == 0)
        dh2 = (h.at(i, 1) - h.at(i, 0)) / K.dx2;
      else if (j == K.nx2 - 1)
        dh2 = (h.at(i, j) - h.at(i, j - 1)) / K.dx2;
      else
        dh2 = (h.at(i, j + 1) - h.at(i, j - 1)) / (2.0 * K.dx2);
      v1.at(i, j) = -K.at(i, j) / phi * dh1;
      v2.at(i, j) = -K.at(i, j) / phi * dh2;
    }
  return {std::move(v1), std::move(v2)};
}

}  // namespace adepinn
