#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "adepinn/analytic.hpp"
#include "adepinn/fields.hpp"

namespace adepinn {

enum class SampleStrategy : std::uint8_t { Lhs, AdaptiveTime };
const char* to_string(SampleStrategy s);
SampleStrategy sample_strategy_from_string(const std::string& s);

/// Boundary ids of the dimensionless domain [-0.5,0.5]^2.
enum Boundary : int {
  kBoundaryX1Lo = 0,  // x1 = -0.5 (Dirichlet)
  kBoundaryX1Hi = 1,  // x1 = +0.5 (Neumann)
  kBoundaryX2Lo = 2,  // x2 = -0.5 (Neumann)
  kBoundaryX2Hi = 3,  // x2 = +0.5 (Neumann)
};

/// Outward unit normal (n1, n2) of a boundary id.
std::array<double, 2> boundary_normal(int boundary);

/// Point sets feeding one PINN loss assembly, all in dimensionless
/// coordinates. IC targets store the raw (physical) initial value u(x, 0);
/// assemblies normalize as needed.
struct SamplePlan {
  struct IcPoint {
    double x1, x2;
    double u0;  // physical initial value
  };
  struct BcPoint {
    int boundary;
    double x1, x2, t;
  };

  std::vector<std::array<double, 3>> residual_points;  // (x1~, x2~, t~)
  std::vector<IcPoint> ic_points;
  std::vector<BcPoint> bc_dirichlet;
  std::vector<BcPoint> bc_neumann;
  SampleStrategy strategy = SampleStrategy::AdaptiveTime;

  void validate() const;
};

/// Latin hypercube sample of n points, row-major (n x dims): exactly one
/// coordinate in each of the n equal bins along every axis.
std::vector<double> lhs(std::size_t n, int dims,
                        const std::vector<std::pair<double, double>>& bounds,
                        std::uint64_t seed);

/// Tabulated CDF of the normalized decay density g~(t) = g(t)/int_0^T g.
struct GCdfTable {
  std::vector<double> t;
  std::vector<double> cdf;
  double integral_g = 0.0;  // int_0^T g(t) dt

  double cdf_at(double time) const;  // linear interpolation
  double inverse(double u) const;    // inverse CDF by bisection + interpolation
};

GCdfTable tabulate_g_cdf(const MeanFieldParams& p, std::size_t nodes = 10001);

/// The two halves of the adaptive-in-time residual sample, in physical time:
/// one half drawn from g~ by inverse-CDF sampling, one half by 1D LHS on
/// [0, T] so late times keep coverage.
struct AdaptiveTimeParts {
  std::vector<double> adaptive;
  std::vector<double> lhs_half;
};

AdaptiveTimeParts adaptive_time_parts(std::size_t n, const MeanFieldParams& p,
                                      std::uint64_t seed, double adaptive_ratio = 0.5);

/// Shuffled merge of adaptive_time_parts mapped to t~ in (-0.5, 0.5].
std::vector<double> adaptive_time_sample(std::size_t n, const MeanFieldParams& p,
                                         std::uint64_t seed, double adaptive_ratio = 0.5);

/// Point counts for build_sample_plan. Boundary points are per time slice:
/// n_bc_x2_side along each x1-boundary (the sides of length L2), n_bc_x1_side
/// along each x2-boundary.
struct SampleCounts {
  int n_res = 8000;
  int n_ic = 1000;          // IC points when sampling by LHS (no grid)
  double ic_fraction = 0.75;  // fraction of grid nodes when a grid is given
  int n_bc_x2_side = 14;
  int n_bc_x1_side = 32;
  int n_t = 20;
  double adaptive_ratio = 0.5;
};

/// Assembles residual/IC/boundary point sets for the dimensionless domain.
/// If ic_grid is non-null, IC points are drawn without replacement from its
/// cells ("fraction of the nodal values"); otherwise they are LHS points with
/// the Gaussian-source value attached. Boundary points sit exactly on their
/// boundary at n_t equal time intervals m*T/n_t, m = 1..n_t.
SamplePlan build_sample_plan(const ProblemSpec& spec, const SampleCounts& counts,
                             SampleStrategy strategy, std::uint64_t seed,
                             const FieldGrid* ic_grid = nullptr);

void save_plan(const SamplePlan& plan, std::ostream& os);
SamplePlan load_plan(std::istream& is);
void save_plan_file(const SamplePlan& plan, const std::string& path);
SamplePlan load_plan_file(const std::string& path);

/// Kolmogorov-Smirnov statistic of samples against a CDF callable.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::max((i + 1) / n - f, f - i / n));
  }
  return d;
}

}  // namespace adepinn
