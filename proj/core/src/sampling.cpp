#include "adepinn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "adepinn/errors.hpp"

namespace adepinn {

const char* to_string(SampleStrategy s) {
  return s == SampleStrategy::Lhs ? "lhs" : "adaptive_time";
}

SampleStrategy sample_strategy_from_string(const std::string& s) {
  if (s == "lhs") return SampleStrategy::Lhs;
  if (s == "adaptive_time") return SampleStrategy::AdaptiveTime;
  throw InvalidInputError("unknown sampling strategy: " + s);
}

std::array<double, 2> boundary_normal(int boundary) {
  switch (boundary) {
    case kBoundaryX1Lo: return {-1.0, 0.0};
    case kBoundaryX1Hi: return {1.0, 0.0};
    case kBoundaryX2Lo: return {0.0, -1.0};
    case kBoundaryX2Hi: return {0.0, 1.0};
  }
  throw InvalidInputError("unknown boundary id");
}

void SamplePlan::validate() const {
  auto in_box = [](double v) { return v >= -0.5 && v <= 0.5; };
  for (const auto& p : residual_points) {
    if (!in_box(p[0]) || !in_box(p[1]) || !in_box(p[2]))
      throw InvalidPlanError("residual point outside the dimensionless domain");
    if (p[2] <= -0.5) throw InvalidPlanError("residual time must exceed the initial time");
  }
  for (const auto& p : ic_points)
    if (!in_box(p.x1) || !in_box(p.x2))
      throw InvalidPlanError("IC point outside the dimensionless domain");
  auto check_bc = [&](const BcPoint& p) {
    if (!in_box(p.x1) || !in_box(p.x2) || !in_box(p.t))
      throw InvalidPlanError("boundary point outside the dimensionless domain");
    const bool on = (p.boundary == kBoundaryX1Lo && p.x1 == -0.5) ||
                    (p.boundary == kBoundaryX1Hi && p.x1 == 0.5) ||
                    (p.boundary == kBoundaryX2Lo && p.x2 == -0.5) ||
                    (p.boundary == kBoundaryX2Hi && p.x2 == 0.5);
    if (!on) throw InvalidPlanError("boundary point does not lie on its boundary");
  };
  for (const auto& p : bc_dirichlet) check_bc(p);
  for (const auto& p : bc_neumann) check_bc(p);
}

std::vector<double> lhs(std::size_t n, int dims,
                        const std::vector<std::pair<double, double>>& bounds,
                        std::uint64_t seed) {
  if (n < 1 || dims < 1) throw InvalidInputError("lhs requires n >= 1 and dims >= 1");
  if (bounds.size() != static_cast<std::size_t>(dims))
    throw InvalidInputError("lhs bounds must match dims");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> pts(n * dims);
  std::vector<std::size_t> perm(n);
  for (int d = 0; d < dims; ++d) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto [lo, hi] = bounds[d];
    const double w = (hi - lo) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      pts[i * dims + d] = lo + (static_cast<double>(perm[i]) + u01(rng)) * w;
  }
  return pts;
}

double GCdfTable::cdf_at(double time) const {
  if (time <= t.front()) return 0.0;
  if (time >= t.back()) return 1.0;
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
  return cdf[i - 1] + w * (cdf[i] - cdf[i - 1]);
}

double GCdfTable::inverse(double u) const {
  if (u <= 0.0) return t.front();
  if (u >= 1.0) return t.back();
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  if (i == 0) return t.front();
  const double dc = cdf[i] - cdf[i - 1];
  const double w = dc > 0.0 ? (u - cdf[i - 1]) / dc : 0.0;
  return t[i - 1] + w * (t[i] - t[i - 1]);
}

GCdfTable tabulate_g_cdf(const MeanFieldParams& p, std::size_t nodes) {
  p.validate();
  if (nodes < 2) throw InvalidInputError("cdf table needs at least 2 nodes");
  GCdfTable tab;
  tab.t.resize(nodes);
  tab.cdf.resize(nodes);
  const double h = p.T / static_cast<double>(nodes - 1);
  double acc = 0.0;
  double prev = normalizer_g(0.0, p);
  tab.t[0] = 0.0;
  tab.cdf[0] = 0.0;
  for (std::size_t i = 1; i < nodes; ++i) {
    const double ti = h * static_cast<double>(i);
    const double gi = normalizer_g(ti, p);
    acc += 0.5 * (prev + gi) * h;
    tab.t[i] = ti;
    tab.cdf[i] = acc;
    prev = gi;
  }
  tab.integral_g = acc;
  for (double& c : tab.cdf) c /= acc;
  return tab;
}

AdaptiveTimeParts adaptive_time_parts(std::size_t n, const MeanFieldParams& p,
                                      std::uint64_t seed, double adaptive_ratio) {
  if (adaptive_ratio < 0.0 || adaptive_ratio > 1.0)
    throw InvalidInputError("adaptive_ratio must lie in [0,1]");
  const auto tab = tabulate_g_cdf(p);
  const std::size_t n_adapt = static_cast<std::size_t>(std::llround(adaptive_ratio * n));
  const std::size_t n_lhs = n - n_adapt;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  AdaptiveTimeParts parts;
  parts.adaptive.reserve(n_adapt);
  for (std::size_t i = 0; i < n_adapt; ++i) {
    double ti = tab.inverse(u01(rng));
    if (ti <= 0.0) ti = std::nextafter(0.0, p.T);
    parts.adaptive.push_back(ti);
  }
  if (n_lhs > 0) {
    auto pts = lhs(n_lhs, 1, {{0.0, p.T}}, seed ^ 0x9e3779b97f4a7c15ull);
    for (double& ti : pts)
      if (ti <= 0.0) ti = std::nextafter(0.0, p.T);
    parts.lhs_half = std::move(pts);
  }
  return parts;
}

std::vector<double> adaptive_time_sample(std::size_t n, const MeanFieldParams& p,
                                         std::uint64_t seed, double adaptive_ratio) {
  auto parts = adaptive_time_parts(n, p, seed, adaptive_ratio);
  std::vector<double> all;
  all.reserve(n);
  for (double t : parts.adaptive) all.push_back(t / p.T - 0.5);
  for (double t : parts.lhs_half) all.push_back(t / p.T - 0.5);
  std::mt19937_64 rng(seed ^ 0xda442d24ull);
  std::shuffle(all.begin(), all.end(), rng);
  return all;
}

SamplePlan build_sample_plan(const ProblemSpec& spec, const SampleCounts& counts,
                             SampleStrategy strategy, std::uint64_t seed,
                             const FieldGrid* ic_grid) {
  spec.validate();
  if (counts.n_res < 1 || counts.n_t < 1 || counts.n_bc_x2_side < 1 || counts.n_bc_x1_side < 1)
    throw InvalidInputError("sample counts must be positive");

  SamplePlan plan;
  plan.strategy = strategy;
  const std::size_t n_res = static_cast<std::size_t>(counts.n_res);

  // Residual points: either one 3D LHS over space-time, or spatial LHS paired
  // with the adaptive-in-time list.
  if (strategy == SampleStrategy::Lhs) {
    auto pts = lhs(n_res, 3, {{-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}}, seed);
    plan.residual_points.resize(n_res);
    for (std::size_t i = 0; i < n_res; ++i) {
      double t = pts[i * 3 + 2];
      if (t <= -0.5) t = std::nextafter(-0.5, 0.5);
      plan.residual_points[i] = {pts[i * 3], pts[i * 3 + 1], t};
    }
  } else {
    auto xy = lhs(n_res, 2, {{-0.5, 0.5}, {-0.5, 0.5}}, seed);
    auto times = adaptive_time_sample(n_res, spec.mean_field(), seed + 1, counts.adaptive_ratio);
    plan.residual_points.resize(n_res);
    for (std::size_t i = 0; i < n_res; ++i)
      plan.residual_points[i] = {xy[i * 2], xy[i * 2 + 1], times[i]};
  }

  // Initial-condition points with the physical source value attached.
  const double e2 = spec.epsilon * spec.epsilon;
  const double amp = spec.M / (2.0 * std::numbers::pi * e2);
  auto source_value = [&](double x1, double x2) {
    const double d1 = x1 - spec.x1_star, d2 = x2 - spec.x2_star;
    return amp * std::exp(-(d1 * d1 + d2 * d2) / (2.0 * e2));
  };
  std::mt19937_64 rng(seed + 2);
  if (ic_grid) {
    ic_grid->validate();
    if (counts.ic_fraction <= 0.0 || counts.ic_fraction > 1.0)
      throw InvalidInputError("requested IC fraction exceeds the available grid nodes");
    const std::size_t total = ic_grid->values.size();
    const std::size_t take = static_cast<std::size_t>(counts.ic_fraction * total);
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    plan.ic_points.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      const int i1 = static_cast<int>(idx[i]) / ic_grid->nx2;
      const int i2 = static_cast<int>(idx[i]) % ic_grid->nx2;
      plan.ic_points.push_back({ic_grid->x1(i1) / spec.L1 - 0.5, ic_grid->x2(i2) / spec.L2 - 0.5,
                                ic_grid->values[idx[i]]});
    }
  } else {
    if (counts.n_ic < 1) throw InvalidInputError("n_ic must be positive without an IC grid");
    auto pts = lhs(static_cast<std::size_t>(counts.n_ic), 2, {{-0.5, 0.5}, {-0.5, 0.5}}, seed + 3);
    plan.ic_points.reserve(counts.n_ic);
    for (int i = 0; i < counts.n_ic; ++i) {
      const double x1 = pts[i * 2], x2 = pts[i * 2 + 1];
      plan.ic_points.push_back(
          {x1, x2, source_value((x1 + 0.5) * spec.L1, (x2 + 0.5) * spec.L2)});
    }
  }

  // Boundary points at n_t equal time intervals.
  for (int m = 1; m <= counts.n_t; ++m) {
    const double tt = static_cast<double>(m) / counts.n_t - 0.5;
    auto s1 = lhs(static_cast<std::size_t>(counts.n_bc_x2_side), 1, {{-0.5, 0.5}},
                  seed + 100 + static_cast<std::uint64_t>(m) * 7);
    for (double x2 : s1) plan.bc_dirichlet.push_back({kBoundaryX1Lo, -0.5, x2, tt});
    auto s2 = lhs(static_cast<std::size_t>(counts.n_bc_x2_side), 1, {{-0.5, 0.5}},
                  seed + 200 + static_cast<std::uint64_t>(m) * 7);
    for (double x2 : s2) plan.bc_neumann.push_back({kBoundaryX1Hi, 0.5, x2, tt});
    auto s3 = lhs(static_cast<std::size_t>(counts.n_bc_x1_side), 1, {{-0.5, 0.5}},
                  seed + 300 + static_cast<std::uint64_t>(m) * 7);
    for (double x1 : s3) plan.bc_neumann.push_back({kBoundaryX2Lo, x1, -0.5, tt});
    auto s4 = lhs(static_cast<std::size_t>(counts.n_bc_x1_side), 1, {{-0.5, 0.5}},
                  seed + 400 + static_cast<std::uint64_t>(m) * 7);
    for (double x1 : s4) plan.bc_neumann.push_back({kBoundaryX2Hi, x1, 0.5, tt});
  }

  plan.validate();
  return plan;
}

namespace {
constexpr const char* kPlanMagic = "adepinn-plan-1";

void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace

void save_plan(const SamplePlan& plan, std::ostream& os) {
  os << kPlanMagic << "\n";
  os << "strategy " << to_string(plan.strategy) << "\n";
  os << "res " << plan.residual_points.size() << "\n";
  for (const auto& p : plan.residual_points) {
    write_double(os, p[0]);
    os << ' ';
    write_double(os, p[1]);
    os << ' ';
    write_double(os, p[2]);
    os << "\n";
  }
  os << "ic " << plan.ic_points.size() << "\n";
  for (const auto& p : plan.ic_points) {
    write_double(os, p.x1);
    os << ' ';
    write_double(os, p.x2);
    os << ' ';
    write_double(os, p.u0);
    os << "\n";
  }
  auto dump_bc = [&](const char* tag, const std::vector<SamplePlan::BcPoint>& pts) {
    os << tag << ' ' << pts.size() << "\n";
    for (const auto& p : pts) {
      os << p.boundary << ' ';
      write_double(os, p.x1);
      os << ' ';
      write_double(os, p.x2);
      os << ' ';
      write_double(os, p.t);
      os << "\n";
    }
  };
  dump_bc("bcd", plan.bc_dirichlet);
  dump_bc("bcn", plan.bc_neumann);
}

SamplePlan load_plan(std::istream& is) {
  std::string magic;
  std::getline(is, magic);
  if (magic != kPlanMagic) throw InvalidInputError("not an adepinn sample plan (bad magic)");
  SamplePlan plan;
  std::string key;
  std::size_t n;
  is >> key;
  if (key != "strategy") throw InvalidInputError("plan missing strategy");
  is >> key;
  plan.strategy = sample_strategy_from_string(key);
  is >> key >> n;
  if (key != "res") throw InvalidInputError("plan missing residual section");
  plan.residual_points.resize(n);
  for (auto& p : plan.residual_points) is >> p[0] >> p[1] >> p[2];
  is >> key >> n;
  if (key != "ic") throw InvalidInputError("plan missing ic section");
  plan.ic_points.resize(n);
  for (auto& p : plan.ic_points) is >> p.x1 >> p.x2 >> p.u0;
  auto read_bc = [&](const char* tag, std::vector<SamplePlan::BcPoint>& pts) {
    is >> key >> n;
    if (key != tag) throw InvalidInputError(std::string("plan missing section ") + tag);
    pts.resize(n);
    for (auto& p : pts) is >> p.boundary >> p.x1 >> p.x2 >> p.t;
  };
  read_bc("bcd", plan.bc_dirichlet);
  read_bc("bcn", plan.bc_neumann);
  if (!is) throw InvalidInputError("sample plan truncated");
  plan.validate();
  return plan;
}

void save_plan_file(const SamplePlan& plan, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInputError("cannot open plan file for writing: " + path);
  save_plan(plan, os);
}

SamplePlan load_plan_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInputError("cannot open plan file: " + path);
  return load_plan(is);
}

}  // namespace adepinn
