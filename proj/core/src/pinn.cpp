#include "adepinn/pinn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "adepinn/errors.hpp"

namespace adepinn {

namespace {

DerivMask residual_mask_3d() {
  DerivMask m;
  m.grad_mask = 0b111;
  m.pair_mask = static_cast<std::uint8_t>((1u << pair_index(0, 0)) | (1u << pair_index(1, 1)) |
                                          (1u << pair_index(0, 1)));
  return m;
}

DerivMask head_mask_2d() {
  DerivMask m;
  m.grad_mask = 0b11;
  m.pair_mask = static_cast<std::uint8_t>((1u << pair_index(0, 0)) | (1u << pair_index(1, 1)) |
                                          (1u << pair_index(0, 1)));
  return m;
}

}  // namespace

FieldFn network_field(const ParamSet& params) {
  auto ws = std::make_shared<Workspace>();
  auto ps = std::make_shared<ParamSet>(params);
  return [ws, ps](std::array<double, 3> point, const DerivMask& mask) {
    const int d = ps->spec().input_dim();
    ws->forward(*ps, std::span<const double>(point.data(), d), mask);
    FieldJet jet;
    jet.value = ws->value();
    for (int k = 0; k < d; ++k) jet.grad[k] = ws->grad(k);
    for (int pr = 0; pr < kMaxPairs; ++pr)
      if (mask.pair_mask & (1u << pr)) jet.second[pr] = ws->second(pr);
    return jet;
  };
}

// ---------------------------------------------------------------------------
// Coefficient providers
// ---------------------------------------------------------------------------

namespace {

class ConstantCoeffProvider final : public CoeffProvider {
 public:
  explicit ConstantCoeffProvider(CoeffValues v) : v_(v) {}
  CoeffValues values(double, double) const override { return v_; }
  CoeffExprs at(Tape& tape, double, double) const override {
    CoeffExprs c;
    c.v1 = tape.constant(v_.v1);
    c.v2 = tape.constant(v_.v2);
    c.d11 = tape.constant(v_.d11);
    c.d22 = tape.constant(v_.d22);
    c.d12 = tape.constant(v_.d12);
    c.d21 = tape.constant(v_.d21);
    c.has_derivs = false;
    return c;
  }
  bool is_constant() const override { return true; }

 private:
  CoeffValues v_;
};

class NetworkCoeffProvider final : public CoeffProvider {
 public:
  NetworkCoeffProvider(const ProblemSpec& spec, NetworkCoeffConfig cfg)
      : spec_(spec), cfg_(std::move(cfg)) {
    if (!cfg_.k_params || !cfg_.h_params)
      throw InvalidInputError("network coefficients need both k and h parameter sets");
  }

  CoeffValues values(double x1t, double x2t) const override {
    Tape tape;
    NetworkCoeffConfig frozen = cfg_;
    frozen.k_slot = frozen.h_slot = -1;
    const auto c = build(tape, frozen, x1t, x2t);
    CoeffValues v;
    v.v1 = c.v1.value();
    v.v2 = c.v2.value();
    v.d11 = c.d11.value();
    v.d22 = c.d22.value();
    v.d12 = c.d12.value();
    v.d21 = c.d21.value();
    v.d11_dx1 = c.d11_dx1.value();
    v.d22_dx2 = c.d22_dx2.value();
    v.d12_dx2 = c.d12_dx2.value();
    v.d21_dx1 = c.d21_dx1.value();
    v.div_v = c.div_v.value();
    return v;
  }

  CoeffExprs at(Tape& tape, double x1t, double x2t) const override {
    return build(tape, cfg_, x1t, x2t);
  }

  bool is_constant() const override { return false; }

 private:
  CoeffExprs build(Tape& tape, const NetworkCoeffConfig& cfg, double x1t, double x2t) const {
    const std::array<double, 2> x{x1t, x2t};
    DerivMask km;
    km.grad_mask = 0b11;
    auto k = tape.eval_network(cfg.k_slot, *cfg.k_params, x, km);
    auto h = tape.eval_network(cfg.h_slot, *cfg.h_params, x, head_mask_2d());

    const double L1 = spec_.L1, L2 = spec_.L2, T = spec_.T;
    const double C1 = T * cfg.K_max * cfg.h_max / (spec_.phi * L1 * L1);
    const double C2 = T * cfg.K_max * cfg.h_max / (spec_.phi * L2 * L2);

    CoeffExprs c;
    c.has_derivs = true;
    // Dimensionless Darcy flux and its x~-derivatives.
    c.v1 = -C1 * (k.value * h.d(0));
    c.v2 = -C2 * (k.value * h.d(1));
    Expr v1_d1 = -C1 * (k.d(0) * h.d(0) + k.value * h.d2(0, 0));
    Expr v1_d2 = -C1 * (k.d(1) * h.d(0) + k.value * h.d2(0, 1));
    Expr v2_d1 = -C2 * (k.d(0) * h.d(1) + k.value * h.d2(0, 1));
    Expr v2_d2 = -C2 * (k.d(1) * h.d(1) + k.value * h.d2(1, 1));
    c.div_v = v1_d1 + v2_d2;

    // Physical velocity (and derivatives w.r.t. the dimensionless coords)
    // feeding the dispersion tensor.
    Expr p1 = c.v1 * (L1 / T);
    Expr p2 = c.v2 * (L2 / T);
    Expr p1_d1 = v1_d1 * (L1 / T);
    Expr p1_d2 = v1_d2 * (L1 / T);
    Expr p2_d1 = v2_d1 * (L2 / T);
    Expr p2_d2 = v2_d2 * (L2 / T);

    const double s11 = T / (L1 * L1), s22 = T / (L2 * L2), s12 = T / (L1 * L2);
    const double vmag2 = p1.value() * p1.value() + p2.value() * p2.value();
    if (vmag2 < 1e-24) {
      // Stagnation convention: isotropic molecular tensor, no derivatives.
      c.d11 = tape.constant(spec_.Dw * s11);
      c.d22 = tape.constant(spec_.Dw * s22);
      c.d12 = tape.constant(0.0);
      c.d21 = tape.constant(0.0);
      c.d11_dx1 = c.d22_dx2 = c.d12_dx2 = c.d21_dx1 = tape.constant(0.0);
      return c;
    }

    const double aL = spec_.aL, aT = spec_.aT, Dw = spec_.Dw;
    Expr vn = sqrt(p1 * p1 + p2 * p2);
    Expr D11p = (aL * (p1 * p1) + aT * (p2 * p2)) / vn;
    Expr D22p = (aL * (p2 * p2) + aT * (p1 * p1)) / vn;
    Expr D12p = (aL - aT) * (p1 * p2) / vn;
    Expr dvn_d1 = (p1 * p1_d1 + p2 * p2_d1) / vn;
    Expr dvn_d2 = (p1 * p1_d2 + p2 * p2_d2) / vn;

    Expr dD11_d1 = (2.0 * aL * (p1 * p1_d1) + 2.0 * aT * (p2 * p2_d1)) / vn -
                   D11p * dvn_d1 / vn;
    Expr dD22_d2 = (2.0 * aL * (p2 * p2_d2) + 2.0 * aT * (p1 * p1_d2)) / vn -
                   D22p * dvn_d2 / vn;
    Expr dD12_d2 =
        (aL - aT) * ((p1_d2 * p2 + p1 * p2_d2) / vn - (p1 * p2) * dvn_d2 / (vn * vn));
    Expr dD21_d1 =
        (aL - aT) * ((p1_d1 * p2 + p1 * p2_d1) / vn - (p1 * p2) * dvn_d1 / (vn * vn));

    const double off_dw = cfg.form == DispersionForm::AsWritten ? Dw : 0.0;
    c.d11 = (D11p + Dw) * s11;
    c.d22 = (D22p + Dw) * s22;
    c.d12 = (D12p + off_dw) * s12;
    c.d21 = (D12p + off_dw) * s12;
    c.d11_dx1 = dD11_d1 * s11;
    c.d22_dx2 = dD22_d2 * s22;
    c.d12_dx2 = dD12_d2 * s12;
    c.d21_dx1 = dD21_d1 * s12;
    return c;
  }

  ProblemSpec spec_;
  NetworkCoeffConfig cfg_;
};

}  // namespace

std::shared_ptr<CoeffProvider> constant_coeffs(const ProblemSpec& spec) {
  spec.validate();
  CoeffValues v;
  v.v1 = spec.mean_field_speed() * spec.T / spec.L1;
  v.v2 = 0.0;
  v.d11 = spec.Dx1 * spec.T / (spec.L1 * spec.L1);
  v.d22 = spec.Dx2 * spec.T / (spec.L2 * spec.L2);
  return std::make_shared<ConstantCoeffProvider>(v);
}

std::shared_ptr<CoeffProvider> network_coeffs(const ProblemSpec& spec, NetworkCoeffConfig cfg) {
  return std::make_shared<NetworkCoeffProvider>(spec, std::move(cfg));
}

DimensionlessCoeffs DimensionlessCoeffs::mean_field(const ProblemSpec& spec) {
  DimensionlessCoeffs c;
  c.provider = constant_coeffs(spec);
  const MeanFieldParams p = spec.mean_field();
  c.source_factor = [p](double tt) { return source_decay_f((tt + 0.5) * p.T, p); };
  c.g_at = [p](double tt) { return normalizer_g((tt + 0.5) * p.T, p); };
  return c;
}

DimensionlessCoeffs DimensionlessCoeffs::from_networks(const ProblemSpec& spec,
                                                       NetworkCoeffConfig cfg) {
  DimensionlessCoeffs c;
  c.provider = network_coeffs(spec, std::move(cfg));
  const MeanFieldParams p = spec.mean_field();
  c.source_factor = [p](double tt) { return source_decay_f((tt + 0.5) * p.T, p); };
  c.g_at = [p](double tt) { return normalizer_g((tt + 0.5) * p.T, p); };
  return c;
}

RawCoeffs RawCoeffs::constant(double v1, double d11, double d22) {
  RawCoeffs rc;
  CoeffValues v;
  v.v1 = v1;
  v.d11 = d11;
  v.d22 = d22;
  rc.at = [v](double, double) { return v; };
  return rc;
}

// ---------------------------------------------------------------------------
// Residual operators
// ---------------------------------------------------------------------------

namespace {

// Shared residual skeleton over (jet, coefficients); S is double or Expr.
template <typename S, typename C>
S ade_operator(const S& u, const S& u_t, const S& u_x1, const S& u_x2, const S& u_x11,
               const S& u_x22, const S& u_x12, const C& c, bool has_derivs, bool div_v_term) {
  S r = u_t + c.v1 * u_x1 + c.v2 * u_x2 - c.d11 * u_x11 - c.d22 * u_x22 -
        (c.d12 + c.d21) * u_x12;
  if (has_derivs)
    r = r - (c.d11_dx1 + c.d12_dx2) * u_x1 - (c.d22_dx2 + c.d21_dx1) * u_x2;
  if (div_v_term) r = r + c.div_v * u;
  return r;
}

struct ConstJet {
  double v1, v2, d11, d22, d12, d21, d11_dx1, d22_dx2, d12_dx2, d21_dx1, div_v;
};

}  // namespace

double residual_normalized(const FieldFn& u, std::array<double, 3> point,
                           const DimensionlessCoeffs& coeffs) {
  const FieldJet jet = u(point, residual_mask_3d());
  const CoeffValues c = coeffs.provider->values(point[0], point[1]);
  const bool derivs = !coeffs.provider->is_constant();
  const double lin = ade_operator<double>(
      jet.value, jet.grad[2], jet.grad[0], jet.grad[1], jet.second[pair_index(0, 0)],
      jet.second[pair_index(1, 1)], jet.second[pair_index(0, 1)], c, derivs,
      coeffs.include_div_v_term);
  return lin - coeffs.source_factor(point[2]) * jet.value;
}

Expr residual_normalized_expr(Tape& tape, int u_slot, const ParamSet& u_params,
                              std::array<double, 3> point, const DimensionlessCoeffs& coeffs) {
  auto o = tape.eval_network(u_slot, u_params, point, residual_mask_3d());
  const CoeffExprs c = coeffs.provider->at(tape, point[0], point[1]);
  Expr r = ade_operator<Expr>(o.value, o.d(2), o.d(0), o.d(1), o.d2(0, 0), o.d2(1, 1),
                              o.d2(0, 1), c, c.has_derivs, coeffs.include_div_v_term);
  return r - coeffs.source_factor(point[2]) * o.value;
}

double residual_raw(const FieldFn& u, std::array<double, 3> point, const RawCoeffs& coeffs) {
  const FieldJet jet = u(point, residual_mask_3d());
  const CoeffValues c = coeffs.at(point[0], point[1]);
  return ade_operator<double>(jet.value, jet.grad[2], jet.grad[0], jet.grad[1],
                              jet.second[pair_index(0, 0)], jet.second[pair_index(1, 1)],
                              jet.second[pair_index(0, 1)], c, true, coeffs.include_div_v_term);
}

Expr residual_raw_expr(Tape& tape, int u_slot, const ParamSet& u_params,
                       std::array<double, 3> point, const RawCoeffs& coeffs) {
  auto o = tape.eval_network(u_slot, u_params, point, residual_mask_3d());
  const CoeffValues cv = coeffs.at(point[0], point[1]);
  struct {
    Expr v1, v2, d11, d22, d12, d21, d11_dx1, d22_dx2, d12_dx2, d21_dx1, div_v;
  } c{tape.constant(cv.v1),      tape.constant(cv.v2),      tape.constant(cv.d11),
      tape.constant(cv.d22),     tape.constant(cv.d12),     tape.constant(cv.d21),
      tape.constant(cv.d11_dx1), tape.constant(cv.d22_dx2), tape.constant(cv.d12_dx2),
      tape.constant(cv.d21_dx1), tape.constant(cv.div_v)};
  return ade_operator<Expr>(o.value, o.d(2), o.d(0), o.d(1), o.d2(0, 0), o.d2(1, 1),
                            o.d2(0, 1), c, true, coeffs.include_div_v_term);
}

double neumann_operator(const FieldFn& u, const SamplePlan::BcPoint& p, double target) {
  DerivMask m;
  m.grad_mask = 0b11;
  const FieldJet jet = u({p.x1, p.x2, p.t}, m);
  const auto n = boundary_normal(p.boundary);
  return n[0] * jet.grad[0] + n[1] * jet.grad[1] - target;
}

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Forward: return "forward";
    case ProblemKind::Backward: return "backward";
    case ProblemKind::Inverse: return "inverse";
  }
  return "forward";
}

// ---------------------------------------------------------------------------
// Parallel squared-term accumulation
// ---------------------------------------------------------------------------

namespace {

struct NetBinding {
  const ParamSet* params;
  std::span<double> grad;  // slice of the output gradient
};

// Accumulates weight_over_n * sum r_i^2 with gradients, deterministically for
// a fixed thread count (per-thread tapes reduced in thread order).
double accumulate_sq(std::size_t n, double weight_over_n, const ExecPolicy& exec,
                     const std::vector<NetBinding>& nets,
                     const std::function<Expr(Tape&, std::size_t)>& term) {
  if (n == 0 || weight_over_n == 0.0) return 0.0;
  const int nt = std::max(1, exec.threads);
  std::vector<Tape> tapes(nt);
  for (auto& tape : tapes)
    for (const auto& nb : nets) tape.add_slot(nb.params->size());
  std::vector<double> partial(nt, 0.0);

  parallel_chunks(n, exec, [&](int tid, std::size_t b, std::size_t e) {
    Tape& tape = tapes[tid];
    double local = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      tape.reset_nodes();
      Expr r = term(tape, i);
      local += weight_over_n * r.value() * r.value();
      tape.backward(r, 2.0 * weight_over_n * r.value());
    }
    partial[tid] = local;
  });

  double loss = 0.0;
  for (int tid = 0; tid < nt; ++tid) {
    loss += partial[tid];
    for (std::size_t s = 0; s < nets.size(); ++s) {
      auto g = tapes[tid].slot_grad(static_cast<int>(s));
      auto out = nets[s].grad;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
    }
  }
  return loss;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward / backward loss
// ---------------------------------------------------------------------------

PinnLoss::PinnLoss(const ProblemSpec& spec, SamplePlan plan, DimensionlessCoeffs coeffs,
                   Config cfg, const MeasurementSet* data)
    : spec_(spec),
      plan_(std::move(plan)),
      coeffs_(std::move(coeffs)),
      cfg_(std::move(cfg)),
      data_(data) {
  spec_.validate();
  plan_.validate();
  cfg_.weights.validate();
  cfg_.u_arch.validate();
  if (cfg_.u_arch.input_dim() != 3)
    throw InvalidInputError("the u network takes (x1, x2, t) inputs");
  arch_param_count_ = cfg_.u_arch.param_count();
  if (cfg_.kind == ProblemKind::Inverse)
    throw InvalidInputError("use InverseLoss for the joint problem");
  if (cfg_.raw_formulation) {
    if (!coeffs_.provider->is_constant())
      throw InvalidInputError("the raw baseline supports constant coefficients only");
    const auto v = coeffs_.provider->values(0.0, 0.0);
    raw_coeffs_ = RawCoeffs::constant(v.v1 * spec_.L1 / spec_.T,
                                      v.d11 * spec_.L1 * spec_.L1 / spec_.T,
                                      v.d22 * spec_.L2 * spec_.L2 / spec_.T);
  }
  if (cfg_.weights.lambda_ic_or_tc > 0.0 && plan_.ic_points.empty())
    throw InvalidPlanError("nonzero initial/terminal weight with no such points");
  if (cfg_.weights.lambda_res > 0.0 && plan_.residual_points.empty())
    throw InvalidPlanError("nonzero residual weight with no residual points");
  if (cfg_.weights.lambda_bcd > 0.0 && plan_.bc_dirichlet.empty())
    throw InvalidPlanError("nonzero Dirichlet weight with no Dirichlet points");
  if (cfg_.weights.lambda_bcn > 0.0 && plan_.bc_neumann.empty())
    throw InvalidPlanError("nonzero Neumann weight with no Neumann points");
  if (data_ && data_->u_obs.empty() && cfg_.weights.lambda_data > 0.0)
    throw InvalidPlanError("nonzero data weight with an empty measurement set");
  batch_order_ = shuffled_indices(plan_.residual_points.size(), cfg_.seed);
}

double PinnLoss::eval(std::span<const double> theta, std::span<double> grad,
                      std::size_t res_begin, std::size_t res_count, double res_scale) const {
  if (theta.size() != arch_param_count_)
    throw InvalidInputError("parameter vector does not match the u architecture");
  std::fill(grad.begin(), grad.end(), 0.0);
  ParamSet ps(cfg_.u_arch, std::vector<double>(theta.begin(), theta.end()));
  const std::vector<NetBinding> nets{{&ps, grad}};
  const bool raw = cfg_.raw_formulation;
  const double L1 = spec_.L1, L2 = spec_.L2, T = spec_.T;
  auto to_input = [&](double x1t, double x2t, double tt) {
    return raw ? std::array<double, 3>{(x1t + 0.5) * L1, (x2t + 0.5) * L2, (tt + 0.5) * T}
               : std::array<double, 3>{x1t, x2t, tt};
  };

  Terms terms;

  // Initial (forward) or terminal (backward) condition.
  const bool backward = cfg_.kind == ProblemKind::Backward;
  const double tc = backward ? 0.5 : -0.5;
  const double gval = coeffs_.g_at(tc);
  if (cfg_.weights.lambda_ic_or_tc > 0.0) {
    const double w = cfg_.weights.lambda_ic_or_tc / plan_.ic_points.size();
    terms.ic_or_tc = accumulate_sq(
        plan_.ic_points.size(), w, cfg_.exec, nets, [&](Tape& tape, std::size_t i) {
          const auto& p = plan_.ic_points[i];
          const double target = raw ? p.u0 : p.u0 / gval;
          auto o = tape.eval_network(0, ps, to_input(p.x1, p.x2, tc), DerivMask::value_only());
          return o.value - target;
        });
  }

  // Dirichlet boundary (homogeneous).
  if (cfg_.weights.lambda_bcd > 0.0) {
    const double w = cfg_.weights.lambda_bcd / plan_.bc_dirichlet.size();
    terms.bcd = accumulate_sq(
        plan_.bc_dirichlet.size(), w, cfg_.exec, nets, [&](Tape& tape, std::size_t i) {
          const auto& p = plan_.bc_dirichlet[i];
          auto o = tape.eval_network(0, ps, to_input(p.x1, p.x2, p.t), DerivMask::value_only());
          return o.value - 0.0;
        });
  }

  // Neumann boundary (homogeneous).
  if (cfg_.weights.lambda_bcn > 0.0) {
    const double w = cfg_.weights.lambda_bcn / plan_.bc_neumann.size();
    DerivMask gm;
    gm.grad_mask = 0b11;
    terms.bcn = accumulate_sq(
        plan_.bc_neumann.size(), w, cfg_.exec, nets, [&](Tape& tape, std::size_t i) {
          const auto& p = plan_.bc_neumann[i];
          const auto nrm = boundary_normal(p.boundary);
          auto o = tape.eval_network(0, ps, to_input(p.x1, p.x2, p.t), gm);
          return nrm[0] * o.d(0) + nrm[1] * o.d(1);
        });
  }

  // PDE residual (full set or minibatch window).
  if (cfg_.weights.lambda_res > 0.0 && res_count > 0) {
    terms.res = accumulate_sq(res_count, res_scale, cfg_.exec, nets,
                              [&](Tape& tape, std::size_t i) {
                                const auto& p = plan_.residual_points[batch_order_[res_begin + i]];
                                if (raw)
                                  return residual_raw_expr(tape, 0, ps,
                                                           to_input(p[0], p[1], p[2]),
                                                           raw_coeffs_);
                                return residual_normalized_expr(tape, 0, ps, p, coeffs_);
                              });
  }

  // Concentration measurements (data assimilation).
  if (cfg_.weights.lambda_data > 0.0 && data_ && !data_->u_obs.empty()) {
    const double w = cfg_.weights.lambda_data / data_->u_obs.size();
    terms.data = accumulate_sq(
        data_->u_obs.size(), w, cfg_.exec, nets, [&](Tape& tape, std::size_t i) {
          const auto& p = data_->u_obs[i];
          auto o = tape.eval_network(0, ps, to_input(p.x1, p.x2, p.t), DerivMask::value_only());
          const double target = raw ? p.value * coeffs_.g_at(p.t) : p.value;
          return o.value - target;
        });
  }

  terms.total = terms.ic_or_tc + terms.bcd + terms.bcn + terms.res + terms.data;
  last_terms_ = terms;
  return terms.total;
}

double PinnLoss::full(std::span<const double> theta, std::span<double> grad) const {
  const std::size_t n = plan_.residual_points.size();
  return eval(theta, grad, 0, n, n ? cfg_.weights.lambda_res / n : 0.0);
}

double PinnLoss::minibatch(int step, std::span<const double> theta,
                           std::span<double> grad) const {
  const std::size_t n = plan_.residual_points.size();
  const std::size_t b = std::min<std::size_t>(std::max(cfg_.batch_size, 1), n);
  const std::size_t steps_per_pass = (n + b - 1) / b;
  const std::size_t pass = static_cast<std::size_t>(step) / steps_per_pass;
  const std::size_t within = static_cast<std::size_t>(step) % steps_per_pass;
  if (pass != current_pass_) {
    batch_order_ = shuffled_indices(n, cfg_.seed ^ (0x517cc1b727220a95ull + pass));
    current_pass_ = pass;
  }
  const std::size_t begin = within * b;
  const std::size_t count = std::min(b, n - begin);
  return eval(theta, grad, begin, count, cfg_.weights.lambda_res / count);
}

Objective PinnLoss::objective() const {
  return [this](std::span<const double> t, std::span<double> g) { return full(t, g); };
}

SteppedObjective PinnLoss::stepped_objective() const {
  return [this](int step, std::span<const double> t, std::span<double> g) {
    return minibatch(step, t, g);
  };
}

// ---------------------------------------------------------------------------
// Inverse (joint data assimilation) loss
// ---------------------------------------------------------------------------

InverseLoss::InverseLoss(const ProblemSpec& spec, SamplePlan transport_plan,
                         SamplePlan darcy_plan, const MeasurementSet& data, Config cfg)
    : spec_(spec),
      plan_(std::move(transport_plan)),
      darcy_plan_(std::move(darcy_plan)),
      data_(data),
      cfg_(std::move(cfg)) {
  spec_.validate();
  plan_.validate();
  darcy_plan_.validate();
  cfg_.weights.validate();
  cfg_.u_arch.validate();
  cfg_.field_arch.validate();
  if (cfg_.u_arch.input_dim() != 3 || cfg_.field_arch.input_dim() != 2)
    throw InvalidInputError("inverse problem needs a 3-input u net and 2-input field nets");
  n_u_ = cfg_.u_arch.param_count();
  n_k_ = cfg_.field_arch.param_count();
  n_h_ = cfg_.field_arch.param_count();
  if (cfg_.weights.lambda_data > 0.0 && data_.u_obs.empty() && data_.k_obs.empty() &&
      data_.h_obs.empty())
    throw InvalidPlanError("nonzero data weight with an empty measurement set");
  batch_order_ = shuffled_indices(plan_.residual_points.size(), cfg_.seed);
}

double InverseLoss::eval(std::span<const double> theta, std::span<double> grad,
                         std::size_t res_begin, std::size_t res_count, double res_scale) const {
  if (theta.size() != param_count())
    throw InvalidInputError("parameter vector does not match the joint architecture");
  std::fill(grad.begin(), grad.end(), 0.0);
  ParamSet u_ps(cfg_.u_arch, std::vector<double>(theta.begin(), theta.begin() + n_u_));
  ParamSet k_ps(cfg_.field_arch,
                std::vector<double>(theta.begin() + n_u_, theta.begin() + n_u_ + n_k_));
  ParamSet h_ps(cfg_.field_arch, std::vector<double>(theta.begin() + n_u_ + n_k_, theta.end()));
  const std::vector<NetBinding> nets{{&u_ps, grad.subspan(0, n_u_)},
                                     {&k_ps, grad.subspan(n_u_, n_k_)},
                                     {&h_ps, grad.subspan(n_u_ + n_k_, n_h_)}};

  NetworkCoeffConfig ncfg;
  ncfg.k_params = std::shared_ptr<const ParamSet>(&k_ps, [](const ParamSet*) {});
  ncfg.h_params = std::shared_ptr<const ParamSet>(&h_ps, [](const ParamSet*) {});
  ncfg.k_slot = 1;
  ncfg.h_slot = 2;
  ncfg.K_max = data_.K_max;
  ncfg.h_max = data_.h_max;
  ncfg.form = cfg_.form;
  DimensionlessCoeffs coeffs = DimensionlessCoeffs::from_networks(spec_, ncfg);

  Terms terms;
  const auto& w = cfg_.weights;
  const double g0 = coeffs.g_at(-0.5);

  if (w.lambda_ic_or_tc > 0.0 && !plan_.ic_points.empty()) {
    const double ws = w.lambda_ic_or_tc / plan_.ic_points.size();
    terms.ic = accumulate_sq(plan_.ic_points.size(), ws, cfg_.exec, nets,
                             [&](Tape& tape, std::size_t i) {
                               const auto& p = plan_.ic_points[i];
                               auto o = tape.eval_network(0, u_ps, std::array<double, 3>{p.x1, p.x2, -0.5},
                                                          DerivMask::value_only());
                               return o.value - p.u0 / g0;
                             });
  }
  if (w.lambda_bcd > 0.0 && !plan_.bc_dirichlet.empty()) {
    const double ws = w.lambda_bcd / plan_.bc_dirichlet.size();
    terms.bcd = accumulate_sq(plan_.bc_dirichlet.size(), ws, cfg_.exec, nets,
                              [&](Tape& tape, std::size_t i) {
                                const auto& p = plan_.bc_dirichlet[i];
                                auto o = tape.eval_network(0, u_ps, std::array<double, 3>{p.x1, p.x2, p.t},
                                                           DerivMask::value_only());
                                return o.value - 0.0;
                              });
  }
  if (w.lambda_bcn > 0.0 && !plan_.bc_neumann.empty()) {
    const double ws = w.lambda_bcn / plan_.bc_neumann.size();
    DerivMask gm;
    gm.grad_mask = 0b11;
    terms.bcn = accumulate_sq(plan_.bc_neumann.size(), ws, cfg_.exec, nets,
                              [&](Tape& tape, std::size_t i) {
                                const auto& p = plan_.bc_neumann[i];
                                const auto nrm = boundary_normal(p.boundary);
                                auto o = tape.eval_network(0, u_ps, std::array<double, 3>{p.x1, p.x2, p.t}, gm);
                                return nrm[0] * o.d(0) + nrm[1] * o.d(1);
                              });
  }
  if (w.lambda_res > 0.0 && res_count > 0) {
    terms.res = accumulate_sq(res_count, res_scale, cfg_.exec, nets,
                              [&](Tape& tape, std::size_t i) {
                                const auto& p = plan_.residual_points[batch_order_[res_begin + i]];
                                return residual_normalized_expr(tape, 0, u_ps, p, coeffs);
                              });
  }

  // Darcy flow constraints on (k, h).
  const double q_tilde = spec_.q * spec_.L1 / (data_.K_max * data_.h_max);
  const double h_dirichlet = spec_.H / data_.h_max;
  if (w.lambda_darcy_bcd > 0.0 && !darcy_plan_.bc_dirichlet.empty()) {
    const double ws = w.lambda_darcy_bcd / darcy_plan_.bc_dirichlet.size();
    terms.darcy_bcd = accumulate_sq(darcy_plan_.bc_dirichlet.size(), ws, cfg_.exec, nets,
                                    [&](Tape& tape, std::size_t i) {
                                      const auto& p = darcy_plan_.bc_dirichlet[i];
                                      auto h = tape.eval_network(2, h_ps, std::array<double, 2>{p.x1, p.x2},
                                                                 DerivMask::value_only());
                                      return h.value - h_dirichlet;
                                    });
  }
  if (w.lambda_darcy_bcn > 0.0 && !darcy_plan_.bc_neumann.empty()) {
    const double ws = w.lambda_darcy_bcn / darcy_plan_.bc_neumann.size();
    DerivMask gm;
    gm.grad_mask = 0b11;
    terms.darcy_bcn = accumulate_sq(
        darcy_plan_.bc_neumann.size(), ws, cfg_.exec, nets, [&](Tape& tape, std::size_t i) {
          const auto& p = darcy_plan_.bc_neumann[i];
          auto h = tape.eval_network(2, h_ps, std::array<double, 2>{p.x1, p.x2}, gm);
          if (p.boundary == kBoundaryX1Lo) {
            auto k = tape.eval_network(1, k_ps, std::array<double, 2>{p.x1, p.x2}, DerivMask::value_only());
            return -(k.value * h.d(0)) - q_tilde;  // prescribed influx
          }
          const auto nrm = boundary_normal(p.boundary);
          return nrm[0] * h.d(0) + nrm[1] * h.d(1);  // no-flow
        });
  }
  if (w.lambda_darcy_res > 0.0 && !darcy_plan_.residual_points.empty()) {
    const double ws = w.lambda_darcy_res / darcy_plan_.residual_points.size();
    DerivMask km;
    km.grad_mask = 0b11;
    const double s1 = 1.0 / (spec_.L1 * spec_.L1), s2 = 1.0 / (spec_.L2 * spec_.L2);
    terms.darcy_res = accumulate_sq(
        darcy_plan_.residual_points.size(), ws, cfg_.exec, nets,
        [&](Tape& tape, std::size_t i) {
          const auto& p = darcy_plan_.residual_points[i];
          const std::array<double, 2> x{p[0], p[1]};
          auto k = tape.eval_network(1, k_ps, x, km);
          auto h = tape.eval_network(2, h_ps, x, head_mask_2d());
          return s1 * (k.d(0) * h.d(0) + k.value * h.d2(0, 0)) +
                 s2 * (k.d(1) * h.d(1) + k.value * h.d2(1, 1));
        });
  }

  // Measurements of u, K, and h.
  if (w.lambda_data > 0.0) {
    double data_total = 0.0;
    if (!data_.u_obs.empty()) {
      const double ws = w.lambda_data / data_.u_obs.size();
      data_total += accumulate_sq(data_.u_obs.size(), ws, cfg_.exec, nets,
                                  [&](Tape& tape, std::size_t i) {
                                    const auto& p = data_.u_obs[i];
                                    auto o = tape.eval_network(0, u_ps, std::array<double, 3>{p.x1, p.x2, p.t},
                                                               DerivMask::value_only());
                                    return o.value - p.value;
                                  });
    }
    if (!data_.k_obs.empty()) {
      const double ws = w.lambda_data / data_.k_obs.size();
      data_total += accumulate_sq(data_.k_obs.size(), ws, cfg_.exec, nets,
                                  [&](Tape& tape, std::size_t i) {
                                    const auto& p = data_.k_obs[i];
                                    auto o = tape.eval_network(1, k_ps, std::array<double, 2>{p.x1, p.x2},
                                                               DerivMask::value_only());
                                    return o.value - p.value;
                                  });
    }
    if (!data_.h_obs.empty()) {
      const double ws = w.lambda_data / data_.h_obs.size();
      data_total += accumulate_sq(data_.h_obs.size(), ws, cfg_.exec, nets,
                                  [&](Tape& tape, std::size_t i) {
                                    const auto& p = data_.h_obs[i];
                                    auto o = tape.eval_network(2, h_ps, std::array<double, 2>{p.x1, p.x2},
                                                               DerivMask::value_only());
                                    return o.value - p.value;
                                  });
    }
    terms.data = data_total;
  }

  terms.total = terms.ic + terms.bcd + terms.bcn + terms.res + terms.darcy_bcd +
                terms.darcy_bcn + terms.darcy_res + terms.data;
  last_terms_ = terms;
  return terms.total;
}

double InverseLoss::full(std::span<const double> theta, std::span<double> grad) const {
  const std::size_t n = plan_.residual_points.size();
  return eval(theta, grad, 0, n, n ? cfg_.weights.lambda_res / n : 0.0);
}

double InverseLoss::minibatch(int step, std::span<const double> theta,
                              std::span<double> grad) const {
  const std::size_t n = plan_.residual_points.size();
  const std::size_t b = std::min<std::size_t>(std::max(cfg_.batch_size, 1), n);
  const std::size_t steps_per_pass = (n + b - 1) / b;
  const std::size_t pass = static_cast<std::size_t>(step) / steps_per_pass;
  const std::size_t within = static_cast<std::size_t>(step) % steps_per_pass;
  if (pass != current_pass_) {
    batch_order_ = shuffled_indices(n, cfg_.seed ^ (0x517cc1b727220a95ull + pass));
    current_pass_ = pass;
  }
  const std::size_t begin = within * b;
  const std::size_t count = std::min(b, n - begin);
  return eval(theta, grad, begin, count, cfg_.weights.lambda_res / count);
}

Objective InverseLoss::objective() const {
  return [this](std::span<const double> t, std::span<double> g) { return full(t, g); };
}

SteppedObjective InverseLoss::stepped_objective() const {
  return [this](int step, std::span<const double> t, std::span<double> g) {
    return minibatch(step, t, g);
  };
}

SamplePlan build_darcy_plan(const ProblemSpec& spec, int n_res, int n_bc_x2_side,
                            int n_bc_x1_side, std::uint64_t seed) {
  spec.validate();
  if (n_res < 1 || n_bc_x2_side < 1 || n_bc_x1_side < 1)
    throw InvalidInputError("darcy plan counts must be positive");
  SamplePlan plan;
  plan.strategy = SampleStrategy::Lhs;
  auto xy = lhs(static_cast<std::size_t>(n_res), 2, {{-0.5, 0.5}, {-0.5, 0.5}}, seed);
  plan.residual_points.resize(n_res);
  for (int i = 0; i < n_res; ++i) plan.residual_points[i] = {xy[i * 2], xy[i * 2 + 1], 0.0};
  auto s1 = lhs(static_cast<std::size_t>(n_bc_x2_side), 1, {{-0.5, 0.5}}, seed + 11);
  for (double x2 : s1) plan.bc_dirichlet.push_back({kBoundaryX1Hi, 0.5, x2, 0.0});
  auto s2 = lhs(static_cast<std::size_t>(n_bc_x2_side), 1, {{-0.5, 0.5}}, seed + 12);
  for (double x2 : s2) plan.bc_neumann.push_back({kBoundaryX1Lo, -0.5, x2, 0.0});
  auto s3 = lhs(static_cast<std::size_t>(n_bc_x1_side), 1, {{-0.5, 0.5}}, seed + 13);
  for (double x1 : s3) plan.bc_neumann.push_back({kBoundaryX2Lo, x1, -0.5, 0.0});
  auto s4 = lhs(static_cast<std::size_t>(n_bc_x1_side), 1, {{-0.5, 0.5}}, seed + 14);
  for (double x1 : s4) plan.bc_neumann.push_back({kBoundaryX2Hi, x1, 0.5, 0.0});
  plan.validate();
  return plan;
}

MeasurementSet sample_measurements(const AdeSolution& sol, const FieldGrid& K,
                                   const FieldGrid& h, const ProblemSpec& spec, int n_x,
                                   int n_t, int n_k, int n_h, std::uint64_t seed) {
  spec.validate();
  K.validate();
  h.validate();
  if (sol.snapshots.empty()) throw InvalidInputError("measurement sampling needs snapshots");
  if (n_x < 0 || n_k < 0 || n_h < 0 || n_t < 1)
    throw InvalidInputError("measurement counts must be nonnegative (n_t positive)");
  const MeanFieldParams mf = spec.mean_field();

  MeasurementSet data;
  data.n_x = n_x;
  data.n_t = n_t;
  data.h_max = spec.head_scale();

  std::mt19937_64 rng(seed);
  const std::size_t cells = K.values.size();
  std::vector<std::size_t> idx(cells);
  for (std::size_t i = 0; i < cells; ++i) idx[i] = i;

  // Conductivity observations; K_max comes from the sampled values.
  std::shuffle(idx.begin(), idx.end(), rng);
  double kmax = 0.0;
  for (int i = 0; i < n_k; ++i) kmax = std::max(kmax, K.values[idx[i]]);
  data.K_max = n_k > 0 ? kmax : std::exp(spec.mean_Y);
  for (int i = 0; i < n_k; ++i) {
    const int i1 = static_cast<int>(idx[i]) / K.nx2, i2 = static_cast<int>(idx[i]) % K.nx2;
    data.k_obs.push_back({K.x1(i1) / spec.L1 - 0.5, K.x2(i2) / spec.L2 - 0.5,
                          K.values[idx[i]] / data.K_max});
  }

  std::shuffle(idx.begin(), idx.end(), rng);
  for (int i = 0; i < n_h; ++i) {
    const int i1 = static_cast<int>(idx[i]) / h.nx2, i2 = static_cast<int>(idx[i]) % h.nx2;
    data.h_obs.push_back({h.x1(i1) / spec.L1 - 0.5, h.x2(i2) / spec.L2 - 0.5,
                          h.values[idx[i]] / data.h_max});
  }

  // Concentration sensors: n_x random cells observed at n_t snapshot times
  // uniformly spread over (0, T].
  if (n_x > 0) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t last = sol.snapshots.size() - 1;
    for (int s = 0; s < n_x; ++s) {
      const int i1 = static_cast<int>(idx[s]) / sol.snapshots[0].nx2;
      const int i2 = static_cast<int>(idx[s]) % sol.snapshots[0].nx2;
      for (int m = 1; m <= n_t; ++m) {
        const std::size_t snap = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(static_cast<double>(m) * last / n_t)));
        const double t = sol.times[snap];
        const double g = normalizer_g(t, mf);
        data.u_obs.push_back({sol.snapshots[snap].x1(i1) / spec.L1 - 0.5,
                              sol.snapshots[snap].x2(i2) / spec.L2 - 0.5, t / spec.T - 0.5,
                              sol.snapshots[snap].at(i1, i2) / g});
      }
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Regression fitting
// ---------------------------------------------------------------------------

RegressionData grid_regression_data(const FieldGrid& g, const ProblemSpec& spec,
                                    double target_scale) {
  g.validate();
  RegressionData data;
  data.inputs.reserve(g.values.size());
  data.targets.reserve(g.values.size());
  for (int i = 0; i < g.nx1; ++i)
    for (int j = 0; j < g.nx2; ++j) {
      data.inputs.push_back({g.x1(i) / spec.L1 - 0.5, g.x2(j) / spec.L2 - 0.5});
      data.targets.push_back(g.at(i, j) * target_scale);
    }
  return data;
}

FitResult fit_field_dnn(const RegressionData& data, const MlpSpec& arch, const OptimConfig& opt,
                        const ExecPolicy& exec, std::uint64_t init_seed) {
  if (data.inputs.empty() || data.inputs.size() != data.targets.size())
    throw InvalidInputError("regression data is empty or inconsistent");
  arch.validate();
  const int d = arch.input_dim();
  for (const auto& x : data.inputs)
    if (static_cast<int>(x.size()) != d)
      throw InvalidInputError("regression input width does not match the architecture");

  ParamSet init = xavier_init(arch.layer_sizes, init_seed, arch.hidden, arch.output);
  const std::size_t n = data.inputs.size();
  auto order = shuffled_indices(n, init_seed ^ 0xabcdef12ull);

  auto eval_subset = [&](std::span<const double> theta, std::span<double> grad,
                         std::size_t begin, std::size_t count) {
    std::fill(grad.begin(), grad.end(), 0.0);
    ParamSet ps(arch, std::vector<double>(theta.begin(), theta.end()));
    const std::vector<NetBinding> nets{{&ps, grad}};
    const double w = 1.0 / count;
    return accumulate_sq(count, w, exec, nets, [&](Tape& tape, std::size_t i) {
      const std::size_t ix = order[begin + i];
      auto o = tape.eval_network(0, ps, data.inputs[ix], DerivMask::value_only());
      return o.value - data.targets[ix];
    });
  };

  const std::size_t b = std::min<std::size_t>(std::max(opt.batch_size, 1), n);
  const std::size_t steps_per_pass = (n + b - 1) / b;
  SteppedObjective stepped = [&](int step, std::span<const double> t, std::span<double> g) {
    const std::size_t within = static_cast<std::size_t>(step) % steps_per_pass;
    const std::size_t begin = within * b;
    return eval_subset(t, g, begin, std::min(b, n - begin));
  };
  Objective fullo = [&](std::span<const double> t, std::span<double> g) {
    return eval_subset(t, g, 0, n);
  };

  std::vector<double> theta(init.flat().begin(), init.flat().end());
  auto adam = adam_minimize(stepped, std::move(theta), opt);
  auto lb = lbfgs_minimize(fullo, std::move(adam.params), opt);

  FitResult res{ParamSet(arch, std::move(lb.params)), 0.0, adam.stop, lb.stop};
  std::vector<double> scratch(res.params.size());
  res.final_loss = fullo(res.params.flat(), scratch);
  return res;
}

// ---------------------------------------------------------------------------
// Training orchestration
// ---------------------------------------------------------------------------

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows) {
  std::ofstream os(path);
  if (!os) throw InvalidInputError("cannot open history CSV for writing: " + path);
  os << "step,stage,total,ic_or_tc,bcd,bcn,res,data,darcy,wall_seconds\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n",
                  r.step, r.stage.c_str(), r.total, r.ic_or_tc, r.bcd, r.bcn, r.res, r.data,
                  r.darcy, r.wall_seconds);
    os << buf;
  }
}

FieldGrid sample_u_on_grid(const ParamSet& u_params, const ProblemSpec& spec,
                           const FieldGrid& like, double t, bool raw_formulation,
                           const std::function<double(double)>& g_at) {
  FieldGrid out = like;
  out.kind = FieldKind::Concentration;
  Workspace ws;
  const double tt = t / spec.T - 0.5;
  const double g = raw_formulation ? 1.0 : g_at(tt);
  for (int i = 0; i < out.nx1; ++i)
    for (int j = 0; j < out.nx2; ++j) {
      std::array<double, 3> in;
      if (raw_formulation)
        in = {out.x1(i), out.x2(j), t};
      else
        in = {out.x1(i) / spec.L1 - 0.5, out.x2(j) / spec.L2 - 0.5, tt};
      ws.forward(u_params, in, DerivMask::value_only());
      out.at(i, j) = raw_formulation ? ws.value() : g * ws.value();
    }
  return out;
}

TrainedModel train(const TrainSetup& setup) {
  setup.problem.validate();
  setup.u_arch.validate();
  setup.weights.validate();
  if (!(setup.weights.lambda_res > 0.0))
    throw InvalidInputError("training requires a positive residual weight");

  TrainedModel model{ParamSet(setup.u_arch), std::nullopt, std::nullopt, {}, StopReason::Completed,
                     {}};
  const auto t_start = std::chrono::steady_clock::now();
  auto wall = [&] {
    if (!setup.record_wall_time) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  const bool heterogeneous = setup.K_grid != nullptr && setup.h_grid != nullptr;
  std::shared_ptr<const ParamSet> k_shared, h_shared;
  double K_max = 1.0, h_max = 1.0;

  if (heterogeneous && setup.kind != ProblemKind::Inverse) {
    // Algorithm stages: fit the conductivity and head networks by regression.
    K_max = *std::max_element(setup.K_grid->values.begin(), setup.K_grid->values.end());
    h_max = *std::max_element(setup.h_grid->values.begin(), setup.h_grid->values.end());
    if (!(h_max > 0.0)) h_max = setup.problem.head_scale();
    auto k_fit = fit_field_dnn(grid_regression_data(*setup.K_grid, setup.problem, 1.0 / K_max),
                               setup.field_arch, setup.field_optim, setup.exec, setup.seed + 1);
    model.history.push_back(
        {0, "fit_k", k_fit.final_loss, 0, 0, 0, 0, 0, 0, wall()});
    auto h_fit = fit_field_dnn(grid_regression_data(*setup.h_grid, setup.problem, 1.0 / h_max),
                               setup.field_arch, setup.field_optim, setup.exec, setup.seed + 2);
    model.history.push_back(
        {0, "fit_h", h_fit.final_loss, 0, 0, 0, 0, 0, 0, wall()});
    model.k_params = std::move(k_fit.params);
    model.h_params = std::move(h_fit.params);
    k_shared = std::make_shared<const ParamSet>(*model.k_params);
    h_shared = std::make_shared<const ParamSet>(*model.h_params);
  }

  if (setup.kind == ProblemKind::Inverse) {
    if (!setup.data) throw InvalidInputError("inverse training requires a measurement set");
    InverseLoss::Config lcfg;
    lcfg.weights = setup.weights;
    lcfg.u_arch = setup.u_arch;
    lcfg.field_arch = setup.field_arch;
    lcfg.form = setup.dispersion_form;
    lcfg.batch_size = setup.u_optim.batch_size;
    lcfg.exec = setup.exec;
    lcfg.seed = setup.seed;
    InverseLoss loss(setup.problem, setup.plan, setup.darcy_plan, *setup.data, lcfg);

    auto u0 = xavier_init(setup.u_arch.layer_sizes, setup.seed, setup.u_arch.hidden,
                          setup.u_arch.output);
    auto k0 = xavier_init(setup.field_arch.layer_sizes, setup.seed + 1);
    auto h0 = xavier_init(setup.field_arch.layer_sizes, setup.seed + 2);
    std::vector<double> theta;
    theta.reserve(loss.param_count());
    theta.insert(theta.end(), u0.flat().begin(), u0.flat().end());
    theta.insert(theta.end(), k0.flat().begin(), k0.flat().end());
    theta.insert(theta.end(), h0.flat().begin(), h0.flat().end());

    int counter = 0;
    auto record = [&](const char* stage, double total) {
      const auto& tm = loss.last_terms();
      model.history.push_back({counter++, stage, total, tm.ic, tm.bcd, tm.bcn, tm.res, tm.data,
                               tm.darcy_bcd + tm.darcy_bcn + tm.darcy_res, wall()});
    };
    SteppedObjective stepped = [&](int step, std::span<const double> t, std::span<double> g) {
      const double v = loss.minibatch(step, t, g);
      record("adam", v);
      return v;
    };
    auto adam = adam_minimize(stepped, std::move(theta), setup.u_optim);
    counter = 0;
    Objective fullo = [&](std::span<const double> t, std::span<double> g) {
      const double v = loss.full(t, g);
      record("lbfgs", v);
      return v;
    };
    auto lb = lbfgs_minimize(fullo, std::move(adam.params), setup.u_optim);
    model.final_stop = lb.stop;

    std::vector<double> th = std::move(lb.params);
    model.u_params = ParamSet(setup.u_arch,
                              std::vector<double>(th.begin(), th.begin() + loss.k_offset()));
    model.k_params = ParamSet(setup.field_arch,
                              std::vector<double>(th.begin() + loss.k_offset(),
                                                  th.begin() + loss.h_offset()));
    model.h_params =
        ParamSet(setup.field_arch, std::vector<double>(th.begin() + loss.h_offset(), th.end()));

    NetworkCoeffConfig ncfg;
    ncfg.k_params = std::make_shared<const ParamSet>(*model.k_params);
    ncfg.h_params = std::make_shared<const ParamSet>(*model.h_params);
    ncfg.K_max = setup.data->K_max;
    ncfg.h_max = setup.data->h_max;
    ncfg.form = setup.dispersion_form;
    model.coeffs = DimensionlessCoeffs::from_networks(setup.problem, ncfg);
    return model;
  }

  // Forward / backward u training.
  DimensionlessCoeffs coeffs;
  if (heterogeneous) {
    NetworkCoeffConfig ncfg;
    ncfg.k_params = k_shared;
    ncfg.h_params = h_shared;
    ncfg.K_max = K_max;
    ncfg.h_max = h_max;
    ncfg.form = setup.dispersion_form;
    coeffs = DimensionlessCoeffs::from_networks(setup.problem, ncfg);
  } else {
    coeffs = DimensionlessCoeffs::mean_field(setup.problem);
  }

  PinnLoss::Config lcfg;
  lcfg.kind = setup.kind;
  lcfg.weights = setup.weights;
  lcfg.u_arch = setup.u_arch;
  lcfg.raw_formulation = setup.raw_formulation;
  lcfg.batch_size = setup.u_optim.batch_size;
  lcfg.exec = setup.exec;
  lcfg.seed = setup.seed;
  PinnLoss loss(setup.problem, setup.plan, coeffs, lcfg, setup.data);

  auto u0 = xavier_init(setup.u_arch.layer_sizes, setup.seed, setup.u_arch.hidden,
                        setup.u_arch.output);
  std::vector<double> theta(u0.flat().begin(), u0.flat().end());

  int counter = 0;
  auto record = [&](const char* stage, double total) {
    const auto& tm = loss.last_terms();
    model.history.push_back({counter++, stage, total, tm.ic_or_tc, tm.bcd, tm.bcn, tm.res,
                             tm.data, 0.0, wall()});
  };
  SteppedObjective stepped = [&](int step, std::span<const double> t, std::span<double> g) {
    const double v = loss.minibatch(step, t, g);
    record("adam", v);
    return v;
  };
  auto adam = adam_minimize(stepped, std::move(theta), setup.u_optim);
  counter = 0;
  Objective fullo = [&](std::span<const double> t, std::span<double> g) {
    const double v = loss.full(t, g);
    record("lbfgs", v);
    return v;
  };
  auto lb = lbfgs_minimize(fullo, std::move(adam.params), setup.u_optim);
  model.final_stop = lb.stop;
  model.u_params = ParamSet(setup.u_arch, std::move(lb.params));
  model.coeffs = coeffs;
  return model;
}

}  // namespace adepinn
