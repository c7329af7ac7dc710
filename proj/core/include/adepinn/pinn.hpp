#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adepinn/analytic.hpp"
#include "adepinn/fd.hpp"
#include "adepinn/fields.hpp"
#include "adepinn/nn.hpp"
#include "adepinn/optim.hpp"
#include "adepinn/parallel.hpp"
#include "adepinn/sampling.hpp"
#include "adepinn/tape.hpp"
#include "adepinn/weights.hpp"

namespace adepinn {

/// Value and derivatives of a scalar space-time field at one point; the
/// value-path residual operators consume this, so analytic stand-ins and
/// networks share one code path. Index order matches the network inputs:
/// 0 -> x1, 1 -> x2, 2 -> t.
struct FieldJet {
  double value = 0.0;
  std::array<double, 3> grad{};
  std::array<double, 6> second{};  // pair-indexed, see pair_index()
};

using FieldFn = std::function<FieldJet(std::array<double, 3> point, const DerivMask& mask)>;

/// Adapts a network to FieldFn (2- or 3-input networks).
FieldFn network_field(const ParamSet& params);

/// Dimensionless coefficient bundle at one point, including the spatial
/// derivatives required by the expanded divergence form of the residual.
struct CoeffValues {
  double v1 = 0.0, v2 = 0.0;
  double d11 = 0.0, d22 = 0.0, d12 = 0.0, d21 = 0.0;
  double d11_dx1 = 0.0, d22_dx2 = 0.0, d12_dx2 = 0.0, d21_dx1 = 0.0;
  double div_v = 0.0;
};

struct CoeffExprs {
  Expr v1, v2;
  Expr d11, d22, d12, d21;
  Expr d11_dx1, d22_dx2, d12_dx2, d21_dx1;
  Expr div_v;
  bool has_derivs = false;  // false for constant coefficients
};

/// Provider of the dimensionless velocity/dispersion coefficients, either
/// closed-form constants (mean-field problems) or derived from conductivity
/// and head networks through the Darcy relation.
class CoeffProvider {
 public:
  virtual ~CoeffProvider() = default;
  virtual CoeffValues values(double x1t, double x2t) const = 0;
  virtual CoeffExprs at(Tape& tape, double x1t, double x2t) const = 0;
  virtual bool is_constant() const = 0;
};

/// Constant coefficients v~ = (V T/L1, 0), D~ = diag(Dx1 T/L1^2, Dx2 T/L2^2).
std::shared_ptr<CoeffProvider> constant_coeffs(const ProblemSpec& spec);

/// Coefficients from k-hat/h-hat networks (inputs x~): the dimensionless
/// Darcy flux with the velocity-dependent dispersion tensor and its spatial
/// derivatives, built on the tape. k_slot/h_slot of -1 freeze the networks
/// (forward/backward problems); nonnegative slots make the coefficients
/// differentiable in the network parameters (inverse problem).
struct NetworkCoeffConfig {
  std::shared_ptr<const ParamSet> k_params;
  std::shared_ptr<const ParamSet> h_params;
  int k_slot = -1;
  int h_slot = -1;
  double K_max = 1.0;
  double h_max = 1.0;
  DispersionForm form = DispersionForm::StandardBear;
};
std::shared_ptr<CoeffProvider> network_coeffs(const ProblemSpec& spec, NetworkCoeffConfig cfg);

/// The full coefficient context of the dimensionless residual: the provider
/// plus the normalizer handles. source_factor(t~) is -(T/g) dg/dt at the
/// matching physical time.
struct DimensionlessCoeffs {
  std::shared_ptr<CoeffProvider> provider;
  std::function<double(double)> source_factor;  // of t~
  std::function<double(double)> g_at;           // normalizer of t~
  bool include_div_v_term = false;

  static DimensionlessCoeffs mean_field(const ProblemSpec& spec);
  static DimensionlessCoeffs from_networks(const ProblemSpec& spec, NetworkCoeffConfig cfg);
};

/// Physical-coordinate coefficients for the un-normalized baseline residual.
struct RawCoeffs {
  std::function<CoeffValues(double x1, double x2)> at;
  bool include_div_v_term = false;

  static RawCoeffs constant(double v1, double d11, double d22);
};

/// Dimensionless ADE residual at (x1~, x2~, t~) for any field (value path).
double residual_normalized(const FieldFn& u, std::array<double, 3> point,
                           const DimensionlessCoeffs& coeffs);

/// Same residual on the tape for a network representation (training path).
Expr residual_normalized_expr(Tape& tape, int u_slot, const ParamSet& u_params,
                              std::array<double, 3> point, const DimensionlessCoeffs& coeffs);

/// Un-normalized residual at a physical point (baseline mode).
double residual_raw(const FieldFn& u, std::array<double, 3> point, const RawCoeffs& coeffs);
Expr residual_raw_expr(Tape& tape, int u_slot, const ParamSet& u_params,
                       std::array<double, 3> point, const RawCoeffs& coeffs);

/// Neumann boundary operator grad(u).n - target at a boundary point.
double neumann_operator(const FieldFn& u, const SamplePlan::BcPoint& p, double target);

/// Sparse measurements for data assimilation, stored normalized:
/// u* = u/g(t), K* = K/K_max, h* = h/h_max.
struct MeasurementSet {
  struct UObs {
    double x1, x2, t;  // dimensionless
    double value;      // u/g(t)
  };
  struct PointObs {
    double x1, x2;
    double value;
  };
  std::vector<UObs> u_obs;
  std::vector<PointObs> k_obs;
  std::vector<PointObs> h_obs;
  int n_x = 0;
  int n_t = 0;
  double K_max = 1.0;
  double h_max = 1.0;
};

/// Draws measurement locations from the reference fields: n_x concentration
/// sensors sampled over n_t snapshot times, plus n_k conductivity and n_h
/// head observations. K_max comes from the sampled conductivities, h_max from
/// the geometric-mean closed form.
MeasurementSet sample_measurements(const AdeSolution& sol, const FieldGrid& K,
                                   const FieldGrid& h, const ProblemSpec& spec, int n_x,
                                   int n_t, int n_k, int n_h, std::uint64_t seed);

enum class ProblemKind : std::uint8_t { Forward, Backward, Inverse };
const char* to_string(ProblemKind k);

/// Weighted mean-square loss of the forward or backward problem over one
/// sample plan. The initial-condition term becomes the terminal-condition
/// term in backward mode (enforced at t~ = +0.5 against u0/g(T)).
/// raw_formulation switches to the un-normalized baseline: physical
/// coordinates as network inputs, physical targets, RawCoeffs residual.
class PinnLoss {
 public:
  struct Config {
    ProblemKind kind = ProblemKind::Forward;
    LossWeights weights;
    MlpSpec u_arch;
    bool raw_formulation = false;
    int batch_size = 1000;
    ExecPolicy exec;
    std::uint64_t seed = 0;
  };

  struct Terms {
    double ic_or_tc = 0.0;
    double bcd = 0.0;
    double bcn = 0.0;
    double res = 0.0;
    double data = 0.0;
    double total = 0.0;
  };

  PinnLoss(const ProblemSpec& spec, SamplePlan plan, DimensionlessCoeffs coeffs, Config cfg,
           const MeasurementSet* data = nullptr);

  /// Full-batch objective (all loss terms over all points).
  double full(std::span<const double> theta, std::span<double> grad) const;
  /// Adam-stage objective: the residual term runs on a rotating minibatch;
  /// IC/BC/data terms are evaluated in full each step.
  double minibatch(int step, std::span<const double> theta, std::span<double> grad) const;

  Objective objective() const;
  SteppedObjective stepped_objective() const;

  const Terms& last_terms() const { return last_terms_; }
  const SamplePlan& plan() const { return plan_; }
  std::size_t param_count() const { return arch_param_count_; }

 private:
  ProblemSpec spec_;
  SamplePlan plan_;
  DimensionlessCoeffs coeffs_;
  RawCoeffs raw_coeffs_;
  Config cfg_;
  const MeasurementSet* data_;
  std::size_t arch_param_count_;
  mutable std::vector<std::size_t> batch_order_;
  mutable std::size_t current_pass_ = static_cast<std::size_t>(-1);
  mutable Terms last_terms_;

  double eval(std::span<const double> theta, std::span<double> grad, std::size_t res_begin,
              std::size_t res_count, double res_scale) const;
};

/// Joint data-assimilation loss over the three networks (u, k, h): the
/// normalized transport loss, the dimensionless Darcy-flow loss, and the
/// measurement misfit. Parameters are concatenated u | k | h.
class InverseLoss {
 public:
  struct Config {
    LossWeights weights;
    MlpSpec u_arch;
    MlpSpec field_arch;  // used by both k-hat and h-hat
    DispersionForm form = DispersionForm::StandardBear;
    int batch_size = 1000;
    ExecPolicy exec;
    std::uint64_t seed = 0;
  };

  struct Terms {
    double ic = 0.0, bcd = 0.0, bcn = 0.0, res = 0.0;
    double darcy_bcd = 0.0, darcy_bcn = 0.0, darcy_res = 0.0;
    double data = 0.0, total = 0.0;
  };

  InverseLoss(const ProblemSpec& spec, SamplePlan transport_plan, SamplePlan darcy_plan,
              const MeasurementSet& data, Config cfg);

  double full(std::span<const double> theta, std::span<double> grad) const;
  double minibatch(int step, std::span<const double> theta, std::span<double> grad) const;
  Objective objective() const;
  SteppedObjective stepped_objective() const;

  const Terms& last_terms() const { return last_terms_; }
  std::size_t param_count() const { return n_u_ + n_k_ + n_h_; }
  std::size_t u_offset() const { return 0; }
  std::size_t k_offset() const { return n_u_; }
  std::size_t h_offset() const { return n_u_ + n_k_; }

 private:
  ProblemSpec spec_;
  SamplePlan plan_;
  SamplePlan darcy_plan_;
  MeasurementSet data_;
  Config cfg_;
  std::size_t n_u_, n_k_, n_h_;
  mutable std::vector<std::size_t> batch_order_;
  mutable std::size_t current_pass_ = static_cast<std::size_t>(-1);
  mutable Terms last_terms_;

  double eval(std::span<const double> theta, std::span<double> grad, std::size_t res_begin,
              std::size_t res_count, double res_scale) const;
};

/// Spatial sample plan for the Darcy part of the inverse problem: residual
/// points by 2D LHS, head-Dirichlet points on x1~ = +0.5, flux/no-flow
/// Neumann points on the remaining sides (time slots unused).
SamplePlan build_darcy_plan(const ProblemSpec& spec, int n_res, int n_bc_x2_side,
                            int n_bc_x1_side, std::uint64_t seed);

/// Plain mean-square regression of one scalar network on (input, target)
/// pairs; the two-step optimizer schedule applies.
struct RegressionData {
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;
};

struct FitResult {
  ParamSet params;
  double final_loss = 0.0;
  StopReason adam_stop = StopReason::Completed;
  StopReason lbfgs_stop = StopReason::Completed;
};

FitResult fit_field_dnn(const RegressionData& data, const MlpSpec& arch, const OptimConfig& opt,
                        const ExecPolicy& exec, std::uint64_t init_seed);

/// Samples a grid field into regression data over dimensionless inputs,
/// optionally scaling the targets (for K/K_max or h/h_max).
RegressionData grid_regression_data(const FieldGrid& g, const ProblemSpec& spec,
                                    double target_scale = 1.0);

struct HistoryRow {
  int step = 0;
  std::string stage;
  double total = 0.0;
  double ic_or_tc = 0.0, bcd = 0.0, bcn = 0.0, res = 0.0, data = 0.0;
  double darcy = 0.0;
  double wall_seconds = 0.0;
};

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows);

struct TrainSetup {
  ProblemKind kind = ProblemKind::Forward;
  ProblemSpec problem;
  SamplePlan plan;
  SamplePlan darcy_plan;              // inverse only
  LossWeights weights;
  MlpSpec u_arch;
  MlpSpec field_arch;
  OptimConfig u_optim;
  OptimConfig field_optim;
  const FieldGrid* K_grid = nullptr;  // heterogeneous coefficients when set
  const FieldGrid* h_grid = nullptr;
  const MeasurementSet* data = nullptr;
  bool raw_formulation = false;
  DispersionForm dispersion_form = DispersionForm::StandardBear;
  ExecPolicy exec;
  std::uint64_t seed = 0;
  bool record_wall_time = true;  // off in deterministic mode
};

struct TrainedModel {
  ParamSet u_params;
  std::optional<ParamSet> k_params;
  std::optional<ParamSet> h_params;
  std::vector<HistoryRow> history;
  StopReason final_stop = StopReason::Completed;
  DimensionlessCoeffs coeffs;  // coefficients used for the u residual
};

/// The staged training protocol: initialize with Xavier; for heterogeneous
/// problems fit k-hat then h-hat by regression; then train u-hat (or the
/// joint inverse parameters) with Adam followed by L-BFGS. Aborts to the
/// best checkpoint when the loss turns non-finite.
TrainedModel train(const TrainSetup& setup);

/// Evaluates a trained u network on the reference grid at the snapshot time,
/// returning the physical field g(t) * u-hat(x~, t~) (or the raw network
/// value in raw mode).
FieldGrid sample_u_on_grid(const ParamSet& u_params, const ProblemSpec& spec,
                           const FieldGrid& like, double t, bool raw_formulation,
                           const std::function<double(double)>& g_at);

}  // namespace adepinn
