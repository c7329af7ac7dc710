#include <benchmark/benchmark.h>

#include "adepinn/fd.hpp"
#include "adepinn/pinn.hpp"

using namespace adepinn;

namespace {

const ParamSet& u_net() {
  static ParamSet ps = xavier_init({3, 40, 40, 40, 40, 1}, 7);
  return ps;
}

ProblemSpec meanfield_spec() {
  ProblemSpec spec;
  spec.L1 = spec.L2 = 1.0;
  spec.T = 0.5;
  spec.x1_star = 0.25;
  spec.x2_star = 0.5;
  spec.epsilon = 0.05;
  spec.V = 0.6;
  spec.Dx1 = 0.04;
  spec.Dx2 = 0.03;
  spec.aL = 0.04 / 0.6;
  spec.aT = 0.03 / 0.6;
  return spec;
}

void BM_NetworkValue(benchmark::State& state) {
  Workspace ws;
  const std::array<double, 3> x{0.1, -0.2, 0.3};
  for (auto _ : state) {
    ws.forward(u_net(), x, DerivMask::value_only());
    benchmark::DoNotOptimize(ws.value());
  }
}
BENCHMARK(BM_NetworkValue);

void BM_NetworkFullDerivatives(benchmark::State& state) {
  Workspace ws;
  const std::array<double, 3> x{0.1, -0.2, 0.3};
  const DerivMask mask = DerivMask::full(3);
  for (auto _ : state) {
    ws.forward(u_net(), x, mask);
    benchmark::DoNotOptimize(ws.second(0));
  }
}
BENCHMARK(BM_NetworkFullDerivatives);

void BM_ResidualGradient(benchmark::State& state) {
  const auto spec = meanfield_spec();
  const auto coeffs = DimensionlessCoeffs::mean_field(spec);
  Tape tape;
  const int slot = tape.add_slot(u_net().size());
  const std::array<double, 3> z{0.1, -0.2, 0.3};
  for (auto _ : state) {
    tape.reset_nodes();
    Expr r = residual_normalized_expr(tape, slot, u_net(), z, coeffs);
    tape.backward(r, 2.0 * r.value());
    benchmark::DoNotOptimize(tape.slot_grad(slot).data());
  }
}
BENCHMARK(BM_ResidualGradient);

void BM_AdeStep64x32(benchmark::State& state) {
  ProblemSpec spec;
  FieldGrid v1, v2;
  v1.kind = FieldKind::VelocityX1;
  v1.nx1 = 64;
  v1.nx2 = 32;
  v1.dx1 = spec.L1 / 64;
  v1.dx2 = spec.L2 / 32;
  v1.values.assign(64 * 32, spec.mean_field_speed());
  v2 = v1;
  v2.kind = FieldKind::VelocityX2;
  std::fill(v2.values.begin(), v2.values.end(), 0.0);
  AdeOptions opts;
  opts.nt_save = 1;
  ProblemSpec run = spec;
  for (auto _ : state) {
    run.T = 2e-3;  // a handful of explicit steps
    auto sol = solve_ade_fd(v1, v2, run, opts);
    benchmark::DoNotOptimize(sol.snapshots.back().values.data());
  }
}
BENCHMARK(BM_AdeStep64x32);

}  // namespace

BENCHMARK_MAIN();
