#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adepinn/analytic.hpp"
#include "adepinn/errors.hpp"
#include "adepinn/fd.hpp"
#include "adepinn/metrics.hpp"
#include "adepinn/pinn.hpp"
#include "adepinn/version.hpp"
#include "config.hpp"

namespace fs = std::filesystem;
using namespace adepinn;
using adepinn::cli::Config;

namespace {

struct GlobalOpts {
  std::string preset = "paper2d";
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  bool deterministic = false;
  int threads = 0;  // 0: hardware default
};

ExecPolicy exec_policy(const GlobalOpts& g) {
  if (g.deterministic) return ExecPolicy::sequential();
  if (g.threads > 0) return ExecPolicy{g.threads};
  return ExecPolicy::hardware();
}

fs::path prepare_run_dir(const GlobalOpts& g, const std::string& subcommand, Config& cfg) {
  fs::path dir = g.out_dir.empty()
                     ? fs::path("runs") / (subcommand + "-" + g.preset + "-s" + std::to_string(g.seed))
                     : fs::path(g.out_dir);
  fs::create_directories(dir);
  cfg.root["seed"] = g.seed;
  cfg.root["deterministic"] = g.deterministic;
  cfg.root["preset"] = g.preset;
  std::ofstream cf(dir / "config.json");
  cf << cfg.root.dump(2) << "\n";
  std::ofstream vf(dir / "version.txt");
  vf << kVersionString << "\nsubcommand " << subcommand << "\nseed " << g.seed
     << "\ndeterministic " << (g.deterministic ? 1 : 0) << "\n";
  return dir;
}

void require_file(const std::string& path, const char* what, const char* producer) {
  if (path.empty() || !fs::exists(path))
    throw InvalidInputError(std::string("missing ") + what + " '" + path + "'; run the " +
                            producer + " subcommand first");
}

void write_csv_line(std::ofstream& os, std::initializer_list<double> vals) {
  char buf[40];
  bool first = true;
  for (double v : vals) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << (first ? "" : ",") << buf;
    first = false;
  }
  os << "\n";
}

FieldGrid metrics_grid(const ProblemSpec& spec, int nx1, int nx2) {
  FieldGrid g;
  g.kind = FieldKind::Concentration;
  g.nx1 = nx1;
  g.nx2 = nx2;
  g.dx1 = spec.L1 / nx1;
  g.dx2 = spec.L2 / nx2;
  g.values.assign(static_cast<std::size_t>(nx1) * nx2, 0.0);
  return g;
}

FieldGrid analytic_grid(const ProblemSpec& spec, const FieldGrid& like, double t) {
  FieldGrid g = like;
  const MeanFieldParams p = spec.mean_field();
  for (int i = 0; i < g.nx1; ++i)
    for (int j = 0; j < g.nx2; ++j) g.at(i, j) = mean_field_2d(g.x1(i), g.x2(j), t, p);
  return g;
}

// ---------------------------------------------------------------------------
// approx1d: regression study of the decaying 1D pulse
// ---------------------------------------------------------------------------

int run_approx1d(const GlobalOpts& g) {
  Config cfg = cli::resolve_config(g.preset.empty() ? "approx1d" : g.preset, g.config_path);
  if (!cfg.root.contains("approx1d"))
    cfg.root["approx1d"] = cli::preset("approx1d")["approx1d"];
  auto dir = prepare_run_dir(g, "approx1d", cfg);

  const double eps = cfg.number("approx1d", "eps");
  const double x0 = cfg.number("approx1d", "x0");
  const double D = cfg.number("approx1d", "D");
  const double v = cfg.number("approx1d", "v");
  const double Lx = cfg.number("approx1d", "Lx");
  const double Lt = cfg.number("approx1d", "Lt");
  const int nx = cfg.integer("approx1d", "nx");
  const int nt = cfg.integer("approx1d", "nt");
  const MlpSpec arch = cfg.approx1d_arch();

  OptimConfig opt;
  opt.adam_lr = cfg.number("approx1d", "adam_lr");
  opt.adam_epochs = cfg.integer("approx1d", "adam_epochs");
  opt.batch_size = cfg.integer("approx1d", "batch_size");
  opt.lbfgs_max_iters = cfg.integer("approx1d", "lbfgs_max_iters");
  opt.lbfgs_tol = 1e-12;

  std::vector<std::uint64_t> seeds;
  for (const auto& s : cfg.root["approx1d"]["seeds"]) seeds.push_back(s.get<std::uint64_t>());

  // Sample the exact solution on the uniform space-time mesh.
  RegressionData raw, norm;
  std::vector<double> times(nt), xs(nx);
  for (int j = 0; j < nt; ++j) times[j] = Lt * j / (nt - 1.0);
  for (int i = 0; i < nx; ++i) xs[i] = Lx * i / (nx - 1.0);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nt; ++j) {
      const double u = solution_1d(xs[i], times[j], eps, x0, D, v);
      const std::vector<double> in{xs[i] / Lx - 0.5, times[j] / Lt - 0.5};
      raw.inputs.push_back(in);
      raw.targets.push_back(u);
      norm.inputs.push_back(in);
      norm.targets.push_back(u / solution_1d_peak(times[j], eps, D));
    }

  const auto exec = exec_policy(g);
  std::vector<std::vector<double>> err_raw(seeds.size(), std::vector<double>(nt));
  std::vector<std::vector<double>> err_norm(seeds.size(), std::vector<double>(nt));

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    auto fit_raw = fit_field_dnn(raw, arch, opt, exec, g.seed * 1000 + seeds[s]);
    auto fit_norm = fit_field_dnn(norm, arch, opt, exec, g.seed * 1000 + seeds[s] + 500);
    Workspace ws;
    for (int j = 0; j < nt; ++j) {
      const double peak = solution_1d_peak(times[j], eps, D);
      double nr = 0.0, dr = 0.0, nn = 0.0;
      for (int i = 0; i < nx; ++i) {
        const double u = solution_1d(xs[i], times[j], eps, x0, D, v);
        const std::vector<double> in{xs[i] / Lx - 0.5, times[j] / Lt - 0.5};
        ws.forward(fit_raw.params, in, DerivMask::value_only());
        const double ur = ws.value();
        ws.forward(fit_norm.params, in, DerivMask::value_only());
        const double un = ws.value() * peak;
        nr += (ur - u) * (ur - u);
        nn += (un - u) * (un - u);
        dr += u * u;
      }
      err_raw[s][j] = std::sqrt(nr / dr);
      err_norm[s][j] = std::sqrt(nn / dr);
    }
    save_checkpoint_file(fit_raw.params,
                         (dir / ("raw_s" + std::to_string(seeds[s]) + ".ckpt")).string());
    save_checkpoint_file(fit_norm.params,
                         (dir / ("norm_s" + std::to_string(seeds[s]) + ".ckpt")).string());
  }

  std::ofstream csv(dir / "approx1d.csv");
  csv << "time,raw_mean,norm_mean";
  for (auto s : seeds) csv << ",raw_s" << s << ",norm_s" << s;
  csv << "\n";
  double raw0 = 0, rawT = 0, norm0 = 0, normT = 0;
  for (int j = 0; j < nt; ++j) {
    double rm = 0, nm = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      rm += err_raw[s][j];
      nm += err_norm[s][j];
    }
    rm /= seeds.size();
    nm /= seeds.size();
    if (j == 0) {
      raw0 = rm;
      norm0 = nm;
    }
    if (j == nt - 1) {
      rawT = rm;
      normT = nm;
    }
    std::vector<double> row{times[j], rm, nm};
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      row.push_back(err_raw[s][j]);
      row.push_back(err_norm[s][j]);
    }
    char buf[40];
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      csv << (c ? "," : "") << buf;
    }
    csv << "\n";
  }

  std::ofstream sum(dir / "summary.txt");
  sum << "raw_initial " << raw0 << "\nraw_final " << rawT << "\nraw_ratio " << rawT / raw0
      << "\nnorm_initial " << norm0 << "\nnorm_final " << normT << "\nnorm_ratio "
      << normT / norm0 << "\n";
  std::cout << "approx1d: raw ratio " << rawT / raw0 << ", normalized ratio " << normT / norm0
            << " -> " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Field pipeline subcommands
// ---------------------------------------------------------------------------

int run_gen_field(const GlobalOpts& g) {
  Config cfg = cli::resolve_config(g.preset, g.config_path);
  auto dir = prepare_run_dir(g, "gen-field", cfg);
  const ProblemSpec spec = cfg.problem();
  const int n1 = cfg.grid_nx1(), n2 = cfg.grid_nx2();
  auto K = grf_sample(n1, n2, spec.L1 / n1, spec.L2 / n2, spec.mean_Y, spec.sigma_Y,
                      spec.lambda_corr, g.seed);
  save_field_file(K, (dir / "K.txt").string());
  std::cout << "gen-field: wrote " << (dir / "K.txt").string() << "\n";
  return 0;
}

int run_solve_darcy(const GlobalOpts& g, const std::string& k_file) {
  Config cfg = cli::resolve_config(g.preset, g.config_path);
  auto dir = prepare_run_dir(g, "solve-darcy", cfg);
  require_file(k_file, "conductivity field", "gen-field");
  const ProblemSpec spec = cfg.problem();
  auto K = load_field_file(k_file);
  auto h = solve_darcy_fd(K, spec.H, spec.q);
  save_field_file(h, (dir / "h.txt").string());
  std::cout << "solve-darcy: wrote " << (dir / "h.txt").string() << "\n";
  return 0;
}

int run_solve_ade(const GlobalOpts& g, const std::string& k_file, const std::string& h_file) {
  Config cfg = cli::resolve_config(g.preset, g.config_path);
  auto dir = prepare_run_dir(g, "solve-ade", cfg);
  require_file(k_file, "conductivity field", "gen-field");
  require_file(h_file, "head field", "solve-darcy");
  const ProblemSpec spec = cfg.problem();
  auto K = load_field_file(k_file);
  auto h = load_field_file(h_file);
  auto [v1, v2] = darcy_velocity(K, h, spec.phi);
  AdeOptions opts;
  opts.nt_save = cfg.nt_save();
  opts.dispersion_form = cfg.dispersion_form();
  auto sol = solve_ade_fd(v1, v2, spec, opts);
  save_snapshots(sol, (dir / "u").string());
  save_field_file(v1, (dir / "v1.txt").string());
  save_field_file(v2, (dir / "v2.txt").string());

  std::ofstream mass_csv(dir / "mass_report.csv");
  mass_csv << "time,mass\n";
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    auto d = plume_diagnostics(sol.snapshots[k]);
    write_csv_line(mass_csv, {sol.times[k], d.mass});
  }
  std::cout << "solve-ade: wrote " << (dir / "u.manifest").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Training subcommands
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string k_file, h_file, u_manifest;
  std::string wrapper = "sigmoid";  // backward only
  int n_x = -1;                     // inverse only; -1: from config
};

SamplePlan plan_with_grid_ic(const ProblemSpec& spec, const Config& cfg, std::uint64_t seed,
                             const FieldGrid* ic_grid) {
  return build_sample_plan(spec, cfg.sample_counts(), cfg.strategy(), seed, ic_grid);
}

void write_metrics_and_summary(const fs::path& dir, const ProblemSpec& spec,
                               const TrainedModel& model, bool raw,
                               const std::vector<double>& times,
                               const std::vector<FieldGrid>& refs) {
  std::vector<double> rel;
  std::vector<PlumeDiagnostics> diag;
  std::vector<FieldGrid> hat_norm, ref_norm;
  const MeanFieldParams p = spec.mean_field();
  for (std::size_t k = 0; k < times.size(); ++k) {
    auto uh = sample_u_on_grid(model.u_params, spec, refs[k], times[k], raw, model.coeffs.g_at);
    rel.push_back(rel_l2_at_time(uh, refs[k]));
    diag.push_back(plume_diagnostics(uh));
    const double gk = normalizer_g(times[k], p);
    FieldGrid hn = uh, rn = refs[k];
    for (auto& v : hn.values) v /= gk;
    for (auto& v : rn.values) v /= gk;
    hat_norm.push_back(std::move(hn));
    ref_norm.push_back(std::move(rn));
  }
  write_metrics_csv((dir / "metrics.csv").string(), times, rel, diag);
  const double pooled = rel_l2_time_avg(hat_norm, ref_norm);
  std::ofstream sum(dir / "summary.txt");
  sum << "pooled_rel_l2_normalized " << pooled << "\n";
  sum << "final_stop " << to_string(model.final_stop) << "\n";
  if (!model.history.empty()) sum << "final_loss " << model.history.back().total << "\n";
  std::cout << "pooled normalized rel L2: " << pooled << "\n";
}

int run_train_forward(const GlobalOpts& g, const TrainArgs& args) {
  Config cfg = cli::resolve_config(g.preset, g.config_path);
  auto dir = prepare_run_dir(g, "train-forward", cfg);
  const ProblemSpec spec = cfg.problem();
  const bool heterogeneous = !args.k_file.empty() || !args.h_file.empty();

  TrainSetup setup;
  setup.kind = ProblemKind::Forward;
  setup.problem = spec;
  setup.weights = cfg.weights(spec);
  setup.u_arch = cfg.u_arch();
  setup.field_arch = cfg.field_arch();
  setup.u_optim = cfg.u_optim();
  setup.field_optim = cfg.field_optim();
  setup.raw_formulation = !cfg.normalized();
  setup.dispersion_form = cfg.dispersion_form();
  setup.exec = exec_policy(g);
  setup.seed = g.seed;
  setup.record_wall_time = !g.deterministic;

  FieldGrid K, h;
  AdeSolution ref_sol;
  if (heterogeneous) {
    require_file(args.k_file, "conductivity field", "gen-field");
    require_file(args.h_file, "head field", "solve-darcy");
    require_file(args.u_manifest, "reference snapshots", "solve-ade");
    K = load_field_file(args.k_file);
    h = load_field_file(args.h_file);
    ref_sol = load_snapshots(args.u_manifest);
    setup.K_grid = &K;
    setup.h_grid = &h;
    setup.plan = plan_with_grid_ic(spec, cfg, g.seed, &ref_sol.snapshots.front());
  } else {
    auto ic = analytic_grid(spec, metrics_grid(spec, cfg.grid_nx1(), cfg.grid_nx2()), 0.0);
    setup.plan = plan_with_grid_ic(spec, cfg, g.seed, &ic);
  }
  save_plan_file(setup.plan, (dir / "plan.txt").string());

  auto model = train(setup);
  save_checkpoint_file(model.u_params, (dir / "u.ckpt").string());
  if (model.k_params) save_checkpoint_file(*model.k_params, (dir / "k.ckpt").string());
  if (model.h_params) save_checkpoint_file(*model.h_params, (dir / "h.ckpt").string());
  write_history_csv((dir / "history.csv").string(), model.history);

  std::vector<double> times;
  std::vector<FieldGrid> refs;
  if (heterogeneous) {
    for (std::size_t k = 1; k < ref_sol.times.size(); ++k) {
      times.push_back(ref_sol.times[k]);
      refs.push_back(ref_sol.snapshots[k]);
    }
  } else {
    auto like = metrics_grid(spec, cfg.grid_nx1(), cfg.grid_nx2());
    const int nt = cfg.nt_save();
    for (int k = 1; k <= nt; ++k) {
      const double t = spec.T * k / nt;
      times.push_back(t);
      refs.push_back(analytic_grid(spec, like, t));
    }
  }
  write_metrics_and_summary(dir, spec, model, setup.raw_formulation, times, refs);
  return 0;
}

int run_train_backward(const GlobalOpts& g, const TrainArgs& args) {
  Config cfg = cli::resolve_config(g.preset, g.config_path);
  cfg.root["network"]["u_output"] = args.wrapper == "identity" ? "identity" : args.wrapper;
  auto dir = prepare_run_dir(g, "train-backward", cfg);
  const ProblemSpec spec = cfg.problem();
  const bool heterogeneous = !args.k_file.empty() || !args.h_file.empty();

  TrainSetup setup;
  setup.kind = ProblemKind::Backward;
  setup.problem = spec;
  setup.weights = cfg.weights(spec);
  setup.u_arch = cfg.u_arch();
  setup.field_arch = cfg.field_arch();
  setup.u_optim = cfg.u_optim();
  setup.field_optim = cfg.field_optim();
  setup.dispersion_form = cfg.dispersion_form();
  setup.exec = exec_policy(g);
  setup.seed = g.seed;
  setup.record_wall_time = !g.deterministic;

  FieldGrid K, h;
  AdeSolution ref_sol;
  std::vector<double> times;
  std::vector<FieldGrid> refs;
  if (heterogeneous) {
    require_file(args.k_file, "conductivity field", "gen-field");
    require_file(args.h_file, "head field", "solve-darcy");
    require_file(args.u_manifest, "reference snapshots", "solve-ade");
    K = load_field_file(args.k_file);
    h = load_field_file(args.h_file);
    ref_sol = load_snapshots(args.u_manifest);
    setup.K_grid = &K;
    setup.h_grid = &h;
    // terminal condition from the last snapshot
    setup.plan = plan_with_grid_ic(spec, cfg, g.seed, &ref_sol.snapshots.back());
    for (std::size_t k = 0; k < ref_sol.times.size(); ++k) {
      times.push_back(ref_sol.times[k]);
      refs.push_back(ref_sol.snapshots[k]);
    }
  } else {
    auto like = metrics_grid(spec, cfg.grid_nx1(), cfg.grid_nx2());
    auto terminal = analytic_grid(spec, like, spec.T);
    setup.plan = plan_with_grid_ic(spec, cfg, g.seed, &terminal);
    const int nt = cfg.nt_save();
    for (int k = 0; k <= nt; ++k) {
      const double t = spec.T * k / nt;
      times.push_back(t);
      refs.push_back(analytic_grid(spec, like, t));
    }
  }
  save_plan_file(setup.plan, (dir / "plan.txt").string());

  auto model = train(setup);
  save_checkpoint_file(model.u_params, (dir / "u.ckpt").string());
  if (model.k_params) save_checkpoint_file(*model.k_params, (dir / "k.ckpt").string());
  if (model.h_params) save_checkpoint_file(*model.h_params, (dir / "h.ckpt").string());
  write_history_csv((dir / "history.csv").string(), model.history);

  // Backward diagnostics: per-time errors plus source recovery at t = 0.
  std::vector<double> rel;
  std::vector<PlumeDiagnostics> diag;
  double min_u = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < times.size(); ++k) {
    auto uh = sample_u_on_grid(model.u_params, spec, refs[k], times[k], false,
                               model.coeffs.g_at);
    rel.push_back(rel_l2_at_time(uh, refs[k]));
    diag.push_back(plume_diagnostics(uh));
    for (double v : uh.values) min_u = std::min(min_u, v);
  }
  write_metrics_csv((dir / "metrics.csv").string(), times, rel, diag);

  std::ofstream sum(dir / "summary.txt");
  sum << "wrapper " << args.wrapper << "\n";
  sum << "min_u " << min_u << "\n";
  sum << "mass_t0 " << diag.front().mass << "\n";
  sum << "x1c_t0 " << diag.front().x1c << "\n";
  sum << "x2c_t0 " << diag.front().x2c << "\n";
  sum << "true_x1_star " << spec.x1_star << "\n";
  sum << "true_x2_star " << spec.x2_star << "\n";
  sum << "final_stop " << to_string(model.final_stop) << "\n";
  std::cout << "backward: min_u " << min_u << ", recovered center (" << diag.front().x1c << ", "
            << diag.front().x2c << "), mass " << diag.front().mass << "\n";
  return 0;
}

int run_train_inverse(const GlobalOpts& g, const TrainArgs& args) {
  Config cfg = cli::resolve_config(g.preset, g.config_path);
  auto dir = prepare_run_dir(g, "train-inverse", cfg);
  const ProblemSpec spec = cfg.problem();
  require_file(args.k_file, "conductivity field", "gen-field");
  require_file(args.h_file, "head field", "solve-darcy");
  require_file(args.u_manifest, "reference snapshots", "solve-ade");
  auto K = load_field_file(args.k_file);
  auto h = load_field_file(args.h_file);
  auto ref_sol = load_snapshots(args.u_manifest);

  const int n_x = args.n_x >= 0 ? args.n_x : cfg.integer("inverse", "n_x");
  auto data = sample_measurements(ref_sol, K, h, spec, n_x, cfg.integer("inverse", "n_obs_t"),
                                  cfg.integer("inverse", "n_k"), cfg.integer("inverse", "n_h"),
                                  g.seed + 17);

  TrainSetup setup;
  setup.kind = ProblemKind::Inverse;
  setup.problem = spec;
  setup.weights = cfg.weights(spec);
  setup.u_arch = cfg.u_arch();
  setup.field_arch = cfg.field_arch();
  setup.u_optim = cfg.u_optim();
  setup.field_optim = cfg.field_optim();
  setup.dispersion_form = cfg.dispersion_form();
  setup.exec = exec_policy(g);
  setup.seed = g.seed;
  setup.record_wall_time = !g.deterministic;
  setup.data = &data;
  setup.plan = plan_with_grid_ic(spec, cfg, g.seed, &ref_sol.snapshots.front());
  setup.darcy_plan =
      build_darcy_plan(spec, cfg.integer("inverse", "darcy_n_res"),
                       cfg.integer("inverse", "darcy_n_bc_x2_side"),
                       cfg.integer("inverse", "darcy_n_bc_x1_side"), g.seed + 23);
  save_plan_file(setup.plan, (dir / "plan.txt").string());
  save_plan_file(setup.darcy_plan, (dir / "darcy_plan.txt").string());

  auto model = train(setup);
  save_checkpoint_file(model.u_params, (dir / "u.ckpt").string());
  save_checkpoint_file(*model.k_params, (dir / "k.ckpt").string());
  save_checkpoint_file(*model.h_params, (dir / "h.ckpt").string());
  write_history_csv((dir / "history.csv").string(), model.history);

  // Errors in u over time against the reference snapshots.
  std::vector<double> times;
  std::vector<FieldGrid> refs;
  for (std::size_t k = 1; k < ref_sol.times.size(); ++k) {
    times.push_back(ref_sol.times[k]);
    refs.push_back(ref_sol.snapshots[k]);
  }
  std::vector<double> rel;
  std::vector<PlumeDiagnostics> diag;
  std::vector<FieldGrid> hat_norm, ref_norm;
  const MeanFieldParams mfp = spec.mean_field();
  for (std::size_t k = 0; k < times.size(); ++k) {
    auto uh = sample_u_on_grid(model.u_params, spec, refs[k], times[k], false,
                               model.coeffs.g_at);
    rel.push_back(rel_l2_at_time(uh, refs[k]));
    diag.push_back(plume_diagnostics(uh));
    const double gk = normalizer_g(times[k], mfp);
    FieldGrid hn = uh, rn = refs[k];
    for (auto& v : hn.values) v /= gk;
    for (auto& v : rn.values) v /= gk;
    hat_norm.push_back(std::move(hn));
    ref_norm.push_back(std::move(rn));
  }
  write_metrics_csv((dir / "metrics.csv").string(), times, rel, diag);
  const double pooled_u = rel_l2_time_avg(hat_norm, ref_norm);

  // Conductivity and velocity recovery errors on the grid.
  Workspace ws;
  FieldGrid k_hat = K;
  for (int i = 0; i < K.nx1; ++i)
    for (int j = 0; j < K.nx2; ++j) {
      const std::vector<double> in{K.x1(i) / spec.L1 - 0.5, K.x2(j) / spec.L2 - 0.5};
      ws.forward(*model.k_params, in, DerivMask::value_only());
      k_hat.at(i, j) = std::max(1e-12, ws.value() * data.K_max);
    }
  const double err_k = rel_l2_at_time(k_hat, K);
  save_field_file(k_hat, (dir / "k_hat.txt").string());

  auto [v1_ref, v2_ref] = darcy_velocity(K, h, spec.phi);
  double vnum = 0.0, vden = 0.0;
  for (int i = 0; i < K.nx1; ++i)
    for (int j = 0; j < K.nx2; ++j) {
      const auto c = model.coeffs.provider->values(K.x1(i) / spec.L1 - 0.5,
                                                   K.x2(j) / spec.L2 - 0.5);
      const double vh1 = c.v1 * spec.L1 / spec.T, vh2 = c.v2 * spec.L2 / spec.T;
      const double m_hat = std::hypot(vh1, vh2);
      const double m_ref = std::hypot(v1_ref.at(i, j), v2_ref.at(i, j));
      vnum += (m_hat - m_ref) * (m_hat - m_ref);
      vden += m_ref * m_ref;
    }
  const double err_v = std::sqrt(vnum / vden);

  std::ofstream sum(dir / "summary.txt");
  sum << "n_x " << n_x << "\n";
  sum << "pooled_rel_l2_normalized " << pooled_u << "\n";
  sum << "rel_l2_k " << err_k << "\n";
  sum << "rel_l2_vmag " << err_v << "\n";
  sum << "final_stop " << to_string(model.final_stop) << "\n";
  std::cout << "inverse (n_x=" << n_x << "): u " << pooled_u << ", K " << err_k << ", |v| "
            << err_v << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed solver for advection-dispersion transport"};
  app.set_version_flag("--version", std::string(kVersionString));

  GlobalOpts g;
  app.add_option("--preset", g.preset, "Named preset: paper2d, desk, meanfield2d, approx1d");
  app.add_option("--config", g.config_path, "JSON config overlaying the preset");
  app.add_option("--out", g.out_dir, "Run directory (default: runs/<sub>-<preset>-s<seed>)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_flag("--deterministic", g.deterministic,
               "Single-threaded fixed-order reductions, zeroed wall times");
  app.add_option("--threads", g.threads, "Worker threads (default: hardware)");
  app.require_subcommand(1);

  auto* approx = app.add_subcommand("approx1d", "1D decaying-pulse regression study");
  auto* gen = app.add_subcommand("gen-field", "Sample the log-conductivity random field");
  auto* darcy = app.add_subcommand("solve-darcy", "Steady Darcy head from a conductivity field");
  auto* ade = app.add_subcommand("solve-ade", "Reference transport solve (upwind FD)");
  auto* tf = app.add_subcommand("train-forward", "Train the forward transport network");
  auto* tb = app.add_subcommand("train-backward", "Train the backward (source recovery) network");
  auto* ti = app.add_subcommand("train-inverse", "Joint data-assimilation training");

  TrainArgs targs;
  std::string k_file, h_file;
  darcy->add_option("--k-file", k_file, "Conductivity field file");
  ade->add_option("--k-file", k_file, "Conductivity field file");
  ade->add_option("--h-file", h_file, "Head field file");
  for (auto* cmd : {tf, tb, ti}) {
    cmd->add_option("--k-file", targs.k_file, "Conductivity field (heterogeneous run)");
    cmd->add_option("--h-file", targs.h_file, "Head field (heterogeneous run)");
    cmd->add_option("--u-manifest", targs.u_manifest, "Reference snapshot manifest");
  }
  tb->add_option("--wrapper", targs.wrapper, "Output wrapper: sigmoid, softplus, identity")
      ->check(CLI::IsMember({"sigmoid", "softplus", "identity"}));
  ti->add_option("--n-x", targs.n_x, "Concentration sensor count (overrides config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (approx->parsed()) return run_approx1d(g);
    if (gen->parsed()) return run_gen_field(g);
    if (darcy->parsed()) return run_solve_darcy(g, k_file);
    if (ade->parsed()) return run_solve_ade(g, k_file, h_file);
    if (tf->parsed()) return run_train_forward(g, targs);
    if (tb->parsed()) return run_train_backward(g, targs);
    if (ti->parsed()) return run_train_inverse(g, targs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
