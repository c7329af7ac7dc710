#include "config.hpp"

#include <fstream>

#include "adepinn/analytic.hpp"
#include "adepinn/errors.hpp"

namespace adepinn::cli {

void deep_merge(json& base, const json& overlay) {
  if (!overlay.is_object() || !base.is_object()) {
    base = overlay;
    return;
  }
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      deep_merge(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

json preset(const std::string& name) {
  static const json base = {
      {"grid", {{"nx1", 64}, {"nx2", 32}, {"nt_save", 20}}},
      {"network",
       {{"u_layers", {3, 40, 40, 40, 40, 1}},
        {"field_layers", {2, 24, 24, 24, 1}},
        {"u_output", "identity"}}},
      {"sampling",
       {{"n_res", 8000},
        {"n_ic", 1000},
        {"ic_fraction", 0.75},
        {"n_t", 20},
        {"n_bc_x2_side", 14},
        {"n_bc_x1_side", 32},
        {"strategy", "adaptive_time"},
        {"adaptive_ratio", 0.5}}},
      {"weights", {{"mode", "criterion"}, {"delta_x_tilde", 0.015625}}},
      {"optim",
       {{"adam_lr", 2e-4},
        {"adam_epochs", 20000},
        {"batch_size", 1000},
        {"lbfgs_tol", 1e-7},
        {"lbfgs_max_iters", 2000},
        {"lbfgs_memory", 10},
        {"field_adam_lr", 1e-3},
        {"field_adam_epochs", 2000},
        {"field_batch_size", 512},
        {"field_lbfgs_max_iters", 500}}},
      {"formulation",
       {{"normalized", true},
        {"dispersion_form", "standard_bear"},
        {"conservative_extra_term", false}}},
      {"inverse",
       {{"n_x", 20}, {"n_obs_t", 20}, {"n_k", 10}, {"n_h", 10}, {"darcy_n_res", 1000},
        {"darcy_n_bc_x2_side", 14}, {"darcy_n_bc_x1_side", 32}}},
  };

  json p = base;
  if (name == "paper2d" || name == "desk" || name.empty()) {
    p["problem"] = {{"L1", 1.0},        {"L2", 0.5},          {"T", 0.5},
                    {"x1_star", 0.15},  {"x2_star", 0.25},    {"M", 1.0},
                    {"epsilon", 0.025}, {"phi", 0.317},       {"H", 0.0},
                    {"q", 1.0},         {"Dw", 0.0},          {"aL", 0.02945},
                    {"aT", 0.02045},    {"sigma_Y", 0.9},     {"lambda_corr", 0.5},
                    {"mean_Y", 0.0},    {"Dx1", 0.0929},      {"Dx2", 0.0645}};
    return p;
  }
  if (name == "meanfield2d") {
    p["problem"] = {{"L1", 1.0},       {"L2", 1.0},           {"T", 0.5},
                    {"x1_star", 0.25}, {"x2_star", 0.5},      {"M", 1.0},
                    {"epsilon", 0.05}, {"phi", 0.317},        {"H", 0.0},
                    {"q", 1.0},        {"Dw", 0.0},           {"aL", 0.06666666666666667},
                    {"aT", 0.05},      {"sigma_Y", 0.9},      {"lambda_corr", 0.5},
                    {"mean_Y", 0.0},   {"Dx1", 0.04},         {"Dx2", 0.03},
                    {"V", 0.6}};
    p["grid"] = {{"nx1", 64}, {"nx2", 64}, {"nt_save", 20}};
    p["sampling"]["n_bc_x2_side"] = 8;
    p["sampling"]["n_bc_x1_side"] = 8;
    return p;
  }
  if (name == "approx1d") {
    p["approx1d"] = {{"eps", 0.025}, {"x0", 0.25},  {"D", 0.093},  {"v", 3.15},
                     {"Lx", 4.0},    {"Lt", 1.0},   {"nx", 101},   {"nt", 51},
                     {"seeds", {1, 2, 3}},          {"layers", {2, 32, 32, 32, 1}},
                     {"adam_lr", 1e-3},             {"adam_epochs", 2000},
                     {"batch_size", 512},           {"lbfgs_max_iters", 800}};
    p["problem"] = {{"L1", 1.0}, {"L2", 0.5}, {"T", 0.5}};
    return p;
  }
  throw InvalidInputError("unknown preset: " + name +
                          " (available: paper2d, desk, meanfield2d, approx1d)");
}

Config resolve_config(const std::string& preset_name, const std::string& config_path) {
  json root = preset(preset_name.empty() ? "paper2d" : preset_name);
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw InvalidInputError("cannot open config file: " + config_path);
    json user = json::parse(is);
    deep_merge(root, user);
  }
  return Config{std::move(root)};
}

double Config::number(const char* section, const char* key) const {
  if (!root.contains(section) || !root[section].contains(key))
    throw InvalidInputError(std::string("config missing ") + section + "." + key);
  return root[section][key].get<double>();
}

double Config::number_or(const char* section, const char* key, double fallback) const {
  if (!root.contains(section) || !root[section].contains(key)) return fallback;
  return root[section][key].get<double>();
}

int Config::integer(const char* section, const char* key) const {
  return static_cast<int>(number(section, key));
}

bool Config::flag_or(const char* section, const char* key, bool fallback) const {
  if (!root.contains(section) || !root[section].contains(key)) return fallback;
  return root[section][key].get<bool>();
}

std::string Config::text_or(const char* section, const char* key,
                            const std::string& fallback) const {
  if (!root.contains(section) || !root[section].contains(key)) return fallback;
  return root[section][key].get<std::string>();
}

ProblemSpec Config::problem() const {
  ProblemSpec s;
  s.L1 = number("problem", "L1");
  s.L2 = number("problem", "L2");
  s.T = number("problem", "T");
  s.x1_star = number_or("problem", "x1_star", s.x1_star);
  s.x2_star = number_or("problem", "x2_star", s.x2_star);
  s.M = number_or("problem", "M", s.M);
  s.epsilon = number_or("problem", "epsilon", s.epsilon);
  s.phi = number_or("problem", "phi", s.phi);
  s.H = number_or("problem", "H", s.H);
  s.q = number_or("problem", "q", s.q);
  s.Dw = number_or("problem", "Dw", s.Dw);
  s.aL = number_or("problem", "aL", s.aL);
  s.aT = number_or("problem", "aT", s.aT);
  s.sigma_Y = number_or("problem", "sigma_Y", s.sigma_Y);
  s.lambda_corr = number_or("problem", "lambda_corr", s.lambda_corr);
  s.mean_Y = number_or("problem", "mean_Y", s.mean_Y);
  s.Dx1 = number_or("problem", "Dx1", s.Dx1);
  s.Dx2 = number_or("problem", "Dx2", s.Dx2);
  if (root.contains("problem") && root["problem"].contains("V") &&
      !root["problem"]["V"].is_null())
    s.V = root["problem"]["V"].get<double>();
  s.validate();
  return s;
}

int Config::grid_nx1() const { return integer("grid", "nx1"); }
int Config::grid_nx2() const { return integer("grid", "nx2"); }
int Config::nt_save() const { return integer("grid", "nt_save"); }

namespace {
MlpSpec arch_from(const json& layers, const std::string& output) {
  MlpSpec spec;
  for (const auto& v : layers) spec.layer_sizes.push_back(v.get<int>());
  if (output == "identity")
    spec.output = OutputActivation::Identity;
  else if (output == "sigmoid")
    spec.output = OutputActivation::Sigmoid;
  else if (output == "softplus")
    spec.output = OutputActivation::Softplus;
  else
    throw InvalidInputError("unknown output activation: " + output);
  spec.validate();
  return spec;
}
}  // namespace

MlpSpec Config::u_arch() const {
  return arch_from(root.at("network").at("u_layers"),
                   text_or("network", "u_output", "identity"));
}

MlpSpec Config::field_arch() const {
  return arch_from(root.at("network").at("field_layers"), "identity");
}

MlpSpec Config::approx1d_arch() const {
  return arch_from(root.at("approx1d").at("layers"), "identity");
}

SampleCounts Config::sample_counts() const {
  SampleCounts c;
  c.n_res = integer("sampling", "n_res");
  c.n_ic = integer("sampling", "n_ic");
  c.ic_fraction = number("sampling", "ic_fraction");
  c.n_t = integer("sampling", "n_t");
  c.n_bc_x2_side = integer("sampling", "n_bc_x2_side");
  c.n_bc_x1_side = integer("sampling", "n_bc_x1_side");
  c.adaptive_ratio = number_or("sampling", "adaptive_ratio", 0.5);
  return c;
}

SampleStrategy Config::strategy() const {
  return sample_strategy_from_string(text_or("sampling", "strategy", "adaptive_time"));
}

LossWeights Config::weights(const ProblemSpec& spec) const {
  const std::string mode = text_or("weights", "mode", "criterion");
  if (mode == "criterion") {
    return weight_criteria(spec.mean_field(), number_or("weights", "delta_x_tilde", 1.0 / 64.0));
  }
  if (mode != "explicit")
    throw InvalidInputError("weights.mode must be 'criterion' or 'explicit'");
  LossWeights w;
  w.lambda_ic_or_tc = number("weights", "lambda_ic");
  w.lambda_bcd = number_or("weights", "lambda_bcd", w.lambda_ic_or_tc);
  w.lambda_bcn = number("weights", "lambda_bcn");
  w.lambda_res = number_or("weights", "lambda_res", 1.0);
  w.lambda_data = number_or("weights", "lambda_data", w.lambda_ic_or_tc);
  w.lambda_darcy_bcd = number_or("weights", "lambda_darcy_bcd", 1.0);
  w.lambda_darcy_bcn = number_or("weights", "lambda_darcy_bcn", 1.0);
  w.lambda_darcy_res = number_or("weights", "lambda_darcy_res", 1.0);
  w.validate();
  return w;
}

OptimConfig Config::u_optim() const {
  OptimConfig o;
  o.adam_lr = number("optim", "adam_lr");
  o.adam_epochs = integer("optim", "adam_epochs");
  o.batch_size = integer("optim", "batch_size");
  o.lbfgs_tol = number("optim", "lbfgs_tol");
  o.lbfgs_max_iters = integer("optim", "lbfgs_max_iters");
  o.lbfgs_memory = integer("optim", "lbfgs_memory");
  o.validate();
  return o;
}

OptimConfig Config::field_optim() const {
  OptimConfig o;
  o.adam_lr = number("optim", "field_adam_lr");
  o.adam_epochs = integer("optim", "field_adam_epochs");
  o.batch_size = integer("optim", "field_batch_size");
  o.lbfgs_tol = number_or("optim", "field_lbfgs_tol", 1e-12);
  o.lbfgs_max_iters = integer("optim", "field_lbfgs_max_iters");
  o.validate();
  return o;
}

bool Config::normalized() const { return flag_or("formulation", "normalized", true); }

DispersionForm Config::dispersion_form() const {
  const std::string f = text_or("formulation", "dispersion_form", "standard_bear");
  if (f == "standard_bear") return DispersionForm::StandardBear;
  if (f == "as_written") return DispersionForm::AsWritten;
  throw InvalidInputError("unknown dispersion form: " + f);
}

bool Config::conservative_extra_term() const {
  return flag_or("formulation", "conservative_extra_term", false);
}

}  // namespace adepinn::cli
