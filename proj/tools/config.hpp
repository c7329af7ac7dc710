#pragma once

#include <cstdint>
#include <string>

#include "adepinn/fields.hpp"
#include "adepinn/nn.hpp"
#include "adepinn/optim.hpp"
#include "adepinn/sampling.hpp"
#include "adepinn/weights.hpp"
#include "json.hpp"

namespace adepinn::cli {

using nlohmann::json;

/// Resolved experiment configuration: preset defaults overlaid with the user
/// config file, then command-line overrides.
struct Config {
  json root;

  ProblemSpec problem() const;
  int grid_nx1() const;
  int grid_nx2() const;
  int nt_save() const;
  MlpSpec u_arch() const;
  MlpSpec field_arch() const;
  MlpSpec approx1d_arch() const;
  SampleCounts sample_counts() const;
  SampleStrategy strategy() const;
  /// Weights per config: "criterion" derives them from the mean-field
  /// parameters; "explicit" reads the lambda_* entries.
  LossWeights weights(const ProblemSpec& spec) const;
  OptimConfig u_optim() const;
  OptimConfig field_optim() const;
  bool normalized() const;
  DispersionForm dispersion_form() const;
  bool conservative_extra_term() const;

  double number(const char* section, const char* key) const;
  double number_or(const char* section, const char* key, double fallback) const;
  int integer(const char* section, const char* key) const;
  bool flag_or(const char* section, const char* key, bool fallback) const;
  std::string text_or(const char* section, const char* key, const std::string& fallback) const;
};

/// Built-in presets: "meanfield2d" (constant-velocity problem with an
/// analytic oracle), "paper2d" (heterogeneous aquifer at desk scale; also
/// available as "desk"), "approx1d" (the 1D approximation study).
json preset(const std::string& name);

/// preset <- config file <- overrides (deep merge, later wins).
Config resolve_config(const std::string& preset_name, const std::string& config_path);

void deep_merge(json& base, const json& overlay);

}  // namespace adepinn::cli
