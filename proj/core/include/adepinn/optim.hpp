#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace adepinn {

/// Two-step training configuration. The Adam stage may use minibatched
/// objectives (the step index is forwarded to the callback); the L-BFGS stage
/// always sees the full-batch objective.
struct OptimConfig {
  double adam_lr = 2e-4;
  int adam_epochs = 20000;
  int batch_size = 1000;
  int lbfgs_memory = 10;
  double lbfgs_tol = 1e-7;
  int lbfgs_max_iters = 5000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Objective for Adam: fills grad (same length as theta) and returns the loss
/// for this step. The step index selects the minibatch, if any.
using SteppedObjective =
    std::function<double(int step, std::span<const double> theta, std::span<double> grad)>;

/// Full-batch objective for L-BFGS.
using Objective = std::function<double(std::span<const double> theta, std::span<double> grad)>;

enum class StopReason : std::uint8_t {
  Completed,      // epoch/iteration budget exhausted
  Tolerance,      // loss fell below the tolerance
  LineSearch,     // no acceptable step; best iterate returned
  NonFinite,      // objective or gradient became non-finite; best iterate returned
};
const char* to_string(StopReason r);

struct OptimResult {
  std::vector<double> params;
  std::vector<double> history;  // loss per Adam epoch / per L-BFGS iteration
  StopReason stop = StopReason::Completed;
  std::string diagnostic;
};

/// Standard Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) for
/// cfg.adam_epochs steps at the fixed learning rate cfg.adam_lr.
OptimResult adam_minimize(const SteppedObjective& f, std::vector<double> params0,
                          const OptimConfig& cfg);

/// Limited-memory BFGS with the two-loop recursion and a strong-Wolfe line
/// search; terminates when the loss drops below cfg.lbfgs_tol or the
/// iteration budget is exhausted.
OptimResult lbfgs_minimize(const Objective& f, std::vector<double> params0,
                           const OptimConfig& cfg);

/// One L-BFGS direction: -H g from the two-loop recursion over stored
/// (s, y) displacement/gradient-change pairs, with initial scaling
/// H0 = gamma I. Exposed for property tests.
std::vector<double> lbfgs_two_loop(std::span<const double> grad,
                                   const std::vector<std::vector<double>>& s_list,
                                   const std::vector<std::vector<double>>& y_list,
                                   double gamma);

}  // namespace adepinn
