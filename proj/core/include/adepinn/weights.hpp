#pragma once

namespace adepinn {

/// Weights of the composite PINN loss. lambda_ic_or_tc multiplies the initial
/// condition term in forward problems and the terminal condition term in
/// backward problems. The darcy_* weights apply to the flow-equation terms of
/// the joint inverse loss.
struct LossWeights {
  double lambda_ic_or_tc = 1.0;
  double lambda_bcd = 1.0;
  double lambda_bcn = 1.0;
  double lambda_res = 1.0;
  double lambda_data = 0.0;
  double lambda_darcy_bcd = 1.0;
  double lambda_darcy_bcn = 1.0;
  double lambda_darcy_res = 1.0;

  void validate() const;
};

}  // namespace adepinn
