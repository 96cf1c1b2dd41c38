#pragma once

#include <span>
#include <vector>

#include "mfpi/dataset.hpp"

namespace mfpi {

struct QrFit {
  /// (intercept, slope_1, ..., slope_d).
  std::vector<double> beta;
  double objective = 0.0;
  int iterations = 0;
};

/// sum_i rho_tau(Y_i - [1, X_i'] beta).
double quantile_objective(const Dataset& data, double tau, std::span<const double> beta);

/// Linear regression quantile at level tau. A smoothed IRLS pass gives a
/// starting point (skipped when `start` is supplied), then basis-exchange
/// steps walk to an exact vertex minimizer. Throws FitError when the design
/// is rank deficient or the exchange does not terminate.
QrFit solve_quantile_regression(const Dataset& data, double tau,
                                std::span<const double> start = {});

}  // namespace mfpi
