#pragma once

#include <functional>
#include <limits>

#include "sfps/fdata.hpp"

namespace sfps {

/// Objective for minimize_bfgs. Returns false when x lies outside the
/// objective's domain; otherwise writes the value and gradient.
using DomainObjective = std::function<bool(const Vector& x, double& value, Vector& gradient)>;

struct BfgsOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 500;
  int max_halvings = 60;
  double armijo = 1e-4;
  // Values below this bound are treated as divergence to -infinity.
  double lower_bound = -std::numeric_limits<double>::infinity();
};

enum class BfgsStatus { kConverged, kMaxIterations, kLineSearchFailed, kUnbounded };

struct BfgsResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  int iterations = 0;
  BfgsStatus status = BfgsStatus::kConverged;
};

/// Quasi-Newton minimization with a backtracking line search that first
/// halves the step until the trial point is inside the domain, then until
/// the Armijo condition holds. `inverse_hessian` seeds the BFGS inverse
/// Hessian approximation.
BfgsResult minimize_bfgs(const DomainObjective& objective, Vector x0, Matrix inverse_hessian,
                         const BfgsOptions& options = {});

}  // namespace sfps
