#pragma once

#include <vector>

#include "sfps/balance.hpp"
#include "sfps/bfgs.hpp"

namespace sfps {

struct ElOptions {
  // Regularization; nonpositive means the default 0.1 / n.
  double rho = 0.0;
  Index grid_points = 201;
  bool refine = true;
  // Use n * theta * Gamma_0 inside the moment vector instead of theta * Gamma_0.
  bool hvec_literal = false;
  // Maximize inner objective minus penalty, as printed, instead of the
  // regularized log empirical likelihood -(inner objective) - penalty.
  bool printed_outer_sign = false;
  BfgsOptions inner{};
};

/// Regularized empirical-likelihood balancing problem for one design.
class ElProblem {
 public:
  ElProblem(StandardizedDesign design, const ElOptions& options = {});

  const StandardizedDesign& design() const noexcept { return design_; }
  double rho() const noexcept { return rho_; }
  const Matrix& gamma0() const noexcept { return gamma0_; }
  const std::vector<double>& theta_grid() const noexcept { return theta_grid_; }
  const ElOptions& options() const noexcept { return options_; }

  /// Scale applied to theta * Gamma_0 inside h_i (1, or n with hvec_literal).
  double gamma0_scale() const noexcept;
  /// L + p + L * p
  Index dual_dimension() const noexcept;
  /// Row i is h_i(theta).
  Matrix moment_matrix(double theta) const;
  /// theta^2 / (2 rho) * ||vec(Gamma_0)||^2
  double penalty(double theta) const;

 private:
  StandardizedDesign design_;
  ElOptions options_;
  double rho_;
  Matrix gamma0_;
  Matrix base_;  // h_i(0) rows
  std::vector<double> theta_grid_;
};

/// (A*_i, C*_i, vec(A*_i C*_i^T - scale * theta * Gamma_0)), vec column-major.
Vector moment_vector(const VectorRef& a_star, const VectorRef& c_star, double theta,
                     const MatrixRef& gamma0, double scale = 1.0);

struct InnerSolution {
  Vector gamma;
  double objective = 0.0;  // sum_i log(1 - gamma^T h_i)
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Maximizes sum_i log(1 - gamma^T h_i(theta)) by BFGS, from `start` when it
/// is feasible and from gamma = 0 otherwise. The inverse Hessian is reset to
/// the exact one whenever the quasi-Newton iteration stalls.
/// Throws InfeasibleError when the dual diverges or feasibility cannot be
/// kept, ConvergenceError when the iteration budget runs out.
InnerSolution inner_solve(const ElProblem& problem, double theta, const Vector* start = nullptr);

/// Penalized profile objective maximized by the outer loop.
double profile_objective(const ElProblem& problem, double theta, double inner_objective);

struct ElSolution {
  Vector gamma_hat;
  double theta_hat = 0.0;
  Vector weights;
  double inner_objective = 0.0;
  double profile_objective = 0.0;
  ConstraintResiduals residuals;
  std::vector<double> infeasible_thetas;
  bool rescaled = false;
};

/// Outer grid search over theta (plus golden-section refinement) of the
/// penalized profile objective, then weights 1 / (1 - gamma^T h_i).
ElSolution estimate_weights_np(const ElProblem& problem);

BalanceWeights estimate_weights_np(const StandardizedDesign& design,
                                   const ElOptions& options = {});

}  // namespace sfps
