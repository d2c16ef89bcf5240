#pragma once

#include "sfps/balance.hpp"

namespace sfps {

/// Stabilized weight under joint normality: ratio of the standard normal
/// density of a_star to the N(beta^T c_star, sigma) density.
double weight_formula(const VectorRef& a_star, const VectorRef& c_star, const MatrixRef& beta,
                      const MatrixRef& sigma);
double log_weight_formula(const VectorRef& a_star, const VectorRef& c_star,
                          const MatrixRef& beta, const MatrixRef& sigma);

struct MomOptions {
  double tolerance = 1e-8;  // RMS of the stacked moment residual
  int max_iterations = 200;
  // When Newton cannot reach the tolerance, minimize the residual norm by
  // Levenberg-Marquardt and keep that solution (flagged in ParamFit).
  bool least_squares_fallback = true;
};

/// Stacked residual of the two moment equations: vech(n^{-1} R^T R - sigma)
/// followed by vec(n^{-1} sum_i w_i A*_i C*_i^T).
Vector moment_residual(const StandardizedDesign& design, const Matrix& beta, const Matrix& sigma);

/// Damped Newton solve started from the multivariate OLS fit of A* on C*.
/// Without a root in reach, falls back to the least-squares solution unless
/// disabled. Throws ConvergenceError (carrying the best RMS residual) on
/// failure.
ParamFit solve_mom(const StandardizedDesign& design, const MomOptions& options = {});

BalanceWeights estimate_weights_param(const StandardizedDesign& design,
                                      const MomOptions& options = {});

}  // namespace sfps
