#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sfps/fpca.hpp"

namespace sfps {

enum class BalanceMethod { kUnweighted, kParametric, kNonparametric };

std::string to_string(BalanceMethod method);
BalanceMethod parse_balance_method(const std::string& name);

/// Weighted moment residuals of a weight vector against a design.
struct ConstraintResiduals {
  double sum_residual = 0.0;  // sum(w) - n
  Vector score_sum;           // sum_i w_i A*_i
  Vector covariate_sum;       // sum_i w_i C*_i
  Matrix cross_moment;        // n^{-1} sum_i w_i A*_i C*_i^T
};

ConstraintResiduals constraint_residuals(const StandardizedDesign& design, const Vector& weights);

/// Unweighted cross moment n^{-1} sum_i A*_i C*_i^T.
Matrix unweighted_cross_moment(const StandardizedDesign& design);

struct ParamFit {
  Matrix beta;   // p x L
  Matrix sigma;  // L x L
  double moment_residual_norm = 0.0;
  int iterations = 0;
  bool pd_projected = false;
  // False when no root was reached and the least-squares solution was kept.
  bool exact_root = true;
};

struct NonparamDiagnostics {
  double theta_hat = 0.0;
  Vector gamma_hat;
  double inner_objective = 0.0;
  double profile_objective = 0.0;
  std::vector<double> infeasible_thetas;
  bool rescaled = false;
};

struct BalanceWeights {
  Vector weights;
  BalanceMethod method = BalanceMethod::kUnweighted;
  ConstraintResiduals residuals;
  std::optional<ParamFit> param;
  std::optional<NonparamDiagnostics> nonparam;
};

}  // namespace sfps
