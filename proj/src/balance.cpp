#include "sfps/balance.hpp"

#include "sfps/errors.hpp"

namespace sfps {

std::string to_string(BalanceMethod method) {
  switch (method) {
    case BalanceMethod::kUnweighted:
      return "unweighted";
    case BalanceMethod::kParametric:
      return "parametric";
    case BalanceMethod::kNonparametric:
      return "nonparametric";
  }
  return "unknown";
}

BalanceMethod parse_balance_method(const std::string& name) {
  if (name == "unweighted" || name == "none") return BalanceMethod::kUnweighted;
  if (name == "parametric" || name == "para") return BalanceMethod::kParametric;
  if (name == "nonparametric" || name == "np") return BalanceMethod::kNonparametric;
  throw DataError("unknown balancing method '" + name + "'");
}

ConstraintResiduals constraint_residuals(const StandardizedDesign& design, const Vector& weights) {
  const Index n = design.n();
  if (weights.size() != n) throw DimensionError("weights length does not match design");
  ConstraintResiduals r;
  r.sum_residual = weights.sum() - static_cast<double>(n);
  r.score_sum = design.a_star.transpose() * weights;
  r.covariate_sum = design.c_star.transpose() * weights;
  r.cross_moment =
      design.a_star.transpose() * weights.asDiagonal() * design.c_star / static_cast<double>(n);
  return r;
}

Matrix unweighted_cross_moment(const StandardizedDesign& design) {
  return design.a_star.transpose() * design.c_star / static_cast<double>(design.n());
}

}  // namespace sfps
