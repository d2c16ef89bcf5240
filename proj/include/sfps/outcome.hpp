#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sfps/fpca.hpp"

namespace sfps {

/// Truncated-basis estimate of a coefficient function.
/// curve = sum_k coefficients[k] * eigenfunction[basis_ids[k]].
struct EffectEstimate {
  Vector coefficients;
  double intercept = 0.0;
  Vector curve;
  std::vector<Index> basis_ids;
  bool weighted = false;
};

/// Builds the coefficient curve from basis coefficients.
EffectEstimate make_effect(const FpcaModel& model, std::vector<Index> basis_ids,
                           Vector coefficients, double intercept, bool weighted);

/// Columns basis_ids of the model's score matrix.
Matrix basis_scores(const FpcaModel& model, const std::vector<Index>& basis_ids);

/// First `count` component ids: 0, 1, ..., count - 1.
std::vector<Index> leading_basis(Index count);

/// Weighted least squares of (y - mean(y)) on the scores, no intercept; the
/// intercept is the unweighted outcome mean. Pass an empty weight vector for
/// unit weights.
EffectEstimate fit_truncated(const Vector& outcome, const Matrix& scores, const Vector& weights,
                             const FpcaModel& model, const std::vector<Index>& basis_ids);

/// Intercept plus the quadrature integral of the effect curve against x.
double integrated_effect(const EffectEstimate& estimate, const VectorRef& x, const Grid& grid);

struct AviRanking {
  std::vector<Index> components;  // initial set, in component order
  Vector lambda;
  Vector beta;
  Vector avi;                     // lambda * beta^2
  std::vector<Index> order;       // positions into `components`, decreasing avi
  Vector cumulative_share;        // along `order`
};

struct AviSelection {
  AviRanking ranking;
  std::vector<Index> basis_ids;  // sorted ascending
};

/// Association-variation index selection: start from the components needed
/// to reach `initial_pve`, rank them by lambda_k * beta_k^2 and keep the
/// smallest top set whose share of the total reaches `avi_share`.
AviSelection avi_select(const Vector& outcome, const FpcaModel& model, double initial_pve,
                        double avi_share);

struct CoefficientRow {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_value = 0.0;
  double p_value = 0.0;
};

struct InteractionFit {
  EffectEstimate base;        // group 0
  EffectEstimate difference;  // group 1 minus group 0
  EffectEstimate group1;
  std::vector<CoefficientRow> table;
  double f_statistic = 0.0;
  double f_p_value = 0.0;
  Index df_model = 0;
  Index df_residual = 0;
  bool reduced = false;  // only one group present; fitted without group terms
};

/// WLS on [1, B, g, B * g] with naive (weights treated as known) standard
/// errors, t-test p-values and the overall F-test.
InteractionFit fit_interaction(const Vector& outcome, const FpcaModel& model,
                               const std::vector<Index>& basis_ids, const Vector& group,
                               const Vector& weights);

struct Bands {
  Vector lower;
  Vector upper;
  int replicates = 0;
  int failures = 0;
};

/// Produces an estimate from the subjects listed in `indices` (with
/// repetition). May throw sfps::SolverError or sfps::DataError to signal a
/// failed replicate.
using ResampledEstimator = std::function<Vector(std::span<const Index> indices)>;

/// Case-resampling bootstrap with percentile intervals at `level`.
/// Replicate b draws from its own stream seeded by (seed, b).
Bands bootstrap_bands(const ResampledEstimator& estimator, Index n, int replicates, double level,
                      std::uint64_t seed);

/// Linear-interpolation sample quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double prob);

}  // namespace sfps
