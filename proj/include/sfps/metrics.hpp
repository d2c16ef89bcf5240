#pragma once

#include <map>
#include <string>
#include <vector>

#include "sfps/fdata.hpp"

namespace sfps {

/// Overall-regression F statistic. `infinite` marks an exact fit (SSE = 0)
/// with nonzero explained variation; `value` is then +infinity.
struct FStatistic {
  double value = 0.0;
  bool infinite = false;
};

/// F = (SSR / p) / (SSE / (n - p - 1)) of the WLS fit of response on an
/// intercept plus covariates. Degrees of freedom use n, not an effective
/// sample size. Pass an empty weight vector for unit weights.
FStatistic weighted_f_statistic(const Vector& response, const Matrix& covariates,
                                const Vector& weights);

/// |weighted Pearson correlation| with normalized weights.
double weighted_abs_correlation(const Vector& a, const Vector& c, const Vector& weights);

/// Quadrature integral of (estimate - truth)^2.
double ise(const VectorRef& estimate, const VectorRef& truth, const Grid& grid);

struct AccuracyReport {
  std::vector<double> ise;
  double aise = 0.0;
  double mise = 0.0;
  double isb = 0.0;
  Index runs = 0;
};

/// AISE (mean), MISE (median, midpoint for even counts) and ISB (ISE of the
/// run-averaged estimate). Each row of `estimates` is one run's curve.
AccuracyReport summarize_runs(const Matrix& estimates, const VectorRef& truth, const Grid& grid);

double median(std::vector<double> values);

/// Per-FPC balance statistics for several weightings of one design.
struct BalanceReport {
  // method label -> per-FPC F statistic of the score on all covariates
  std::map<std::string, std::vector<FStatistic>> f_statistics;
  // method label -> L x p absolute weighted correlations
  std::map<std::string, Matrix> correlations;
};

/// `weightings` maps a method label to a weight vector; an empty vector means
/// unit weights.
BalanceReport balance_report(const Matrix& scores, const Matrix& covariates,
                             const std::map<std::string, Vector>& weightings);

}  // namespace sfps
