#include "sfps/metrics.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sfps/errors.hpp"

namespace sfps {

FStatistic weighted_f_statistic(const Vector& response, const Matrix& covariates,
                                const Vector& weights) {
  const Index n = response.size(), p = covariates.cols();
  if (covariates.rows() != n) throw DimensionError("F statistic: covariate rows mismatch");
  if (n <= p + 1) throw InsufficientDataError("F statistic needs n > p + 1");
  Vector w = weights.size() == 0 ? Vector::Ones(n) : weights;
  if (w.size() != n) throw DimensionError("F statistic: weights length mismatch");
  if ((w.array() <= 0.0).any() || !w.allFinite()) {
    throw DataError("F statistic: weights must be positive");
  }

  Matrix x(n, p + 1);
  x.col(0).setOnes();
  x.rightCols(p) = covariates;
  const Vector sw = w.cwiseSqrt();
  Eigen::ColPivHouseholderQR<Matrix> qr(sw.asDiagonal() * x);
  qr.setThreshold(1e-10);
  if (qr.rank() < p + 1) throw DataError("F statistic: degenerate covariate design");
  const Vector coef = qr.solve(sw.cwiseProduct(response));
  const Vector fitted = x * coef;
  const double ybar = w.dot(response) / w.sum();
  const double sst = (w.array() * (response.array() - ybar).square()).sum();
  const double sse = (w.array() * (response - fitted).array().square()).sum();
  const double ssr = (w.array() * (fitted.array() - ybar).square()).sum();

  const double scale = std::max(1.0, (w.array() * response.array().square()).sum());
  if (sst <= 1e-28 * scale) return FStatistic{0.0, false};
  if (sse <= 1e-14 * sst) return FStatistic{std::numeric_limits<double>::infinity(), true};
  const double df_res = static_cast<double>(n - p - 1);
  return FStatistic{(ssr / static_cast<double>(p)) / (sse / df_res), false};
}

double weighted_abs_correlation(const Vector& a, const Vector& c, const Vector& weights) {
  const Index n = a.size();
  if (c.size() != n) throw DimensionError("correlation: length mismatch");
  Vector w = weights.size() == 0 ? Vector::Ones(n) : weights;
  if (w.size() != n) throw DimensionError("correlation: weights length mismatch");
  w /= w.sum();
  const double ma = w.dot(a), mc = w.dot(c);
  const Vector da = a.array() - ma, dc = c.array() - mc;
  const double vab = (w.array() * da.array() * dc.array()).sum();
  const double va = (w.array() * da.array().square()).sum();
  const double vc = (w.array() * dc.array().square()).sum();
  if (!(va > 0.0) || !(vc > 0.0)) throw DataError("correlation: zero variance");
  return std::min(1.0, std::abs(vab) / std::sqrt(va * vc));
}

double ise(const VectorRef& estimate, const VectorRef& truth, const Grid& grid) {
  if (estimate.size() != grid.size() || truth.size() != grid.size()) {
    throw DimensionError("ise: grid mismatch");
  }
  const Vector d = estimate - truth;
  return inner_product(d, d, grid);
}

double median(std::vector<double> values) {
  if (values.empty()) throw InsufficientDataError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  return m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

AccuracyReport summarize_runs(const Matrix& estimates, const VectorRef& truth, const Grid& grid) {
  if (estimates.rows() == 0) throw InsufficientDataError("summarize_runs: no runs");
  if (estimates.cols() != grid.size()) throw DimensionError("summarize_runs: grid mismatch");
  AccuracyReport rep;
  rep.runs = estimates.rows();
  rep.ise.reserve(static_cast<std::size_t>(rep.runs));
  for (Index r = 0; r < rep.runs; ++r) {
    rep.ise.push_back(ise(estimates.row(r).transpose(), truth, grid));
  }
  double sum = 0.0;
  for (double v : rep.ise) sum += v;
  rep.aise = sum / static_cast<double>(rep.runs);
  rep.mise = median(rep.ise);
  const Vector mean_curve = estimates.colwise().mean().transpose();
  rep.isb = ise(mean_curve, truth, grid);
  return rep;
}

BalanceReport balance_report(const Matrix& scores, const Matrix& covariates,
                             const std::map<std::string, Vector>& weightings) {
  BalanceReport rep;
  for (const auto& [label, w] : weightings) {
    std::vector<FStatistic> fs;
    Matrix corr(scores.cols(), covariates.cols());
    for (Index k = 0; k < scores.cols(); ++k) {
      const Vector a = scores.col(k);
      fs.push_back(weighted_f_statistic(a, covariates, w));
      for (Index j = 0; j < covariates.cols(); ++j) {
        corr(k, j) = weighted_abs_correlation(a, covariates.col(j), w);
      }
    }
    rep.f_statistics.emplace(label, std::move(fs));
    rep.correlations.emplace(label, std::move(corr));
  }
  return rep;
}

}  // namespace sfps
