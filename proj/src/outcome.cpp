#include "sfps/outcome.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "sfps/errors.hpp"

namespace sfps {

namespace {

Vector resolve_weights(const Vector& weights, Index n) {
  if (weights.size() == 0) return Vector::Ones(n);
  if (weights.size() != n) throw DimensionError("weights length does not match the outcome");
  if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
    throw DataError("weights must be finite and positive");
  }
  return weights;
}

struct WlsResult {
  Vector coef;
  Matrix xtwx;  // X^T W X
};

WlsResult weighted_least_squares(const Matrix& x, const Vector& y, const Vector& w) {
  const Vector sw = w.cwiseSqrt();
  const Matrix xs = sw.asDiagonal() * x;
  const Vector ys = sw.cwiseProduct(y);
  Eigen::ColPivHouseholderQR<Matrix> qr(xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw CollinearityError("weighted normal equations are rank deficient (rank " +
                            std::to_string(qr.rank()) + " of " + std::to_string(x.cols()) +
                            ")");
  }
  return {qr.solve(ys), xs.transpose() * xs};
}

}  // namespace

EffectEstimate make_effect(const FpcaModel& model, std::vector<Index> basis_ids,
                           Vector coefficients, double intercept, bool weighted) {
  if (static_cast<Index>(basis_ids.size()) != coefficients.size()) {
    throw DimensionError("make_effect: one coefficient per basis id is required");
  }
  Vector curve = Vector::Zero(model.grid.size());
  for (std::size_t k = 0; k < basis_ids.size(); ++k) {
    const Index id = basis_ids[k];
    if (id < 0 || id >= model.components()) throw DimensionError("basis id out of range");
    curve += coefficients[static_cast<Index>(k)] * model.eigenfunctions.row(id).transpose();
  }
  return EffectEstimate{std::move(coefficients), intercept, std::move(curve), std::move(basis_ids),
                        weighted};
}

Matrix basis_scores(const FpcaModel& model, const std::vector<Index>& basis_ids) {
  Matrix b(model.scores.rows(), static_cast<Index>(basis_ids.size()));
  for (std::size_t k = 0; k < basis_ids.size(); ++k) {
    const Index id = basis_ids[k];
    if (id < 0 || id >= model.components()) throw DimensionError("basis id out of range");
    b.col(static_cast<Index>(k)) = model.scores.col(id);
  }
  return b;
}

std::vector<Index> leading_basis(Index count) {
  std::vector<Index> ids(static_cast<std::size_t>(count));
  std::iota(ids.begin(), ids.end(), Index{0});
  return ids;
}

EffectEstimate fit_truncated(const Vector& outcome, const Matrix& scores, const Vector& weights,
                             const FpcaModel& model, const std::vector<Index>& basis_ids) {
  const Index n = outcome.size();
  if (scores.rows() != n) throw DimensionError("scores rows do not match the outcome length");
  if (scores.cols() != static_cast<Index>(basis_ids.size())) {
    throw DimensionError("one score column per basis id is required");
  }
  if (scores.cols() >= n) throw InsufficientDataError("truncation rank must be below n");
  const Vector w = resolve_weights(weights, n);
  const double ybar = outcome.mean();
  const Vector centered = outcome.array() - ybar;
  WlsResult fit = weighted_least_squares(scores, centered, w);
  return make_effect(model, basis_ids, std::move(fit.coef), ybar, weights.size() != 0);
}

double integrated_effect(const EffectEstimate& estimate, const VectorRef& x, const Grid& grid) {
  if (estimate.curve.size() != grid.size() || x.size() != grid.size()) {
    throw DimensionError("integrated_effect: grid mismatch");
  }
  return estimate.intercept + inner_product(estimate.curve, x, grid);
}

AviSelection avi_select(const Vector& outcome, const FpcaModel& model, double initial_pve,
                        double avi_share) {
  if (!(avi_share > 0.0 && avi_share <= 1.0)) {
    throw DataError("avi_select: share must lie in (0, 1]");
  }
  if (model.components() == 0) throw InsufficientDataError("avi_select: empty initial set");
  if (outcome.size() != model.scores.rows()) {
    throw DimensionError("avi_select: outcome length does not match the scores");
  }
  const Index k0 = select_rank(model, initial_pve);
  AviRanking rk;
  rk.components = leading_basis(k0);
  rk.lambda.resize(k0);
  rk.beta.resize(k0);
  rk.avi.resize(k0);
  const Vector yc = outcome.array() - outcome.mean();
  for (Index k = 0; k < k0; ++k) {
    const Vector a = model.scores.col(k).array() - model.scores.col(k).mean();
    rk.lambda[k] = model.eigenvalues[k];
    rk.beta[k] = a.dot(yc) / a.squaredNorm();
    rk.avi[k] = rk.lambda[k] * rk.beta[k] * rk.beta[k];
  }
  rk.order = leading_basis(k0);
  std::stable_sort(rk.order.begin(), rk.order.end(),
                   [&](Index a, Index b) { return rk.avi[a] > rk.avi[b]; });
  double total = 0.0;
  for (Index pos : rk.order) total += rk.avi[pos];
  rk.cumulative_share.resize(k0);
  double run = 0.0;
  Index keep = 1;
  bool found = false;
  for (Index j = 0; j < k0; ++j) {
    run += rk.avi[rk.order[static_cast<std::size_t>(j)]];
    rk.cumulative_share[j] = total > 0.0 ? run / total : 1.0;
    if (!found && rk.cumulative_share[j] >= avi_share) {
      keep = j + 1;
      found = true;
    }
  }
  AviSelection sel;
  sel.basis_ids.assign(rk.order.begin(), rk.order.begin() + keep);
  std::sort(sel.basis_ids.begin(), sel.basis_ids.end());
  sel.ranking = std::move(rk);
  return sel;
}

InteractionFit fit_interaction(const Vector& outcome, const FpcaModel& model,
                               const std::vector<Index>& basis_ids, const Vector& group,
                               const Vector& weights) {
  const Index n = outcome.size();
  if (group.size() != n) throw DimensionError("group length does not match the outcome");
  for (Index i = 0; i < n; ++i) {
    if (group[i] != 0.0 && group[i] != 1.0) throw DataError("group must be coded 0/1");
  }
  const Vector w = resolve_weights(weights, n);
  const Index n1 = static_cast<Index>(group.sum());
  const bool reduced = n1 == 0 || n1 == n;
  const Matrix b = basis_scores(model, basis_ids);
  const Index k = b.cols();
  const Index q = reduced ? k + 1 : 2 * k + 2;
  if (q >= n) throw InsufficientDataError("interaction model has too many terms for n");

  Matrix x(n, q);
  x.col(0).setOnes();
  x.middleCols(1, k) = b;
  if (!reduced) {
    x.col(k + 1) = group;
    x.rightCols(k) = group.asDiagonal() * b;
  }
  WlsResult fit = weighted_least_squares(x, outcome, w);
  const Vector fitted = x * fit.coef;
  const Vector resid = outcome - fitted;
  const double sse = (w.array() * resid.array().square()).sum();
  const double ybar_w = w.dot(outcome) / w.sum();
  const double ssr = (w.array() * (fitted.array() - ybar_w).square()).sum();
  const Index df_res = n - q;
  const Index df_model = q - 1;
  const double sigma2 = sse / static_cast<double>(df_res);
  const Matrix cov = sigma2 * fit.xtwx.ldlt().solve(Matrix::Identity(q, q));

  InteractionFit out;
  out.reduced = reduced;
  out.df_model = df_model;
  out.df_residual = df_res;
  boost::math::students_t tdist(static_cast<double>(df_res));
  auto add_row = [&](const std::string& name, Index j) {
    CoefficientRow row;
    row.name = name;
    row.estimate = fit.coef[j];
    row.std_error = std::sqrt(std::max(cov(j, j), 0.0));
    if (row.std_error > 0.0) {
      row.t_value = row.estimate / row.std_error;
      row.p_value = 2.0 * boost::math::cdf(boost::math::complement(tdist, std::abs(row.t_value)));
    } else {
      row.t_value = std::numeric_limits<double>::infinity();
      row.p_value = 0.0;
    }
    out.table.push_back(row);
  };
  add_row("Intercept", 0);
  for (Index j = 0; j < k; ++j) add_row("FPC" + std::to_string(basis_ids[j] + 1), 1 + j);
  if (!reduced) {
    add_row("group", k + 1);
    for (Index j = 0; j < k; ++j) {
      add_row("FPC" + std::to_string(basis_ids[j] + 1) + "xgroup", k + 2 + j);
    }
  }
  if (sse > 0.0) {
    out.f_statistic = (ssr / static_cast<double>(df_model)) / sigma2;
    boost::math::fisher_f fdist(static_cast<double>(df_model), static_cast<double>(df_res));
    out.f_p_value = boost::math::cdf(boost::math::complement(fdist, out.f_statistic));
  } else {
    out.f_statistic = std::numeric_limits<double>::infinity();
    out.f_p_value = 0.0;
  }

  const bool weighted = weights.size() != 0;
  out.base = make_effect(model, basis_ids, fit.coef.segment(1, k), fit.coef[0], weighted);
  if (reduced) {
    out.difference = make_effect(model, basis_ids, Vector::Zero(k), 0.0, weighted);
  } else {
    out.difference =
        make_effect(model, basis_ids, fit.coef.tail(k), fit.coef[k + 1], weighted);
  }
  out.group1 = make_effect(model, basis_ids, out.base.coefficients + out.difference.coefficients,
                           out.base.intercept + out.difference.intercept, weighted);
  return out;
}

double sorted_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw InsufficientDataError("quantile of an empty sample");
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

Bands bootstrap_bands(const ResampledEstimator& estimator, Index n, int replicates, double level,
                      std::uint64_t seed) {
  if (replicates < 100) throw DataError("bootstrap needs at least 100 replicates");
  if (!(level > 0.0 && level < 1.0)) throw DataError("bootstrap level must lie in (0, 1)");
  if (n < 2) throw InsufficientDataError("bootstrap needs at least two subjects");

  std::vector<std::optional<Vector>> draws(static_cast<std::size_t>(replicates));
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < replicates; ++b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), 0x62u};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (auto& v : idx) v = pick(rng);
    try {
      draws[static_cast<std::size_t>(b)] = estimator(idx);
    } catch (const SolverError&) {
    } catch (const DataError&) {
    }
  }

  Bands bands;
  std::vector<const Vector*> ok;
  for (const auto& d : draws) {
    if (d) ok.push_back(&*d);
  }
  bands.replicates = static_cast<int>(ok.size());
  bands.failures = replicates - bands.replicates;
  if (5 * bands.failures > replicates) {
    throw SolverError("bootstrap: " + std::to_string(bands.failures) + " of " +
                      std::to_string(replicates) + " replicates failed");
  }
  const Index len = ok.front()->size();
  bands.lower.resize(len);
  bands.upper.resize(len);
  std::vector<double> col(ok.size());
  for (Index j = 0; j < len; ++j) {
    for (std::size_t b = 0; b < ok.size(); ++b) col[b] = (*ok[b])[j];
    std::sort(col.begin(), col.end());
    bands.lower[j] = sorted_quantile(col, (1.0 - level) / 2.0);
    bands.upper[j] = sorted_quantile(col, (1.0 + level) / 2.0);
  }
  return bands;
}

}  // namespace sfps
