#pragma once

#include "sfps/fdata.hpp"

namespace sfps {

/// Sample functional principal components of a FunctionalSample.
///
/// Eigenfunctions are rows of `eigenfunctions` and are orthonormal in the
/// grid's quadrature inner product. `scores(i, k)` is the quadrature inner
/// product of curve i (minus `mean`) with eigenfunction k, and `eigenvalues(k)`
/// equals the mean of `scores.col(k)` squared. `pve(k)` is the cumulative share
/// of the first k + 1 eigenvalues.
struct FpcaModel {
  Grid grid;
  Vector mean;
  Matrix eigenfunctions;
  Vector eigenvalues;
  Matrix scores;
  Vector pve;

  Index components() const noexcept { return eigenvalues.size(); }
};

/// Relative eigenvalue floor; components below floor * lambda_1 are dropped.
inline constexpr double kEigenvalueFloor = 1e-10;

FpcaModel decompose(const FunctionalSample& sample);

/// Scores of arbitrary curves on the model's eigenfunctions, after removing
/// the model mean. Columns follow the model's component order.
Matrix project(const FpcaModel& model, const FunctionalSample& sample);

Vector cumulative_pve(const Vector& eigenvalues);

/// Smallest L with cumulative PVE at L >= threshold.
Index select_rank(const Vector& cumulative_pve, double threshold);
Index select_rank(const FpcaModel& model, double threshold);

/// Standardized treatment scores and whitened covariates.
///
/// a_star(i, k) = scores(i, k) / sqrt(lambda_k); c_star = (C - mean) * G^{-1/2}
/// where G is the second-moment matrix of the centered covariates.
struct StandardizedDesign {
  Matrix a_star;
  Matrix c_star;
  Matrix gamma_c_half_inv;
  Vector covariate_mean;

  Index n() const noexcept { return a_star.rows(); }
  Index rank() const noexcept { return a_star.cols(); }
  Index covariates() const noexcept { return c_star.cols(); }
};

/// Condition-number limit for the covariate second-moment matrix.
inline constexpr double kMaxCovariateCondition = 1e12;

StandardizedDesign standardize(const FpcaModel& model, Index rank, const Matrix& covariates);

/// Whitens covariates as in standardize(); exposed for callers that already
/// have standardized scores.
StandardizedDesign make_design(Matrix a_star, const Matrix& covariates);

}  // namespace sfps
