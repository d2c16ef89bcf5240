#include "sfps/fpca.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <string>

#include "sfps/errors.hpp"

namespace sfps {

namespace {

// Flip so the entry of largest magnitude is positive (first index on ties).
void fix_sign(Eigen::Ref<Vector> v) {
  Index arg = 0;
  double best = -1.0;
  for (Index j = 0; j < v.size(); ++j) {
    if (std::abs(v[j]) > best) {
      best = std::abs(v[j]);
      arg = j;
    }
  }
  if (v[arg] < 0.0) v = -v;
}

}  // namespace

FpcaModel decompose(const FunctionalSample& sample) {
  const Index n = sample.size();
  if (n < 2) throw InsufficientDataError("FPCA needs at least two curves");
  const Grid& grid = sample.grid();
  const Vector& w = grid.weights();
  if ((w.array() <= 0.0).any()) {
    throw DegenerateGridError("FPCA needs strictly positive quadrature weights");
  }

  auto [centered, mean] = center(sample);
  const Matrix& xc = centered.values();
  const Vector sqrt_w = w.array().sqrt();

  // Symmetrized operator W^{1/2} S W^{1/2}; its eigenvectors map back to
  // quadrature-orthonormal eigenfunctions via W^{-1/2}.
  const Matrix xw = xc * sqrt_w.asDiagonal();
  Matrix op = (xw.transpose() * xw) / static_cast<double>(n);
  op = 0.5 * (op + op.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(op);
  if (eig.info() != Eigen::Success) throw SolverError("FPCA eigendecomposition failed");

  const Index m = grid.size();
  const Vector& evals = eig.eigenvalues();
  const double top = evals[m - 1];
  // Variation at rounding level of the raw curves counts as none.
  const double raw_scale =
      (sample.values().array().square().matrix() * w).sum() / static_cast<double>(n);
  Index kept = 0;
  if (top > 1e-20 * raw_scale) {
    while (kept < m && evals[m - 1 - kept] >= kEigenvalueFloor * top) ++kept;
  }

  Matrix phi(kept, m);
  Vector lambda(kept);
  for (Index k = 0; k < kept; ++k) {
    Vector u = eig.eigenvectors().col(m - 1 - k);
    Vector f = u.array() / sqrt_w.array();
    fix_sign(f);
    phi.row(k) = f.transpose();
    lambda[k] = evals[m - 1 - k];
  }

  Matrix scores = xc * w.asDiagonal() * phi.transpose();
  Vector pve = cumulative_pve(lambda);
  return FpcaModel{grid, std::move(mean), std::move(phi), std::move(lambda), std::move(scores),
                   std::move(pve)};
}

Matrix project(const FpcaModel& model, const FunctionalSample& sample) {
  if (!(sample.grid() == model.grid)) {
    throw DimensionError("project: sample grid differs from the model grid");
  }
  const Matrix xc = sample.values().rowwise() - model.mean.transpose();
  return xc * model.grid.weights().asDiagonal() * model.eigenfunctions.transpose();
}

Vector cumulative_pve(const Vector& eigenvalues) {
  Vector pve(eigenvalues.size());
  double total = 0.0;
  for (Index k = 0; k < eigenvalues.size(); ++k) total += eigenvalues[k];
  double run = 0.0;
  for (Index k = 0; k < eigenvalues.size(); ++k) {
    run += eigenvalues[k];
    pve[k] = run / total;
  }
  return pve;
}

Index select_rank(const Vector& cumulative_pve, double threshold) {
  if (cumulative_pve.size() == 0) throw InsufficientDataError("select_rank: empty model");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw DataError("select_rank: threshold must lie in (0, 1]");
  }
  for (Index k = 0; k < cumulative_pve.size(); ++k) {
    if (cumulative_pve[k] >= threshold) return k + 1;
  }
  return cumulative_pve.size();
}

Index select_rank(const FpcaModel& model, double threshold) {
  return select_rank(model.pve, threshold);
}

StandardizedDesign make_design(Matrix a_star, const Matrix& covariates) {
  const Index n = a_star.rows();
  if (covariates.rows() != n) {
    throw DimensionError("covariates have " + std::to_string(covariates.rows()) +
                         " rows, expected " + std::to_string(n));
  }
  if (covariates.cols() < 1) throw DimensionError("at least one covariate is required");
  if (!covariates.allFinite()) throw DataError("covariates must be finite");

  Vector mean = covariates.colwise().mean().transpose();
  const Matrix cc = covariates.rowwise() - mean.transpose();
  Matrix gamma = (cc.transpose() * cc) / static_cast<double>(n);
  gamma = 0.5 * (gamma + gamma.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma);
  const Vector& ev = eig.eigenvalues();
  const double largest = ev[ev.size() - 1];
  const double smallest = ev[0];
  if (!(largest > 0.0) || !(smallest > largest / kMaxCovariateCondition)) {
    std::ostringstream msg;
    msg << "covariate second-moment matrix is singular: eigenvalue " << smallest
        << " against largest " << largest;
    throw SingularCovariateError(msg.str(), smallest);
  }
  const Matrix& v = eig.eigenvectors();
  Matrix half_inv = v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  half_inv = 0.5 * (half_inv + half_inv.transpose()).eval();

  Matrix c_star = cc * half_inv;
  return StandardizedDesign{std::move(a_star), std::move(c_star), std::move(half_inv),
                            std::move(mean)};
}

StandardizedDesign standardize(const FpcaModel& model, Index rank, const Matrix& covariates) {
  if (rank < 1 || rank > model.components()) {
    throw DimensionError("standardize: rank " + std::to_string(rank) + " outside [1, " +
                         std::to_string(model.components()) + "]");
  }
  Matrix a_star = model.scores.leftCols(rank) *
                  model.eigenvalues.head(rank).cwiseSqrt().cwiseInverse().asDiagonal();
  return make_design(std::move(a_star), covariates);
}

}  // namespace sfps
