#include "sfps/balance_np.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "sfps/errors.hpp"

namespace sfps {

namespace {

constexpr double kFeasibilityMargin = 1e-10;
constexpr double kRescaleThreshold = 1e-8;

}  // namespace

Vector moment_vector(const VectorRef& a_star, const VectorRef& c_star, double theta,
                     const MatrixRef& gamma0, double scale) {
  const Index L = a_star.size(), p = c_star.size();
  if (gamma0.rows() != L || gamma0.cols() != p) {
    throw DimensionError("moment_vector: Gamma_0 must be L x p");
  }
  Vector h(L + p + L * p);
  h.head(L) = a_star;
  h.segment(L, p) = c_star;
  const Matrix cross = a_star * c_star.transpose() - (scale * theta) * gamma0;
  h.tail(L * p) = Eigen::Map<const Vector>(cross.data(), L * p);
  return h;
}

ElProblem::ElProblem(StandardizedDesign design, const ElOptions& options)
    : design_(std::move(design)), options_(options) {
  const Index n = design_.n(), L = design_.rank(), p = design_.covariates();
  if (n < 2) throw InsufficientDataError("empirical-likelihood balancing needs n >= 2");
  rho_ = options_.rho > 0.0 ? options_.rho : 0.1 / static_cast<double>(n);
  if (options_.grid_points < 3) throw DataError("theta grid needs at least three points");
  gamma0_ = unweighted_cross_moment(design_);

  base_.resize(n, L + p + L * p);
  base_.leftCols(L) = design_.a_star;
  base_.middleCols(L, p) = design_.c_star;
  for (Index j = 0; j < p; ++j)
    for (Index l = 0; l < L; ++l)
      base_.col(L + p + j * L + l) = design_.a_star.col(l).cwiseProduct(design_.c_star.col(j));

  const Index g = options_.grid_points;
  theta_grid_.resize(static_cast<std::size_t>(g));
  for (Index k = 0; k < g; ++k) {
    theta_grid_[static_cast<std::size_t>(k)] =
        -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(g - 1);
  }
  if (g % 2 == 1) theta_grid_[static_cast<std::size_t>(g / 2)] = 0.0;
  theta_grid_.back() = 1.0;
  if (g % 2 == 0) {
    theta_grid_.push_back(0.0);
    std::sort(theta_grid_.begin(), theta_grid_.end());
  }
}

double ElProblem::gamma0_scale() const noexcept {
  return options_.hvec_literal ? static_cast<double>(design_.n()) : 1.0;
}

Index ElProblem::dual_dimension() const noexcept { return base_.cols(); }

Matrix ElProblem::moment_matrix(double theta) const {
  const Index L = design_.rank(), p = design_.covariates();
  Matrix h = base_;
  const Eigen::Map<const Eigen::RowVectorXd> g0(gamma0_.data(), L * p);
  h.rightCols(L * p).rowwise() -= (gamma0_scale() * theta) * g0;
  return h;
}

double ElProblem::penalty(double theta) const {
  return theta * theta / (2.0 * rho_) * gamma0_.squaredNorm();
}

namespace {

// Pseudo-inverse of the exact Hessian H^T diag(1 / s^2) H of -sum log s_i.
Matrix inverse_hessian(const Matrix& h, const Vector& slack) {
  const Matrix hs = slack.cwiseInverse().asDiagonal() * h;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hs.transpose() * hs);
  const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  if (!(top > 0.0)) return Matrix::Identity(h.cols(), h.cols());
  const Vector ev = eig.eigenvalues().cwiseMax(1e-12 * top).cwiseInverse();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

InnerSolution inner_solve(const ElProblem& problem, double theta, const Vector* start) {
  if (!(theta >= -1.0 && theta <= 1.0)) throw DataError("inner_solve: theta outside [-1, 1]");
  const Matrix h = problem.moment_matrix(theta);
  const Index n = h.rows(), d = h.cols();

  // Minimize g(gamma) = -sum log(1 - h_i^T gamma).
  auto objective = [&h](const Vector& gamma, double& value, Vector& grad) {
    const Vector slack = Vector::Ones(h.rows()) - h * gamma;
    if (!(slack.minCoeff() > kFeasibilityMargin)) return false;
    value = -slack.array().log().sum();
    grad = h.transpose() * slack.cwiseInverse();
    return true;
  };

  Vector x = Vector::Zero(d);
  if (start != nullptr && start->size() == d &&
      (Vector::Ones(n) - h * *start).minCoeff() > 0.5) {
    x = *start;
  }

  BfgsOptions opts = problem.options().inner;
  // The dual value equals -sum log w_i; beyond this bound some weight
  // ratio exceeds e^50 and the constraint set is treated as empty.
  opts.lower_bound = -50.0 * static_cast<double>(n);
  const int budget = opts.max_iterations;
  opts.max_iterations = std::max(1, std::min(budget, 4 * static_cast<int>(d)));

  int used = 0;
  BfgsResult r;
  for (int restart = 0;; ++restart) {
    r = minimize_bfgs(objective, x, inverse_hessian(h, Vector::Ones(n) - h * x), opts);
    used += r.iterations;
    if (r.status == BfgsStatus::kConverged || r.status == BfgsStatus::kUnbounded) break;
    // A restart that cannot move means the stall is not a Hessian problem.
    const bool stuck = r.iterations == 0 || (r.x - x).norm() <= 1e-15 * (1.0 + x.norm());
    if (stuck || used >= budget) break;
    x = r.x;
  }
  r.iterations = used;
  switch (r.status) {
    case BfgsStatus::kConverged:
      break;
    case BfgsStatus::kUnbounded:
      throw InfeasibleError("empirical-likelihood dual unbounded at theta = " +
                            std::to_string(theta));
    case BfgsStatus::kLineSearchFailed:
      throw InfeasibleError("line search could not keep 1 - gamma^T h_i > 0 at theta = " +
                            std::to_string(theta));
    case BfgsStatus::kMaxIterations:
      throw ConvergenceError("inner BFGS did not converge at theta = " + std::to_string(theta),
                             r.gradient.norm());
  }
  return InnerSolution{std::move(r.x), -r.value, r.gradient.norm(), r.iterations};
}

double profile_objective(const ElProblem& problem, double theta, double inner_objective) {
  const double pen = problem.penalty(theta);
  return problem.options().printed_outer_sign ? inner_objective - pen : -inner_objective - pen;
}

namespace {

struct ThetaEval {
  double theta = 0.0;
  std::optional<InnerSolution> inner;
  double profile = -std::numeric_limits<double>::infinity();
};

ThetaEval evaluate(const ElProblem& problem, double theta, const Vector* start) {
  ThetaEval e;
  e.theta = theta;
  try {
    e.inner = inner_solve(problem, theta, start);
    e.profile = profile_objective(problem, theta, e.inner->objective);
  } catch (const SolverError&) {
    e.inner.reset();
  }
  return e;
}

bool better(const ThetaEval& cand, const ThetaEval& best) {
  if (!cand.inner) return false;
  if (!best.inner) return true;
  const double tol = 1e-12 * std::max(1.0, std::abs(best.profile));
  if (cand.profile > best.profile + tol) return true;
  if (cand.profile < best.profile - tol) return false;
  // Ties go to smaller |theta|, then smaller theta.
  if (std::abs(cand.theta) != std::abs(best.theta)) {
    return std::abs(cand.theta) < std::abs(best.theta);
  }
  return cand.theta < best.theta;
}

}  // namespace

ElSolution estimate_weights_np(const ElProblem& problem) {
  const std::vector<double>& grid = problem.theta_grid();
  const auto g = static_cast<std::ptrdiff_t>(grid.size());
  std::vector<ThetaEval> evals(grid.size());

  // Sweep down from theta = 1, where gamma = 0 is exact, warm-starting each
  // point from the last feasible solution.
  const Vector* warm = nullptr;
  for (std::ptrdiff_t k = g - 1; k >= 0; --k) {
    auto& e = evals[static_cast<std::size_t>(k)];
    e = evaluate(problem, grid[static_cast<std::size_t>(k)], warm);
    if (e.inner) warm = &e.inner->gamma;
  }

  ElSolution sol;
  std::size_t best_idx = 0;
  bool any = false;
  for (std::size_t k = 0; k < evals.size(); ++k) {
    if (!evals[k].inner) {
      sol.infeasible_thetas.push_back(evals[k].theta);
      continue;
    }
    if (!any || better(evals[k], evals[best_idx])) {
      best_idx = k;
      any = true;
    }
  }
  if (!any) {
    throw InfeasibleError(
        "empirical-likelihood balancing infeasible at every theta grid point; try a larger rho");
  }
  ThetaEval best = evals[best_idx];

  if (problem.options().refine) {
    // Golden-section search on the bracket formed by the neighbouring grid points.
    double lo = grid[best_idx > 0 ? best_idx - 1 : 0];
    double hi = grid[std::min(best_idx + 1, grid.size() - 1)];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    ThetaEval x1 = evaluate(problem, hi - inv_phi * (hi - lo), &best.inner->gamma);
    ThetaEval x2 = evaluate(problem, lo + inv_phi * (hi - lo), &best.inner->gamma);
    ThetaEval refined = better(x1, x2) ? x1 : x2;
    for (int it = 0; it < 40 && hi - lo > 1e-9; ++it) {
      if (x1.profile >= x2.profile) {
        hi = x2.theta;
        x2 = std::move(x1);
        x1 = evaluate(problem, hi - inv_phi * (hi - lo), &best.inner->gamma);
        if (better(x1, refined)) refined = x1;
      } else {
        lo = x1.theta;
        x1 = std::move(x2);
        x2 = evaluate(problem, lo + inv_phi * (hi - lo), &best.inner->gamma);
        if (better(x2, refined)) refined = x2;
      }
    }
    if (refined.inner) {
      const double tol = 1e-12 * std::max(1.0, std::abs(best.profile));
      if (refined.profile > best.profile + tol) best = std::move(refined);
    }
  }

  const Matrix h = problem.moment_matrix(best.theta);
  sol.theta_hat = best.theta;
  sol.gamma_hat = best.inner->gamma;
  sol.inner_objective = best.inner->objective;
  sol.profile_objective = best.profile;
  sol.weights = (Vector::Ones(h.rows()) - h * sol.gamma_hat).cwiseInverse();
  const double n = static_cast<double>(h.rows());
  if (std::abs(sol.weights.sum() - n) > kRescaleThreshold) {
    sol.weights *= n / sol.weights.sum();
    sol.rescaled = true;
  }
  sol.residuals = constraint_residuals(problem.design(), sol.weights);
  return sol;
}

BalanceWeights estimate_weights_np(const StandardizedDesign& design, const ElOptions& options) {
  ElProblem problem(design, options);
  ElSolution sol = estimate_weights_np(problem);
  BalanceWeights out;
  out.weights = std::move(sol.weights);
  out.method = BalanceMethod::kNonparametric;
  out.residuals = std::move(sol.residuals);
  NonparamDiagnostics diag;
  diag.theta_hat = sol.theta_hat;
  diag.gamma_hat = std::move(sol.gamma_hat);
  diag.inner_objective = sol.inner_objective;
  diag.profile_objective = sol.profile_objective;
  diag.infeasible_thetas = std::move(sol.infeasible_thetas);
  diag.rescaled = sol.rescaled;
  out.nonparam = std::move(diag);
  return out;
}

}  // namespace sfps
