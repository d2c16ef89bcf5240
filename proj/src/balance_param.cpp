#include "sfps/balance_param.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "sfps/errors.hpp"

namespace sfps {

double log_weight_formula(const VectorRef& a_star, const VectorRef& c_star,
                          const MatrixRef& beta, const MatrixRef& sigma) {
  const Index L = a_star.size();
  if (beta.rows() != c_star.size() || beta.cols() != L || sigma.rows() != L ||
      sigma.cols() != L) {
    throw DimensionError("weight_formula: nonconformable beta/sigma");
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("weight_formula: sigma is not positive definite");
  }
  const Vector r = a_star - beta.transpose() * c_star;
  const Vector z = llt.matrixL().solve(r);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return 0.5 * log_det + 0.5 * z.squaredNorm() - 0.5 * a_star.squaredNorm();
}

double weight_formula(const VectorRef& a_star, const VectorRef& c_star, const MatrixRef& beta,
                      const MatrixRef& sigma) {
  return std::exp(log_weight_formula(a_star, c_star, beta, sigma));
}

namespace {

Index tri_size(Index L) { return L * (L + 1) / 2; }

// Column-major lower triangle, matching the residual ordering.
Vector vech(const Matrix& m) {
  const Index L = m.rows();
  Vector out(tri_size(L));
  Index k = 0;
  for (Index j = 0; j < L; ++j)
    for (Index i = j; i < L; ++i) out[k++] = m(i, j);
  return out;
}

Matrix unvech(const VectorRef& v, Index L) {
  Matrix m(L, L);
  Index k = 0;
  for (Index j = 0; j < L; ++j)
    for (Index i = j; i < L; ++i) {
      m(i, j) = v[k];
      m(j, i) = v[k];
      ++k;
    }
  return m;
}

class MomSystem {
 public:
  explicit MomSystem(const StandardizedDesign& d)
      : a_(d.a_star), c_(d.c_star), n_(d.n()), L_(d.rank()), p_(d.covariates()) {
    a_sq_ = a_.rowwise().squaredNorm();
  }

  Index unknowns() const { return p_ * L_ + tri_size(L_); }

  Vector pack(const Matrix& beta, const Matrix& sigma) const {
    Vector x(unknowns());
    x.head(p_ * L_) = Eigen::Map<const Vector>(beta.data(), p_ * L_);
    x.tail(tri_size(L_)) = vech(sigma);
    return x;
  }

  Matrix beta(const Vector& x) const { return Eigen::Map<const Matrix>(x.data(), p_, L_); }
  Matrix sigma(const Vector& x) const { return unvech(x.tail(tri_size(L_)), L_); }

  // Log-weights for all subjects, or nullopt if sigma is not PD.
  std::optional<Vector> log_weights(const Matrix& beta, const Matrix& sigma) const {
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Matrix diagL = llt.matrixL();
    if ((diagL.diagonal().array() <= 0.0).any()) return std::nullopt;
    const double log_det = 2.0 * diagL.diagonal().array().log().sum();
    const Matrix r = a_ - c_ * beta;
    // z = L^{-1} r^T, column per subject
    const Matrix z = llt.matrixL().solve(r.transpose());
    Vector lw = 0.5 * log_det + 0.5 * z.colwise().squaredNorm().transpose().array() -
                0.5 * a_sq_.array();
    return lw;
  }

  // Returns nullopt when sigma is not PD or a weight overflows.
  std::optional<Vector> residual(const Vector& x) const {
    const Matrix b = beta(x);
    const Matrix s = sigma(x);
    auto lw = log_weights(b, s);
    if (!lw) return std::nullopt;
    const Vector w = lw->array().exp();
    if (!w.allFinite()) return std::nullopt;
    const Matrix r = a_ - c_ * b;
    const Matrix cov = (r.transpose() * r) / static_cast<double>(n_) - s;
    const Matrix cross = a_.transpose() * w.asDiagonal() * c_ / static_cast<double>(n_);
    Vector f(unknowns());
    f.head(tri_size(L_)) = vech(cov);
    f.tail(L_ * p_) = Eigen::Map<const Vector>(cross.data(), L_ * p_);
    return f;
  }

  std::optional<Matrix> jacobian(const Vector& x) const {
    const Index d = unknowns();
    Matrix jac(d, d);
    for (Index j = 0; j < d; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      auto fp = residual(xp);
      auto fm = residual(xm);
      if (!fp || !fm) return std::nullopt;
      jac.col(j) = (*fp - *fm) / (2.0 * h);
    }
    return jac;
  }

 private:
  const Matrix& a_;
  const Matrix& c_;
  Index n_, L_, p_;
  Vector a_sq_;
};

double rms(const Vector& f) { return f.norm() / std::sqrt(static_cast<double>(f.size())); }

// Levenberg-Marquardt on 0.5 ||F||^2 from x. Returns false if the iteration
// budget runs out before the residual norm stops decreasing.
bool least_squares(const MomSystem& sys, Vector& x, Vector& f, int max_iterations,
                   double tolerance, int& iterations) {
  double lambda = 1e-3;
  const Index d = x.size();
  for (int it = 0; it < max_iterations; ++it) {
    if (rms(f) <= tolerance) return true;
    auto jac = sys.jacobian(x);
    if (!jac) return false;
    ++iterations;
    const Matrix jtj = jac->transpose() * *jac;
    const Vector g = jac->transpose() * f;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, f.squaredNorm())) return true;
    const double fsq = f.squaredNorm();
    bool accepted = false;
    while (lambda < 1e16) {
      Matrix a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vector step = a.ldlt().solve(-g);
      const Vector cand = x + step;
      auto fc = sys.residual(cand);
      if (fc && fc->squaredNorm() < fsq) {
        const double gain = fsq - fc->squaredNorm();
        const bool small_step = step.norm() <= 1e-12 * (1.0 + x.norm());
        x = cand;
        f = std::move(*fc);
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (small_step || gain <= 1e-10 * fsq) return true;
        break;
      }
      lambda *= 4.0;
    }
    // No decrease at any damping: x is stationary for the residual norm.
    if (!accepted) return true;
  }
  (void)d;
  return false;
}

}  // namespace

Vector moment_residual(const StandardizedDesign& design, const Matrix& beta, const Matrix& sigma) {
  MomSystem sys(design);
  auto f = sys.residual(sys.pack(beta, sigma));
  if (!f) throw NotPositiveDefiniteError("moment_residual: sigma not PD or weights overflow");
  return *f;
}

ParamFit solve_mom(const StandardizedDesign& design, const MomOptions& options) {
  const Index n = design.n(), L = design.rank(), p = design.covariates();
  if (n <= p + L) {
    throw InsufficientDataError("parametric balancing needs n > p + L (n=" + std::to_string(n) +
                                ", p=" + std::to_string(p) + ", L=" + std::to_string(L) + ")");
  }
  if (!design.a_star.allFinite() || !design.c_star.allFinite()) {
    throw DataError("parametric balancing: design is not finite");
  }
  MomSystem sys(design);

  ParamFit fit;
  fit.beta = design.c_star.colPivHouseholderQr().solve(design.a_star);
  const Matrix r0 = design.a_star - design.c_star * fit.beta;
  fit.sigma = (r0.transpose() * r0) / static_cast<double>(n);
  fit.sigma = 0.5 * (fit.sigma + fit.sigma.transpose()).eval();
  {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(fit.sigma);
    const double top = eig.eigenvalues().maxCoeff();
    const double floor = 1e-8 * std::max(top, 1e-300);
    if (eig.eigenvalues().minCoeff() <= floor) {
      Vector ev = eig.eigenvalues().cwiseMax(floor);
      fit.sigma = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
      fit.pd_projected = true;
    }
  }

  Vector x = sys.pack(fit.beta, fit.sigma);
  auto f = sys.residual(x);
  if (!f) {
    throw ConvergenceError("parametric balancing: weights overflow at the OLS start",
                           std::numeric_limits<double>::infinity());
  }
  double best = rms(*f);
  int it = 0;
  std::string failure;
  while (best > options.tolerance) {
    if (it >= options.max_iterations) {
      failure = "parametric balancing did not converge in " +
                std::to_string(options.max_iterations) + " iterations";
      break;
    }
    ++it;
    auto jac = sys.jacobian(x);
    if (!jac) {
      failure = "parametric balancing: Jacobian evaluation left the PD cone";
      break;
    }
    const Vector step = jac->colPivHouseholderQr().solve(-*f);
    if (!step.allFinite()) {
      failure = "parametric balancing: singular Jacobian";
      break;
    }
    const double fnorm = f->norm();
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 50; ++halving, t *= 0.5) {
      const Vector cand = x + t * step;
      auto fc = sys.residual(cand);
      if (fc && fc->norm() <= (1.0 - 1e-4 * t) * fnorm) {
        x = cand;
        f = std::move(fc);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      failure = "parametric balancing: step halving failed";
      break;
    }
    best = rms(*f);
  }
  if (failure.empty() && it > 0) {
    // One more Newton step from the accepted root, kept only if it helps.
    if (auto jac = sys.jacobian(x)) {
      const Vector step = jac->colPivHouseholderQr().solve(-*f);
      if (step.allFinite()) {
        const Vector cand = x + step;
        auto fc = sys.residual(cand);
        if (fc && fc->norm() < f->norm()) {
          x = cand;
          f = std::move(fc);
          best = rms(*f);
        }
      }
    }
  }
  if (!failure.empty()) {
    if (!options.least_squares_fallback) {
      throw ConvergenceError(failure + " (RMS residual " + std::to_string(best) + ")", best);
    }
    int lm_iterations = 0;
    const bool ok =
        least_squares(sys, x, *f, 5 * options.max_iterations, options.tolerance, lm_iterations);
    it += lm_iterations;
    best = rms(*f);
    if (!ok) {
      throw ConvergenceError("parametric balancing: least-squares fallback did not settle (RMS "
                             "residual " + std::to_string(best) + ")",
                             best);
    }
    fit.exact_root = best <= options.tolerance;
  }

  fit.beta = sys.beta(x);
  fit.sigma = sys.sigma(x);
  fit.moment_residual_norm = best;
  fit.iterations = it;
  return fit;
}

BalanceWeights estimate_weights_param(const StandardizedDesign& design,
                                      const MomOptions& options) {
  ParamFit fit = solve_mom(design, options);
  Vector w(design.n());
  for (Index i = 0; i < design.n(); ++i) {
    w[i] = weight_formula(design.a_star.row(i).transpose(), design.c_star.row(i).transpose(),
                          fit.beta, fit.sigma);
  }
  BalanceWeights out;
  out.residuals = constraint_residuals(design, w);
  out.weights = std::move(w);
  out.method = BalanceMethod::kParametric;
  out.param = std::move(fit);
  return out;
}

}  // namespace sfps
