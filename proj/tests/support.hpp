#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sfps/fdata.hpp"
#include "sfps/fpca.hpp"

namespace sfps::test {

inline Vector on_grid(const Grid& grid, double (*f)(double)) {
  Vector v(grid.size());
  for (Index j = 0; j < grid.size(); ++j) v[j] = f(grid.points()[j]);
  return v;
}

inline double sin1(double t) { return std::sqrt(2.0) * std::sin(2.0 * std::numbers::pi * t); }
inline double cos1(double t) { return std::sqrt(2.0) * std::cos(2.0 * std::numbers::pi * t); }

inline Matrix normal_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

// Centered columns with identity second moment.
inline Matrix whiten(Matrix m) {
  m = (m.rowwise() - m.colwise().mean()).eval();
  const Matrix g = m.transpose() * m / static_cast<double>(m.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  return m * eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

// Classical overall F for a single regressor: R^2 / (1 - R^2) * (n - 2).
inline double simple_regression_f(const Vector& y, const Vector& x) {
  const double n = static_cast<double>(y.size());
  const double mx = x.mean(), my = y.mean();
  double sxy = 0, sxx = 0, syy = 0;
  for (Index i = 0; i < y.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  return r2 / (1.0 - r2) * (n - 2.0);
}

// Primal solve of max sum log w subject to k^T w = b (rows of k are the
// constraint functionals), by infeasible-start Newton on the KKT system.
inline Vector max_log_weights(const Matrix& k, const Vector& b, int max_iterations = 200) {
  const Index n = k.cols(), m = k.rows();
  Vector w = Vector::Ones(n);
  Vector nu = Vector::Zero(m);
  auto residual = [&](const Vector& ww, const Vector& vv) {
    Vector r(n + m);
    r.head(n) = -ww.cwiseInverse() + k.transpose() * vv;
    r.tail(m) = k * ww - b;
    return r;
  };
  for (int it = 0; it < max_iterations; ++it) {
    const Vector r = residual(w, nu);
    if (r.norm() < 1e-13) break;
    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = w.array().square().inverse().matrix().asDiagonal();
    kkt.topRightCorner(n, m) = k.transpose();
    kkt.bottomLeftCorner(m, n) = k;
    const Vector step = kkt.fullPivLu().solve(-r);
    double t = 1.0;
    while (((w + t * step.head(n)).array() <= 0.0).any()) t *= 0.5;
    while (residual(w + t * step.head(n), nu + t * step.tail(m)).norm() > (1 - 0.01 * t) * r.norm() &&
           t > 1e-12)
      t *= 0.5;
    w += t * step.head(n);
    nu += t * step.tail(m);
  }
  return w;
}

}  // namespace sfps::test

namespace sfps::test {

// Every root in [lo, hi] of the single-treatment, single-covariate parametric
// balance equation mean(w a c) = 0, with sigma^2 profiled out as mean(r^2).
inline std::vector<double> scalar_balance_roots(const Vector& a, const Vector& c, double lo = -3.0,
                                                double hi = 3.0) {
  const double n = static_cast<double>(a.size());
  auto g = [&](double beta) {
    const Vector r = a - beta * c;
    const double s2 = r.squaredNorm() / n;
    double sum = 0.0;
    for (Index i = 0; i < a.size(); ++i)
      sum += std::sqrt(s2) * std::exp(0.5 * r[i] * r[i] / s2 - 0.5 * a[i] * a[i]) * a[i] * c[i];
    return sum / n;
  };
  std::vector<double> roots;
  const int cells = 6000;
  double x0 = lo, g0 = g(lo);
  for (int k = 1; k <= cells; ++k) {
    const double x1 = lo + (hi - lo) * k / cells, g1 = g(x1);
    if (g0 == 0.0) roots.push_back(x0);
    else if (g0 * g1 < 0.0) {
      double l = x0, h = x1, gl = g0;
      for (int it = 0; it < 200 && h - l > 1e-15; ++it) {
        const double m = 0.5 * (l + h), gm = g(m);
        if (gm * gl > 0) l = m, gl = gm; else h = m;
      }
      roots.push_back(0.5 * (l + h));
    }
    x0 = x1;
    g0 = g1;
  }
  return roots;
}

}  // namespace sfps::test
