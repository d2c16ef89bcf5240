#pragma once

#include <Eigen/Dense>

namespace sfps {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using VectorRef = Eigen::Ref<const Vector>;
using MatrixRef = Eigen::Ref<const Matrix>;

/// Ordered evaluation points on [0, 1] with nonnegative quadrature weights.
///
/// Weights sum to the covered length (last - first). The single-argument
/// constructor uses the trapezoidal rule.
class Grid {
 public:
  explicit Grid(Vector points);
  Grid(Vector points, Vector quad_weights);

  /// m equispaced points from lo to hi inclusive.
  static Grid uniform(Index m, double lo = 0.0, double hi = 1.0);

  const Vector& points() const noexcept { return points_; }
  const Vector& weights() const noexcept { return weights_; }
  Index size() const noexcept { return points_.size(); }

  bool operator==(const Grid& other) const;

 private:
  Vector points_;
  Vector weights_;
};

Vector trapezoid_weights(const Vector& points);

/// n curves on a shared grid; row i of values() is curve i.
class FunctionalSample {
 public:
  FunctionalSample(Grid grid, Matrix values);

  const Grid& grid() const noexcept { return grid_; }
  const Matrix& values() const noexcept { return values_; }
  Index size() const noexcept { return values_.rows(); }

 private:
  Grid grid_;
  Matrix values_;
};

/// Quadrature approximation of the L2 inner product on the grid.
double inner_product(const VectorRef& f, const VectorRef& g, const Grid& grid);

struct CenteredSample {
  FunctionalSample sample;
  Vector mean;
};

/// Subtracts the pointwise sample mean. Requires at least two curves.
CenteredSample center(const FunctionalSample& sample);

}  // namespace sfps
