#include "sfps/fdata.hpp"

#include <cmath>
#include <string>

#include "sfps/errors.hpp"

namespace sfps {

Vector trapezoid_weights(const Vector& points) {
  const Index m = points.size();
  Vector w = Vector::Zero(m);
  for (Index j = 0; j + 1 < m; ++j) {
    const double h = points[j + 1] - points[j];
    w[j] += 0.5 * h;
    w[j + 1] += 0.5 * h;
  }
  return w;
}

namespace {

void check_points(const Vector& points) {
  if (points.size() < 2) {
    throw DegenerateGridError("grid needs at least two points");
  }
  if (!points.allFinite()) {
    throw DegenerateGridError("grid points must be finite");
  }
  if (points[0] < 0.0 || points[points.size() - 1] > 1.0) {
    throw DegenerateGridError("grid points must lie in [0, 1]");
  }
  for (Index j = 0; j + 1 < points.size(); ++j) {
    if (!(points[j + 1] > points[j])) {
      throw DegenerateGridError("grid points must be strictly increasing (index " +
                                std::to_string(j + 1) + ")");
    }
  }
}

}  // namespace

Grid::Grid(Vector points) : points_(std::move(points)) {
  check_points(points_);
  weights_ = trapezoid_weights(points_);
}

Grid::Grid(Vector points, Vector quad_weights)
    : points_(std::move(points)), weights_(std::move(quad_weights)) {
  check_points(points_);
  if (weights_.size() != points_.size()) {
    throw DimensionError("quadrature weights length " + std::to_string(weights_.size()) +
                         " does not match grid length " + std::to_string(points_.size()));
  }
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw DegenerateGridError("quadrature weights must be finite and nonnegative");
  }
  const double span = points_[points_.size() - 1] - points_[0];
  if (std::abs(weights_.sum() - span) > 1e-9 * std::max(1.0, span)) {
    throw DegenerateGridError("quadrature weights must sum to the grid span");
  }
}

Grid Grid::uniform(Index m, double lo, double hi) {
  if (m < 2) throw DegenerateGridError("uniform grid needs at least two points");
  Vector p(m);
  for (Index j = 0; j < m; ++j) {
    p[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(m - 1);
  }
  p[m - 1] = hi;
  return Grid(std::move(p));
}

bool Grid::operator==(const Grid& other) const {
  return points_.size() == other.points_.size() && points_ == other.points_ &&
         weights_ == other.weights_;
}

FunctionalSample::FunctionalSample(Grid grid, Matrix values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.cols() != grid_.size()) {
    throw DimensionError("curve length " + std::to_string(values_.cols()) +
                         " does not match grid length " + std::to_string(grid_.size()));
  }
  if (!values_.allFinite()) {
    throw DataError("curve values must be finite");
  }
}

double inner_product(const VectorRef& f, const VectorRef& g, const Grid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size()) {
    throw DimensionError("inner_product: vectors of length " + std::to_string(f.size()) +
                         " and " + std::to_string(g.size()) + " on a grid of length " +
                         std::to_string(grid.size()));
  }
  return (grid.weights().array() * f.array() * g.array()).sum();
}

CenteredSample center(const FunctionalSample& sample) {
  if (sample.size() < 2) {
    throw InsufficientDataError("centering needs at least two curves");
  }
  Vector mean = sample.values().colwise().mean().transpose();
  Matrix centered = sample.values().rowwise() - mean.transpose();
  return {FunctionalSample(sample.grid(), std::move(centered)), std::move(mean)};
}

}  // namespace sfps
