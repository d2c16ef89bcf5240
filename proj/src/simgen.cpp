#include "sfps/simgen.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <string>

#include "sfps/errors.hpp"

namespace sfps {

namespace {

enum Block : std::uint32_t { kScoresBlock = 0, kCovariateNoiseBlock = 1, kOutcomeNoiseBlock = 2 };

Matrix curves_from_scores(const Matrix& scores, const Matrix& phi) { return scores * phi; }

}  // namespace

double population_eigenfunction(Index k, double t) {
  const double freq = 2.0 * std::numbers::pi * static_cast<double>(k / 2 + 1);
  return std::numbers::sqrt2 * (k % 2 == 0 ? std::sin(freq * t) : std::cos(freq * t));
}

Matrix population_eigenfunctions(const Grid& grid, Index count) {
  Matrix phi(count, grid.size());
  for (Index k = 0; k < count; ++k)
    for (Index j = 0; j < grid.size(); ++j)
      phi(k, j) = population_eigenfunction(k, grid.points()[j]);
  return phi;
}

Vector true_effect(const Grid& grid) {
  const Matrix phi = population_eigenfunctions(grid, 4);
  Vector mu = Vector::Zero(grid.size());
  for (Index k = 0; k < 4; ++k) mu += kEffectCoefficients[k] * phi.row(k).transpose();
  return mu;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t run, std::uint64_t subject,
                          std::uint32_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run),     static_cast<std::uint32_t>(run >> 32),
                    static_cast<std::uint32_t>(subject), static_cast<std::uint32_t>(subject >> 32),
                    block};
  return std::mt19937_64(seq);
}

void validate(const SimConfig& config) {
  if (config.setting < 1 || config.setting > 4) {
    throw DataError("invalid simulation setting " + std::to_string(config.setting) +
                    " (expected 1-4)");
  }
  if (config.n < 2) throw DataError("simulation needs n >= 2");
  if (config.grid_size < 2) throw DataError("simulation grid needs at least two points");
  if (config.runs < 1) throw DataError("simulation needs at least one run");
}

SimDataset generate(const SimConfig& config, int run_index) {
  validate(config);
  const Index n = config.n;
  const Grid grid = Grid::uniform(config.grid_size);
  const Matrix phi = population_eigenfunctions(grid, 6);
  const bool nonlinear_scores = config.setting == 2 || config.setting == 4;
  const bool nonlinear_outcome = config.setting == 3 || config.setting == 4;
  const double w23_sd = config.sd_parameterization ? 0.5 : std::sqrt(0.5);
  const double e_sd = config.sd_parameterization ? 25.0 : 5.0;
  const auto run = static_cast<std::uint64_t>(run_index);

  Matrix scores(n, 6), cov(n, 3);
  Vector y(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    const auto subj = static_cast<std::uint64_t>(i);
    auto zs = substream(config.seed, run, subj, kScoresBlock);
    std::array<double, 6> z{};
    for (auto& v : z) v = normal(zs);
    normal.reset();
    auto ws = substream(config.seed, run, subj, kCovariateNoiseBlock);
    const double w1 = normal(ws);
    const double w2 = w23_sd * normal(ws);
    const double w3 = w23_sd * normal(ws);
    normal.reset();
    auto es = substream(config.seed, run, subj, kOutcomeNoiseBlock);
    const double e = e_sd * normal(es);
    normal.reset();

    for (Index k = 0; k < 6; ++k) scores(i, k) = kScoreSd[k] * z[k];
    cov(i, 0) = nonlinear_scores ? (z[0] + 0.5) * (z[0] + 0.5) + w1 : z[0] + w1;
    cov(i, 1) = 0.2 * z[1] + w2;
    cov(i, 2) = 0.2 * z[2] + w3;

    double effect = 0.0;
    for (Index k = 0; k < 4; ++k) effect += kEffectCoefficients[k] * scores(i, k);
    y[i] = 1.0 + effect + 2.0 * cov(i, 0) + e;
    if (nonlinear_outcome) y[i] += cov(i, 1) * cov(i, 1);
  }

  Matrix curves = curves_from_scores(scores, phi);
  return SimDataset{FunctionalSample(grid, std::move(curves)), std::move(cov), std::move(y),
                    true_effect(grid), std::move(scores)};
}

SimDataset noiseless_fixture(Index n, Index grid_size, std::uint64_t seed, Index components) {
  if (components < 1 || components > 6) throw DataError("fixture components must be 1-6");
  if (n <= components + 3) throw DataError("fixture needs n > components + 3");
  const Grid grid = Grid::uniform(grid_size);
  const Matrix phi = population_eigenfunctions(grid, components);

  Matrix z(n, components), cov(n, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    auto zs = substream(seed, 0, static_cast<std::uint64_t>(i), kScoresBlock);
    for (Index k = 0; k < components; ++k) z(i, k) = normal(zs);
    normal.reset();
    auto ws = substream(seed, 0, static_cast<std::uint64_t>(i), kCovariateNoiseBlock);
    for (Index j = 0; j < 3; ++j) cov(i, j) = normal(ws);
    normal.reset();
  }
  // Exact sample whitening: centered columns with identity second moment.
  z = (z.rowwise() - z.colwise().mean()).eval();
  Matrix m = z.transpose() * z / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const Matrix half_inv = eig.eigenvectors() *
                          eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                          eig.eigenvectors().transpose();
  z = (z * half_inv).eval();

  Matrix scores = Matrix::Zero(n, 6);
  for (Index k = 0; k < components; ++k) scores.col(k) = kScoreSd[k] * z.col(k);
  Vector y = Vector::Constant(n, 1.0);
  for (Index k = 0; k < std::min<Index>(components, 4); ++k) {
    y += kEffectCoefficients[k] * scores.col(k);
  }
  Matrix curves = scores.leftCols(components) * phi;
  return SimDataset{FunctionalSample(grid, std::move(curves)), std::move(cov), std::move(y),
                    true_effect(grid), std::move(scores)};
}

}  // namespace sfps
