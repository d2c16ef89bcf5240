#pragma once

#include <array>
#include <cstdint>
#include <random>

#include "sfps/fdata.hpp"

namespace sfps {

struct SimConfig {
  int setting = 1;
  Index n = 200;
  Index grid_size = 128;
  std::uint64_t seed = 1;
  int runs = 200;
  // Read N(0, v) as standard deviation v instead of variance v.
  bool sd_parameterization = false;
};

struct SimDataset {
  FunctionalSample sample;
  Matrix covariates;  // n x 3
  Vector outcome;
  Vector truth;       // true effect curve on the grid
  Matrix true_scores; // n x 6
};

/// Standard deviations of the six generating scores (variances 16, 12, 8, 4, 1, 0.5).
inline const std::array<double, 6> kScoreSd = {4.0, 2.0 * 1.7320508075688772,
                                               2.0 * 1.4142135623730951, 2.0, 1.0,
                                               0.70710678118654752};
/// True effect coefficients on the first four eigenfunctions.
inline constexpr std::array<double, 4> kEffectCoefficients = {2.0, 1.0, 0.5, 0.5};

/// sqrt(2) sin(2 pi j t) for even k = 2(j - 1), sqrt(2) cos(2 pi j t) for odd k.
double population_eigenfunction(Index k, double t);
/// Rows are the first `count` population eigenfunctions on the grid.
Matrix population_eigenfunctions(const Grid& grid, Index count);
Vector true_effect(const Grid& grid);

/// Independent random stream for one (run, subject, variable block).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t run, std::uint64_t subject,
                          std::uint32_t block);

void validate(const SimConfig& config);

/// One replicate of the configured setting; deterministic in (seed, run_index).
SimDataset generate(const SimConfig& config, int run_index);

/// Noiseless, unconfounded data whose sample scores are exactly uncorrelated
/// with sample variances equal to the population eigenvalues, so sample FPCA
/// recovers the population eigenfunctions. Outcome is 1 + integral(mu X).
/// `components` (<= 6) limits the rank of the curves.
SimDataset noiseless_fixture(Index n, Index grid_size, std::uint64_t seed, Index components = 6);

}  // namespace sfps
