#include <cmath>

#include "doctest.h"
#include "sfps/errors.hpp"
#include "sfps/simgen.hpp"
#include "support.hpp"

using namespace sfps;
using doctest::Approx;

namespace {

double cov(const Vector& a, const Vector& b) {
  return ((a.array() - a.mean()) * (b.array() - b.mean())).sum() / static_cast<double>(a.size() - 1);
}

}  // namespace

TEST_CASE("setting 1 moments") {
  SimConfig cfg;
  cfg.n = 100000;
  cfg.grid_size = 8;
  const SimDataset d = generate(cfg, 0);
  const Vector a1 = d.true_scores.col(0), c1 = d.covariates.col(0);
  CHECK(std::abs(cov(a1, a1) - 16.0) < 0.5);
  CHECK(std::abs(cov(c1, c1) - 2.0) < 0.05);
  CHECK(std::abs(cov(a1, c1) - 4.0) < 0.1);
  const Vector c2 = d.covariates.col(1);
  CHECK(std::abs(cov(c2, c2) - 0.54) < 0.02);
}

TEST_CASE("setting 2 moments") {
  SimConfig cfg;
  cfg.setting = 2;
  cfg.n = 100000;
  cfg.grid_size = 8;
  const SimDataset d = generate(cfg, 0);
  CHECK(std::abs(cov(d.true_scores.col(0), d.covariates.col(0)) - 4.0) < 0.1);
}

TEST_CASE("curves are built from the scores") {
  SimConfig cfg;
  cfg.setting = 3;
  const SimDataset d = generate(cfg, 2);
  const Grid& g = d.sample.grid();
  const Matrix phi = population_eigenfunctions(g, 6);
  CHECK((d.sample.values() - d.true_scores * phi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((true_effect(g) - (2.0 * phi.row(0) + phi.row(1) + 0.5 * phi.row(2) + 0.5 * phi.row(3))
                              .transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d.outcome.size() == 200);
  CHECK(d.covariates.cols() == 3);
}

TEST_CASE("determinism") {
  SimConfig cfg;
  cfg.setting = 4;
  const SimDataset a = generate(cfg, 7), b = generate(cfg, 7), c = generate(cfg, 8);
  CHECK((a.sample.values().array() == b.sample.values().array()).all());
  CHECK((a.outcome.array() == b.outcome.array()).all());
  CHECK((a.covariates.array() == b.covariates.array()).all());
  CHECK_FALSE((a.outcome.array() == c.outcome.array()).all());
  // Subjects do not depend on n.
  SimConfig big = cfg;
  big.n = 300;
  const SimDataset e = generate(big, 7);
  CHECK((e.outcome.head(200).array() == a.outcome.array()).all());
}

TEST_CASE("standard deviation reading scales the noise") {
  SimConfig var, sd;
  sd.sd_parameterization = true;
  var.n = sd.n = 20000;
  var.grid_size = sd.grid_size = 8;
  const SimDataset a = generate(var, 0), b = generate(sd, 0);
  const Vector ea = a.outcome - b.outcome;
  // Same underlying draws: the difference is (5 - 25) times the same standard
  // normal draw.
  CHECK(std::sqrt(cov(ea, ea)) == Approx(20.0).epsilon(0.05));
  CHECK(std::sqrt(cov(b.covariates.col(1), b.covariates.col(1))) ==
        Approx(std::sqrt(0.29)).epsilon(0.05));
}

TEST_CASE("configuration checks") {
  SimConfig cfg;
  cfg.setting = 5;
  CHECK_THROWS_AS(generate(cfg, 0), DataError);
  cfg.setting = 1;
  cfg.n = 1;
  CHECK_THROWS_AS(generate(cfg, 0), DataError);
}

TEST_CASE("noiseless fixture") {
  const SimDataset d = noiseless_fixture(60, 32, 1);
  const Matrix s = d.true_scores;
  const Matrix m = s.transpose() * s / 60.0;
  const double ev[] = {16, 12, 8, 4, 1, 0.5};
  for (Index j = 0; j < 6; ++j)
    for (Index k = 0; k < 6; ++k) CHECK(std::abs(m(j, k) - (j == k ? ev[j] : 0.0)) < 1e-10);
  CHECK(s.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
}
