#include <cmath>

#include "doctest.h"
#include "sfps/errors.hpp"
#include "sfps/metrics.hpp"
#include "sfps/simgen.hpp"
#include "support.hpp"

using namespace sfps;
using doctest::Approx;

TEST_CASE("F statistic") {
  const Matrix z = test::normal_matrix(200, 3, 12);
  const Vector c = z.col(0);
  const Vector y = 2.0 * c + z.col(1);
  const FStatistic f = weighted_f_statistic(y, c, Vector());
  CHECK_FALSE(f.infinite);
  CHECK(f.value == Approx(test::simple_regression_f(y, c)).epsilon(1e-10));
  CHECK(weighted_f_statistic(y, c, Vector::Ones(200)).value == Approx(f.value).epsilon(1e-14));

  CHECK(weighted_f_statistic(Vector::Constant(200, 4.0), z.leftCols(2), Vector()).value == 0.0);

  const Vector w = (z.col(2).array() * 0.5).exp();
  const FStatistic exact = weighted_f_statistic(1.0 + 3.0 * z.col(0).array() - z.col(1).array(),
                                                z.leftCols(2), w);
  CHECK(exact.infinite);
  CHECK(std::isinf(exact.value));

  // Weights act as replication counts.
  Vector w2 = Vector::Ones(200);
  w2[0] = 2.0;
  Vector y3(201), c3(201);
  y3 << y, y[0];
  c3 << c, c[0];
  const double replicated = test::simple_regression_f(y3, c3);
  // Same SSR and SSE with one more residual degree of freedom.
  CHECK(weighted_f_statistic(y, c, w2).value * 199.0 / 198.0 == Approx(replicated).epsilon(1e-10));

  CHECK_THROWS_AS(weighted_f_statistic(y.head(2), c.head(2), Vector()), InsufficientDataError);
}

TEST_CASE("weighted correlation") {
  const Matrix z = test::normal_matrix(10000, 3, 13);
  const Vector w = (z.col(2).array() * 0.5).exp();
  CHECK(weighted_abs_correlation(z.col(0), z.col(0), w) == Approx(1.0).epsilon(1e-14));
  CHECK(weighted_abs_correlation(z.col(0), -2.0 * z.col(0), w) == Approx(1.0).epsilon(1e-14));
  CHECK(weighted_abs_correlation(z.col(0), z.col(1), Vector()) <= 0.1);
  const Vector a = z.col(0).head(50), b = (z.col(0) + z.col(1)).head(50);
  const double am = a.mean(), bm = b.mean();
  const double pearson = ((a.array() - am) * (b.array() - bm)).sum() /
                         std::sqrt((a.array() - am).square().sum() * (b.array() - bm).square().sum());
  CHECK(weighted_abs_correlation(a, b, Vector::Ones(50)) == Approx(std::abs(pearson)).epsilon(1e-12));
  CHECK_THROWS_AS(weighted_abs_correlation(Vector::Ones(5), a.head(5), Vector()), DataError);
}

TEST_CASE("integrated squared error") {
  const Grid g = Grid::uniform(128);
  const Vector truth = true_effect(g);
  const Matrix phi = population_eigenfunctions(g, 6);
  CHECK(ise(truth, truth, g) == 0.0);
  CHECK(std::abs(ise(truth + phi.row(0).transpose(), truth, g) - 1.0) < 1e-3);
  CHECK(std::abs(ise(Vector::Zero(128), truth, g) - 5.5) < 1e-3);
  CHECK_THROWS_AS(ise(truth.head(10), truth, g), DimensionError);

  // Grid refinement.
  const Grid fine = Grid::uniform(255);
  const Vector fine_truth = true_effect(fine);
  const Matrix fine_phi = population_eigenfunctions(fine, 6);
  const double coarse_v = ise(truth + 0.3 * phi.row(2).transpose(), truth, g);
  const double fine_v = ise(fine_truth + 0.3 * fine_phi.row(2).transpose(), fine_truth, fine);
  CHECK(std::abs(coarse_v - fine_v) < 1e-3);
}

TEST_CASE("run summaries") {
  const Grid g = Grid::uniform(128);
  const Vector truth = true_effect(g);
  const Vector phi1 = population_eigenfunctions(g, 1).row(0).transpose();

  Matrix same(3, 128);
  for (Index r = 0; r < 3; ++r) same.row(r) = truth.transpose();
  const AccuracyReport zero = summarize_runs(same, truth, g);
  CHECK(zero.aise == 0.0);
  CHECK(zero.mise == 0.0);
  CHECK(zero.isb < 1e-20);

  Matrix pm(2, 128);
  pm.row(0) = (truth + phi1).transpose();
  pm.row(1) = (truth - phi1).transpose();
  const AccuracyReport r = summarize_runs(pm, truth, g);
  CHECK(std::abs(r.aise - 1.0) < 1e-3);
  CHECK(std::abs(r.isb) < 1e-3);

  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(summarize_runs(Matrix(0, 128), truth, g), InsufficientDataError);

  const Matrix noisy = test::normal_matrix(25, 128, 17).rowwise() + truth.transpose();
  const AccuracyReport s = summarize_runs(noisy, truth, g);
  CHECK(s.isb <= s.aise + 1e-6);
  CHECK(s.mise <= *std::max_element(s.ise.begin(), s.ise.end()));
  CHECK(s.isb >= 0.0);
  CHECK(s.runs == 25);
}

TEST_CASE("balance report") {
  const Matrix z = test::normal_matrix(100, 4, 18);
  const Matrix scores = z.leftCols(2);
  Matrix cov = z.rightCols(2);
  cov.col(0) += scores.col(0);
  const Vector w = (z.col(3).array() * 0.3).exp();
  const BalanceReport rep = balance_report(scores, cov, {{"Unweighted", Vector()}, {"Np", w}});
  REQUIRE(rep.f_statistics.at("Np").size() == 2);
  for (const auto& [name, fs] : rep.f_statistics)
    for (const auto& f : fs) CHECK(f.value >= 0.0);
  for (const auto& [name, c] : rep.correlations) {
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 2);
    CHECK(c.minCoeff() >= 0.0);
    CHECK(c.maxCoeff() <= 1.0);
  }
  CHECK(rep.f_statistics.at("Unweighted")[0].value ==
        Approx(weighted_f_statistic(scores.col(0), cov, Vector()).value));
}
