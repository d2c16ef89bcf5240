#include "doctest.h"
#include "sfps/errors.hpp"
#include "sfps/fpca.hpp"
#include "sfps/simgen.hpp"
#include "support.hpp"

using namespace sfps;
using doctest::Approx;

TEST_CASE("rank-one sample") {
  const Grid g = Grid::uniform(128);
  const Vector phi = test::on_grid(g, test::sin1);
  // Scores with mean 0 and mean square 4.
  Vector a(4);
  a << 2.0, -2.0, 2.0, -2.0;
  const FpcaModel m = decompose(FunctionalSample(g, a * phi.transpose()));
  REQUIRE(m.components() == 1);
  CHECK(m.eigenvalues[0] == Approx(4.0 * inner_product(phi, phi, g)).epsilon(1e-10));
  CHECK(std::abs(m.eigenvalues[0] - 4.0) < 1e-3);
  const double sign = m.eigenfunctions(0, 10) > 0 ? 1.0 : -1.0;
  CHECK((sign * m.eigenfunctions.row(0).transpose() - phi).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("identical curves have no components") {
  const Grid g = Grid::uniform(16);
  Matrix x(3, 16);
  for (Index i = 0; i < 3; ++i) x.row(i) = test::on_grid(g, test::cos1).transpose();
  CHECK(decompose(FunctionalSample(g, x)).components() == 0);
}

TEST_CASE("model invariants on generated data") {
  SimConfig cfg;
  const auto data = generate(cfg, 3);
  const FpcaModel m = decompose(data.sample);
  const Grid& g = m.grid;
  const Index K = m.components();
  REQUIRE(K >= 6);

  Matrix gram(K, K);
  for (Index j = 0; j < K; ++j)
    for (Index k = 0; k < K; ++k)
      gram(j, k) = inner_product(m.eigenfunctions.row(j).transpose(),
                                 m.eigenfunctions.row(k).transpose(), g);
  CHECK((gram - Matrix::Identity(K, K)).cwiseAbs().maxCoeff() < 1e-8);

  for (Index k = 1; k < K; ++k) CHECK(m.eigenvalues[k] <= m.eigenvalues[k - 1]);
  CHECK(m.eigenvalues.minCoeff() > 0.0);
  CHECK(m.pve[K - 1] == Approx(1.0).epsilon(1e-14));

  const Matrix cov = m.scores.transpose() * m.scores / static_cast<double>(m.scores.rows());
  for (Index j = 0; j < K; ++j) {
    CHECK(std::abs(m.scores.col(j).mean()) < 1e-8 * std::sqrt(m.eigenvalues[0]));
    for (Index k = 0; k < K; ++k)
      if (j != k) CHECK(std::abs(cov(j, k)) < 1e-8 * m.eigenvalues[0]);
  }

  // Trace identity.
  const auto c = center(data.sample);
  double total = 0.0;
  for (Index i = 0; i < c.sample.size(); ++i) {
    const Vector xi = c.sample.values().row(i).transpose();
    total += inner_product(xi, xi, g);
  }
  total /= static_cast<double>(c.sample.size());
  CHECK(m.eigenvalues.sum() == Approx(total).epsilon(1e-8));

  // Stored scores match recomputed inner products.
  for (Index i : {0, 57, 199})
    for (Index k = 0; k < K; ++k) {
      const double s = inner_product(c.sample.values().row(i).transpose(),
                                     m.eigenfunctions.row(k).transpose(), g);
      CHECK(std::abs(s - m.scores(i, k)) < 1e-10 * (1.0 + std::abs(s)));
    }

  // Largest-magnitude entry of each eigenfunction is positive.
  for (Index k = 0; k < K; ++k) {
    Index arg = 0;
    m.eigenfunctions.row(k).cwiseAbs().maxCoeff(&arg);
    CHECK(m.eigenfunctions(k, arg) > 0.0);
  }

  const FpcaModel again = decompose(data.sample);
  CHECK((again.eigenfunctions.array() == m.eigenfunctions.array()).all());
  CHECK(((project(m, data.sample) - m.scores).cwiseAbs().maxCoeff()) < 1e-9);
}

TEST_CASE("eigenvalues recovered at n = 2000") {
  SimConfig cfg;
  cfg.n = 2000;
  cfg.seed = 11;
  const FpcaModel m = decompose(generate(cfg, 0).sample);
  const double truth[] = {16, 12, 8, 4, 1, 0.5};
  for (int k = 0; k < 6; ++k) CHECK(std::abs(m.eigenvalues[k] / truth[k] - 1.0) < 0.15);
}

TEST_CASE("rank selection") {
  Vector ev(6);
  ev << 16, 12, 8, 4, 1, 0.5;
  const Vector pve = cumulative_pve(ev);
  CHECK(pve[3] == Approx(40.0 / 41.5));
  CHECK(select_rank(pve, 0.95) == 4);
  CHECK(select_rank(pve, 0.99) == 6);
  CHECK(select_rank(pve, 1.0) == 6);
  Vector one(1);
  one << 3.0;
  CHECK(select_rank(cumulative_pve(one), 0.5) == 1);
  CHECK(select_rank(cumulative_pve(one), 0.99) == 1);
  CHECK_THROWS(select_rank(Vector(), 0.9));
}

TEST_CASE("standardize") {
  SimConfig cfg;
  const auto data = generate(cfg, 1);
  const FpcaModel m = decompose(data.sample);
  const StandardizedDesign d = standardize(m, 4, data.covariates);
  const double n = static_cast<double>(d.n());
  const Matrix am = d.a_star.transpose() * d.a_star / n;
  for (Index k = 0; k < 4; ++k) CHECK(am(k, k) == Approx(1.0).epsilon(1e-8));
  const Matrix cm = d.c_star.transpose() * d.c_star / n;
  CHECK((cm - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(d.c_star.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);

  const Matrix white = test::whiten(test::normal_matrix(200, 2, 4));
  const StandardizedDesign dw = make_design(d.a_star, white);
  CHECK((dw.c_star - white).cwiseAbs().maxCoeff() < 1e-10);

  Matrix scalar = test::whiten(test::normal_matrix(200, 1, 5)) * 2.0;
  const StandardizedDesign ds = make_design(d.a_star, scalar);
  CHECK((ds.c_star - scalar / 2.0).cwiseAbs().maxCoeff() < 1e-12);

  Matrix singular(200, 2);
  singular.col(0) = scalar.col(0);
  singular.col(1) = 2.0 * scalar.col(0);
  CHECK_THROWS_AS(make_design(d.a_star, singular), SingularCovariateError);
  CHECK_THROWS(standardize(m, m.components() + 1, data.covariates));
}
