#include <cmath>

#include "doctest.h"
#include "dadao/expm.hpp"
#include "dadao/rng.hpp"

using dadao::expm;
using Eigen::MatrixXd;

namespace {

double rel_err(const MatrixXd& a, const MatrixXd& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

// Truncated Taylor series with many terms, fine for small norms.
MatrixXd taylor(const MatrixXd& a, int terms = 60) {
  MatrixXd sum = MatrixXd::Identity(a.rows(), a.cols());
  MatrixXd term = sum;
  for (int k = 1; k < terms; ++k) {
    term = term * a / k;
    sum += term;
  }
  return sum;
}

MatrixXd random_matrix(dadao::CounterRng& rng, int n, double scale) {
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("exp of zero and diagonal matrices") {
  CHECK(expm(MatrixXd::Zero(4, 4)).isIdentity(0.0));
  Eigen::VectorXd d(4);
  d << -3.0, 0.5, 2.0, 7.5;
  const MatrixXd e = expm(MatrixXd(d.asDiagonal()));
  for (int k = 0; k < 4; ++k) CHECK(e(k, k) == doctest::Approx(std::exp(d[k])).epsilon(1e-14));
  CHECK((e - MatrixXd(e.diagonal().asDiagonal())).norm() == 0.0);
}

TEST_CASE("rotation generator gives cos and sin") {
  for (double t : {0.001, 0.3, 2.0, 25.0}) {
    MatrixXd a(2, 2);
    a << 0, -t, t, 0;
    const MatrixXd e = expm(a);
    CHECK(e(0, 0) == doctest::Approx(std::cos(t)).epsilon(1e-12));
    CHECK(e(1, 0) == doctest::Approx(std::sin(t)).epsilon(1e-12));
  }
}

TEST_CASE("nilpotent matrix gives a finite series") {
  MatrixXd a = MatrixXd::Zero(3, 3);
  a(0, 1) = 2.0;
  a(1, 2) = 3.0;
  MatrixXd expected = MatrixXd::Identity(3, 3) + a + a * a / 2.0;
  CHECK(rel_err(expm(a), expected) < 1e-15);
}

TEST_CASE("agrees with a long Taylor series across every Pade degree") {
  dadao::CounterRng rng(3);
  // Norms chosen to land in each degree band, all small enough for Taylor.
  for (double scale : {0.002, 0.03, 0.15, 0.4, 0.9}) {
    for (int trial = 0; trial < 5; ++trial) {
      const MatrixXd a = random_matrix(rng, 6, scale);
      CAPTURE(scale);
      CHECK(rel_err(expm(a), taylor(a)) < 1e-13);
    }
  }
}

TEST_CASE("semigroup property with scaling and squaring") {
  dadao::CounterRng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd a = random_matrix(rng, 6, 1.0);
    CHECK(rel_err(expm(3.0 * a) * expm(2.0 * a), expm(5.0 * a)) < 1e-10);
    CHECK(rel_err(expm(a) * expm(-a), MatrixXd::Identity(6, 6)) < 1e-12);
  }
}
