#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>

#include "helpers.hpp"
#include "isotower/haar.hpp"
#include "isotower/rmt_stats.hpp"
#include "isotower/rng.hpp"

using namespace isotower;

TEST_CASE("rng streams are reproducible and separated by purpose") {
  RngStream a(42, 7, Purpose::Coeff), b(42, 7, Purpose::Coeff), c(42, 7, Purpose::Sphere), d(43, 7, Purpose::Coeff);
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  CHECK(x != d.next_u64());
}

TEST_CASE("sample_sphere: n = 1 gives a unit scalar, all n give unit vectors") {
  RngStream rng(1, 0, Purpose::Sphere);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(std::abs(sample_sphere(1, rng)(0)) - 1.0) < 1e-14);
  for (int n = 2; n <= 40; ++n) CHECK(std::abs(sample_sphere(n, rng).norm() - 1.0) < 1e-14);
}

TEST_CASE("sample_sphere: n = 8 coordinate means and Beta(1, 7) marginal" * doctest::test_suite("stat")) {
  constexpr int n = 8, draws = 100000;
  RngStream rng(2, 0, Purpose::Sphere);
  std::vector<std::vector<double>> coord(n);
  for (int i = 0; i < draws; ++i) {
    const ComplexVec x = sample_sphere(n, rng);
    for (int j = 0; j < n; ++j) coord[j].push_back(std::norm(x(j)));
  }
  for (int j = 0; j < n; ++j) {
    const auto ms = testing::mean_sigma(coord[j]);
    CHECK(std::abs(ms.mean - 1.0 / n) <= 3.0 * ms.sigma);
  }
  const KsResult ks = beta_delocalization_test(coord[0], n);
  CHECK(ks.p_value >= 0.01);
}

TEST_CASE("sample_update_coeffs: unit norm, simplex marginals at n = 16" * doctest::test_suite("stat")) {
  RngStream one(3, 1, Purpose::Coeff);
  for (int i = 0; i < 100; ++i) {
    const UpdateCoeffs c = sample_update_coeffs(1, one);
    CHECK(std::abs(std::norm(c.mu(0)) + std::norm(c.nu) - 1.0) < 1e-14);
  }

  constexpr int n = 16, draws = 100000;
  RngStream rng(3, n, Purpose::Coeff);
  std::vector<std::vector<double>> w(n + 1);
  for (int i = 0; i < draws; ++i) {
    const UpdateCoeffs c = sample_update_coeffs(n, rng);
    for (int j = 0; j < n; ++j) w[j].push_back(std::norm(c.mu(j)));
    w[n].push_back(std::norm(c.nu));
  }
  // Exchangeable coordinates with Beta(1, n) marginals: Beta(1, (n+1) - 1).
  for (int j = 0; j <= n; ++j) {
    const auto ms = testing::mean_sigma(w[j]);
    CHECK(std::abs(ms.mean - 1.0 / (n + 1)) <= 3.0 * ms.sigma);
  }
  CHECK(beta_delocalization_test(w[0], n + 1).p_value >= 0.01);
  CHECK(beta_delocalization_test(w[n], n + 1).p_value >= 0.01);
}

TEST_CASE("validate_coeffs: degenerate and non-unit inputs") {
  UpdateCoeffs c;
  c.mu = ComplexVec::Zero(2);
  c.nu = 1.0;
  CHECK(is_degenerate(c));
  CHECK(testing::code_of([&] { validate_coeffs(c); }) == ErrorCode::DegenerateCoefficient);
  c.mu = ComplexVec::Constant(2, 0.5);
  c.nu = 0.5;
  CHECK(testing::code_of([&] { validate_coeffs(c); }) == ErrorCode::NonUnitInput);
}

TEST_CASE("next_matrix: u_1 is a unit scalar and every step is a rank-one change") {
  RngStream rng(4, 0, Purpose::Sphere);
  MatrixTower T = next_matrix(MatrixTower{}, rng);
  REQUIRE(T.n() == 1);
  CHECK(std::abs(std::abs(T.u(0, 0)) - 1.0) < 1e-14);
  for (int n = 1; n < 40; ++n) {
    const ComplexMat prev = T.u;
    T = next_matrix(T, rng);
    ComplexMat pad = ComplexMat::Identity(n + 1, n + 1);
    pad.topLeftCorner(n, n) = prev;
    Eigen::JacobiSVD<ComplexMat> svd(pad - T.u);
    CHECK(svd.singularValues()(1) < 1e-10);
    CHECK(testing::max_abs(T.u.adjoint() * T.u - ComplexMat::Identity(n + 1, n + 1)) < 1e-12);
  }
}

TEST_CASE("extend_dense agrees with the dense reflection product") {
  RngStream rng(5, 0, Purpose::Sphere);
  MatrixTower T;
  for (int n = 1; n <= 8; ++n) extend_tower(T, sample_sphere(n, rng));
  const ComplexVec x = sample_sphere(9, rng);
  const Reflection r = reflection_sending(basis_vector(9, 9), x);
  ComplexMat pad = ComplexMat::Identity(9, 9);
  pad.topLeftCorner(8, 8) = T.u;
  CHECK(testing::max_abs(extend_dense(T.u, r) - to_dense(r) * pad) < 1e-13);
}

TEST_CASE("Haar trace moments E|tr u^j|^2 = j at n = 16 from dense matrices" * doctest::test_suite("stat")) {
  constexpr int n = 16, samples = 20000, jmax = 5;
  std::vector<std::vector<double>> t(jmax);
  for (int s = 0; s < samples; ++s) {
    MatrixTower T;
    RngStream rng(1000 + s, 0, Purpose::Sphere);
    for (int m = 1; m <= n; ++m) extend_tower(T, sample_sphere(m, rng));
    ComplexMat p = T.u;
    for (int j = 1; j <= jmax; ++j) {
      t[j - 1].push_back(std::norm(p.trace()));
      p = p * T.u;
    }
  }
  for (int j = 1; j <= jmax; ++j) {
    const auto ms = testing::mean_sigma(t[j - 1]);
    CAPTURE(j);
    CAPTURE(ms.mean);
    CHECK(std::abs(ms.mean - j) <= 3.0 * ms.sigma);
  }
}
