#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "isotower/haar.hpp"
#include "isotower/simulation.hpp"
#include "isotower/spectral.hpp"

using namespace isotower;

namespace {

const double kR = M_SQRT1_2;

UpdateCoeffs worked_coeffs() {
  UpdateCoeffs c;
  c.mu = ComplexVec::Constant(1, kR);
  c.nu = kR;
  return c;
}

SpectralState full_state(std::uint64_t seed, int n) {
  TrajectoryOptions o;
  o.seed = seed;
  o.vec_mode = VecMode::Full;
  Trajectory t(o);
  t.run_to(n);
  return t.state();
}

// Phi(z) in its unrearranged form: sum lambda_j |mu_j|^2 / (lambda_j - z) + |nu - 1|^2 / (1 - z) - (1 - conj nu).
Complex phi(Complex z, const std::vector<double>& angles, const UpdateCoeffs& c) {
  Complex s = 0.0;
  for (size_t j = 0; j < angles.size(); ++j) {
    const Complex l = unit_phase(angles[j]);
    s += l * std::norm(c.mu(j)) / (l - z);
  }
  return s + std::norm(c.nu - 1.0) / (1.0 - z) - (1.0 - std::conj(c.nu));
}

}  // namespace

TEST_CASE("initial_state follows the f_1 = -e_1 convention") {
  const SpectralState s = initial_state(unit_phase(0.3), VecMode::Full);
  CHECK(s.n == 1);
  CHECK(std::abs(s.angles[0] - 0.3) < 1e-15);
  CHECK(std::abs(s.vecs(0, 0) + 1.0) == 0.0);
}

TEST_CASE("decompose_in_eigenbasis: e_{n+1}, worked case, round trip") {
  const SpectralState s1 = initial_state(-1.0, VecMode::Full);
  const UpdateCoeffs top = decompose_in_eigenbasis(basis_vector(2, 2), s1);
  CHECK(std::abs(top.mu(0)) == 0.0);
  CHECK(std::abs(top.nu - 1.0) == 0.0);

  ComplexVec x(2);
  x << -kR, kR;
  const UpdateCoeffs c = decompose_in_eigenbasis(x, s1);
  CHECK(std::abs(c.mu(0) - kR) < 1e-15);
  CHECK(std::abs(c.nu - kR) < 1e-15);

  RngStream rng(9, 0, Purpose::Aux);
  for (int n = 1; n <= 16; ++n) {
    const SpectralState s = full_state(100 + n, n);
    const ComplexVec y = sample_sphere(n + 1, rng);
    const UpdateCoeffs d = decompose_in_eigenbasis(y, s);
    ComplexVec rebuilt = ComplexVec::Zero(n + 1);
    rebuilt.head(n) = s.vecs * d.mu;
    rebuilt(n) += d.nu;
    CHECK((rebuilt - y).norm() < 1e-12);
  }
  const SpectralState bare = initial_state(-1.0, VecMode::None);
  CHECK(testing::code_of([&] { decompose_in_eigenbasis(x, bare); }) == ErrorCode::ModeError);
}

TEST_CASE("secular_function: worked zeros at pi/4 and 7pi/4, poles rejected") {
  const std::vector<double> th{kPi};
  const UpdateCoeffs c = worked_coeffs();
  CHECK(std::abs(secular_function(kPi / 4, th, c)) < 1e-14);
  CHECK(std::abs(secular_function(7 * kPi / 4, th, c)) < 1e-14);
  CHECK(std::abs(std::tan(kPi / 8) * std::tan(kPi / 8) - (3.0 - 2.0 * std::sqrt(2.0))) < 1e-15);
  CHECK(testing::code_of([&] { secular_function(kPi, th, c); }) == ErrorCode::PoleEvaluation);
  CHECK(testing::code_of([&] { secular_function(0.0, th, c); }) == ErrorCode::PoleEvaluation);
}

TEST_CASE("secular_function equals 2i Phi(e^{it}) and is increasing on every arc") {
  RngStream rng(12, 0, Purpose::Aux);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 12);
    std::vector<double> th(n);
    for (auto& a : th) a = kTwoPi * rng.uniform_open();
    std::sort(th.begin(), th.end());
    if (th.back() >= kTwoPi || std::adjacent_find(th.begin(), th.end()) != th.end()) continue;
    RngStream crng(12, 1000 + trial, Purpose::Aux);
    const UpdateCoeffs c = sample_update_coeffs(n, crng);

    const double t = kTwoPi * rng.uniform_open();
    bool near_pole = std::min(t, kTwoPi - t) < 1e-6;
    for (double a : th) near_pole = near_pole || std::abs(a - t) < 1e-6;
    if (!near_pole) {
      const double s = secular_function(t, th, c);
      const Complex ref = Complex(0, 2) * phi(unit_phase(t), th, c);
      CHECK(std::abs(ref.imag()) <= 1e-10 * (1 + std::abs(s)));
      CHECK(std::abs(s - ref.real()) <= 1e-10 * (1 + std::abs(s)));
      ++compared;
    }

    // One random arc: strict increase at 5 interior points and a sign change near its ends.
    std::vector<double> poles{0.0};
    poles.insert(poles.end(), th.begin(), th.end());
    poles.push_back(kTwoPi);
    const int k = static_cast<int>(rng.uniform() * (n + 1));
    const double left = poles[k], right = poles[k + 1], len = right - left;
    double prev = -INFINITY;
    for (int i = 1; i <= 5; ++i) {
      const double v = secular_function(left + len * i / 6.0, th, c);
      CHECK(v > prev);
      prev = v;
    }
    const double eps = 1e-6 * len;
    if (eps > 1e-12) {
      CHECK(secular_function(left + eps, th, c) < 0.0);
      CHECK(secular_function(right - eps, th, c) > 0.0);
    }
  }
  CHECK(compared > 900);
}

TEST_CASE("secular_derivative matches a central difference") {
  const SpectralState s = full_state(5, 6);
  RngStream rng(5, 6, Purpose::Coeff);
  const UpdateCoeffs c = sample_update_coeffs(6, rng);
  const double t = 0.5 * (s.angles[2] + s.angles[3]);
  const double h = 1e-6;
  const double fd = (secular_function(t + h, s.angles, c) - secular_function(t - h, s.angles, c)) / (2 * h);
  CHECK(std::abs(secular_derivative(t, s.angles, c) - fd) < 1e-5 * std::abs(fd));
}

TEST_CASE("solve_secular: worked case roots, normalizer and eigenvector") {
  SpectralState s = initial_state(-1.0, VecMode::Full);
  const UpdateCoeffs c = worked_coeffs();
  const SecularSolveReport rep = solve_secular(s, c);
  REQUIRE(rep.angles.size() == 2);
  CHECK(std::abs(rep.angles[0] - kPi / 4) < 1e-13);
  CHECK(std::abs(rep.angles[1] - 7 * kPi / 4) < 1e-13);
  CHECK(std::abs(rep.h[0] - (1.0 - kR)) < 1e-13);

  const SpectralState next = update_eigenvectors(s, c, rep);
  const Complex lam = -1.0, lp = unit_phase(kPi / 4);
  // Coordinates of f_1^{(2)} in the basis (f_1^{(1)}, e_2), mapped to (e_1, e_2) with f_1^{(1)} = -e_1.
  ComplexVec f(2);
  f << -c.mu(0) / (lam - lp), (c.nu - 1.0) / (1.0 - lp);
  f /= std::sqrt(1.0 - kR);
  CHECK(std::abs(f.norm() - 1.0) < 1e-13);
  CHECK((next.vecs.col(0) - f).norm() < 1e-13);
}

TEST_CASE("solve_secular: interlacing, positive normalizers, small residuals over random steps") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    TrajectoryOptions o;
    o.seed = seed;
    Trajectory t(o);
    for (int n = 1; n < 80; ++n) {
      const StepRecord r = t.step();
      if (n == 1) continue;
      CHECK(interlacing_violations(r.old_angles, r.report.angles) == 0);
      for (double h : r.report.h) CHECK(h > 0.0);
      double local = 0.0;
      for (int k = 0; k < r.n; ++k) {
        const double gap = std::min(r.report.gap_left[k], r.report.gap_right[k]);
        local = r.coeffs.mu.squaredNorm() / gap;
        CHECK(r.report.residual[k] <= 1e-10 * std::max(1.0, local));
      }
    }
  }
}

TEST_CASE("update_eigenvectors: unitary eigenbasis and dense eigen-residual up to n = 48") {
  TrajectoryOptions o;
  o.seed = 77;
  o.mode = SimMode::Matrix;
  o.vec_mode = VecMode::Full;
  Trajectory t(o);
  while (t.n() < 48) {
    t.step();
    const SpectralState& s = t.state();
    const int n = s.n;
    for (int k = 0; k < n; ++k) CHECK(std::abs(s.vecs.col(k).norm() - 1.0) < 1e-11);
    CHECK(testing::max_abs(s.vecs.adjoint() * s.vecs - ComplexMat::Identity(n, n)) < 1e-9);
    double res = 0.0;
    for (int k = 0; k < n; ++k)
      res = std::max(res, (t.dense() * s.vecs.col(k) - s.eigenvalue(k + 1) * s.vecs.col(k)).norm());
    CHECK(res < 1e-8);

    Eigen::ComplexEigenSolver<ComplexMat> es(t.dense());
    std::vector<double> ref;
    for (int k = 0; k < n; ++k) {
      double a = std::arg(es.eigenvalues()(k));
      ref.push_back(a < 0 ? a + kTwoPi : a);
    }
    std::sort(ref.begin(), ref.end());
    for (int k = 0; k < n; ++k) CHECK(std::abs(ref[k] - s.angles[k]) < 1e-9);
  }
}

TEST_CASE("update_coordinates: slab equals the leading rows of the full basis") {
  for (int L : {1, 3, 8}) {
    TrajectoryOptions full, coords;
    full.seed = coords.seed = 31;
    full.vec_mode = VecMode::Full;
    coords.vec_mode = VecMode::Coords;
    coords.L = L;
    Trajectory a(full), b(coords);
    for (int n = 1; n <= 48; ++n) {
      a.step();
      b.step();
      const int rows = std::min(n, L);
      REQUIRE(b.state().vecs.rows() == rows);
      CHECK(testing::max_abs(a.state().vecs.topRows(rows) - b.state().vecs) < 1e-9);
      for (int k = 0; k < n; ++k) CHECK(b.state().vecs.col(k).squaredNorm() <= 1.0 + 1e-12);
    }
  }
  const ComplexMat wide = ComplexMat::Zero(3, 2);
  CHECK(testing::code_of([&] {
          update_coordinates(wide, worked_coeffs(), {1.0, 2.0}, SecularSolveReport{});
        }) == ErrorCode::ModeError);
}

TEST_CASE("recover_coeffs_from_angles: worked case and round trips to n = 32") {
  const RecoveredCoeffs w = recover_coeffs_from_angles({kPi}, {kPi / 4, 7 * kPi / 4});
  CHECK(std::abs(w.mu_abs2[0] - 0.5) < 1e-12);
  CHECK(std::abs(w.nu - kR) < 1e-12);

  for (int n = 1; n <= 32; ++n) {
    const SpectralState s = full_state(500 + n, n);
    RngStream rng(500 + n, n, Purpose::Coeff);
    const UpdateCoeffs c = sample_update_coeffs(n, rng);
    const SecularSolveReport rep = solve_secular(s, c);
    const RecoveredCoeffs r = recover_coeffs_from_angles(s.angles, rep.angles);
    for (int j = 0; j < n; ++j) CHECK(std::abs(r.mu_abs2[j] - std::norm(c.mu(j))) < 1e-8);
    CHECK(std::abs(r.nu - c.nu) < 1e-8);
  }
}

TEST_CASE("recover_coeffs_from_angles: broken or colliding ladders are ill-conditioned") {
  CHECK(testing::code_of([] { recover_coeffs_from_angles({1.0}, {1.5, 2.0}); }) == ErrorCode::IllConditioned);
  CHECK(testing::code_of([] { recover_coeffs_from_angles({1.0, 2.0}, {0.5, 1.0, 3.0}); }) ==
        ErrorCode::IllConditioned);
  // A near collision is still resolved: the sine form of the differences keeps the system well scaled.
  const RecoveredCoeffs r = recover_coeffs_from_angles({1.0, 2.0}, {0.5, 1.0 + 1e-12, 3.0});
  CHECK(r.mu_abs2[0] > 0.0);
  CHECK(r.mu_abs2[0] < 1e-11);
}

TEST_CASE("check_ordering rejects unordered or out-of-range angles") {
  CHECK(testing::code_of([] { check_ordering({1.0, 0.5}); }) == ErrorCode::BracketFailure);
  CHECK(testing::code_of([] { check_ordering({0.0, 1.0}); }) == ErrorCode::BracketFailure);
  CHECK_FALSE(testing::code_of([] { check_ordering({0.1, 1.0, 6.0}); }).has_value());
}
