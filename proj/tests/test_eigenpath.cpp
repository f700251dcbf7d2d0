#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "isotower/eigenpath.hpp"
#include "isotower/rmt_stats.hpp"
#include "isotower/simulation.hpp"

using namespace isotower;

namespace {

const double kR = M_SQRT1_2;

struct Worked {
  SpectralState before = initial_state(-1.0, VecMode::Full);
  SpectralState after = before;
  UpdateCoeffs coeffs;
  SecularSolveReport report;
  Worked() {
    coeffs.mu = ComplexVec::Constant(1, kR);
    coeffs.nu = kR;
    report = advance(after, coeffs);
  }
};

}  // namespace

TEST_CASE("scaled_angle: worked value and periodicity in k") {
  const SpectralState s = initial_state(-1.0, VecMode::None);
  CHECK(std::abs(scaled_angle(s, 1) - 0.5) < 1e-15);

  TrajectoryOptions o;
  o.seed = 8;
  Trajectory t(o);
  t.run_to(20);
  for (int k = 1; k <= 20; ++k) CHECK(std::abs(scaled_angle(t.state(), k - 20) - (scaled_angle(t.state(), k) - 20)) < 1e-12);
}

TEST_CASE("eigenpath D: empty product at the start and the worked closed form") {
  const Worked w;
  EigenPath p(1, 1);
  p.start(w.before);
  CHECK(std::abs(p.D() - 1.0) == 0.0);
  p.record_step(w.before.angles, w.after, w.coeffs, w.report);

  const Complex lam = -1.0, lp = unit_phase(kPi / 4);
  const Complex D = std::sqrt(1.0 - kR) * (lam - lp) / kR;
  CHECK(std::abs(std::norm(D) - 2.0) < 1e-13);
  CHECK(std::abs(std::norm(p.D()) - 2.0) < 1e-12);
  CHECK(std::abs(p.D() - D) < 1e-12);
  CHECK(std::abs(p.current().scaled_angle - 0.25) < 1e-13);
}

TEST_CASE("ratio_diagnostic: worked value 1/6, finite and positive along trajectories") {
  const Worked w;
  CHECK(std::abs(ratio_diagnostic(w.before.angles, w.after.angles, w.coeffs, 1) - 1.0 / 6.0) < 1e-13);

  TrajectoryOptions o;
  o.seed = 21;
  Trajectory t(o);
  t.step();
  for (int n = 2; n <= 100; ++n) {
    const StepRecord r = t.step();
    for (int k : {1, 2, 0, -1}) {
      if (k >= 1 ? k > n - 1 : k + n - 1 < 1) continue;
      const double q = ratio_diagnostic(r.old_angles, r.report.angles, r.coeffs, k);
      CHECK(std::isfinite(q));
      CHECK(q > 0.0);
    }
  }
}

TEST_CASE("t_coords: bounded by sqrt(n) and rejected without coordinates") {
  TrajectoryOptions o;
  o.seed = 2;
  o.vec_mode = VecMode::Coords;
  o.L = 6;
  Trajectory t(o);
  t.run_to(30);
  for (int k = 1; k <= 30; ++k) {
    double s = 0;
    for (const Complex& c : t_coords(t.state(), k, 6, 0.4)) s += std::norm(c);
    CHECK(s <= 30.0 + 1e-10);
  }
  const SpectralState bare = initial_state(unit_phase(1.0), VecMode::None);
  CHECK(testing::code_of([&] { t_coords(bare, 1, 1, 0.0); }) == ErrorCode::ModeError);
}

TEST_CASE("eigenpath: index resolution and signed paths") {
  TrajectoryOptions o;
  o.seed = 4;
  o.vec_mode = VecMode::Coords;
  o.L = 2;
  o.paths = {1, 3, 0, -2};
  o.keep_path_samples = true;
  Trajectory t(o);
  t.run_to(12);
  CHECK(t.path(3).samples().front().n == 3);
  CHECK(t.path(0).samples().front().n == 1);
  CHECK(t.path(-2).samples().front().n == 3);
  CHECK(t.path(1).samples().size() == 12);
  for (const auto& s : t.path(1).samples()) CHECK(std::isfinite(s.log_abs_D));
  CHECK(testing::code_of([&] { d_factor({1.0}, UpdateCoeffs{}, SecularSolveReport{}, 2); }) ==
        ErrorCode::IndexUnresolvable);
}

TEST_CASE("martingale_phase_test: frozen phases reproduce the recursion") {
  TrajectoryOptions o;
  o.seed = 1;
  o.vec_mode = VecMode::Full;
  o.paths = {1, 2};
  Trajectory t(o);
  t.run_to(16);
  const SpectralState before = t.state();
  const Complex D1 = t.path(1).D(), D2 = t.path(2).D();
  const StepRecord r = t.step();
  RngStream rng(1, 16, Purpose::Phase);
  for (int l : {1, 2, 5}) {
    const PhaseTestResult a = martingale_phase_test(before, r.coeffs, D1, rng, 1, l, 1, false);
    const Complex g1 = t.path(1).D() * t.state().vecs(l - 1, 0);
    CHECK(std::abs(a.mean - g1) < 1e-12 * (1 + std::abs(g1)));
    const PhaseTestResult b = martingale_phase_test(before, r.coeffs, D2, rng, 2, l, 1, false);
    const Complex g2 = t.path(2).D() * t.state().vecs(l - 1, 1);
    CHECK(std::abs(b.mean - g2) < 1e-12 * (1 + std::abs(g2)));
  }
}

TEST_CASE("martingale_phase_test: conditional mean and variance at n = 16" * doctest::test_suite("stat")) {
  TrajectoryOptions o;
  o.seed = 3;
  o.vec_mode = VecMode::Full;
  o.paths = {1};
  Trajectory t(o);
  t.run_to(16);
  RngStream crng(3, 16, Purpose::Coeff);
  const UpdateCoeffs c = sample_update_coeffs(16, crng);
  RngStream rng(3, 16, Purpose::Phase);
  const PhaseTestResult r = martingale_phase_test(t.state(), c, t.path(1).D(), rng, 1, 1, 10000);
  CHECK(std::abs(r.mean - r.previous) <= 3.0 * r.sigma);
  CHECK(r.variance <= r.variance_bound + 3.0 * r.variance_sigma);
  CHECK(std::abs(r.variance - r.variance_exact) <= 4.0 * r.variance_sigma);
}

TEST_CASE("BackPropagator maps f_k^{(N)} into the eigenbasis at a lower dimension") {
  TrajectoryOptions o;
  o.seed = 6;
  o.vec_mode = VecMode::Full;
  Trajectory t(o);
  t.run_to(10);
  const SpectralState low = t.state();
  BackPropagator bp;
  while (t.n() < 40) {
    const StepRecord r = t.step();
    bp.push(r.old_angles, r.coeffs, r.report);
  }
  CHECK(bp.from_dim() == 10);
  CHECK(bp.to_dim() == 40);
  for (int k : {1, 5, 0, -3}) {
    const ComplexVec v = bp.coefficients(k);
    const ComplexVec top = t.state().vecs.col(t.state().position(k)).head(10);
    CHECK((low.vecs * v - top).norm() < 1e-10);
  }
}

TEST_CASE("|D_1|^2 / n stabilizes between n = 512 and 1024" * doctest::test_suite("stat")) {
  std::vector<double> change;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    TrajectoryOptions o;
    o.seed = seed;
    o.paths = {1};
    Trajectory t(o);
    t.run_to(512);
    const double a = t.path(1).D_limit_estimate();
    t.run_to(1024);
    const double b = t.path(1).D_limit_estimate();
    change.push_back(std::abs(b - a) / a);
  }
  CHECK(testing::median(change) < 0.5);
}

TEST_CASE("n |<f_1, e_1>|^2 at n = 256 is close to Exp(1)" * doctest::test_suite("stat")) {
  std::vector<double> x;
  for (std::uint64_t seed = 1; seed <= 2000; ++seed) {
    TrajectoryOptions o;
    o.seed = seed;
    o.vec_mode = VecMode::Coords;
    o.L = 1;
    Trajectory t(o);
    t.run_to(256);
    x.push_back(std::norm(t_coords(t.state(), 1, 1, 0.0)[0]));
  }
  CHECK(exponential_test(x).p_value >= 0.01);
}
