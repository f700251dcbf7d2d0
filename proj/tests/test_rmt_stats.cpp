#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "helpers.hpp"
#include "isotower/haar.hpp"
#include "isotower/rmt_stats.hpp"
#include "isotower/simulation.hpp"

using namespace isotower;

namespace {

// Angles of a dense Haar matrix built from reflections, via a dense eigensolver.
std::vector<double> dense_angles(std::uint64_t seed, int n) {
  MatrixTower T;
  RngStream rng(seed, 0, Purpose::Aux);
  for (int m = 1; m <= n; ++m) extend_tower(T, sample_sphere(m, rng));
  Eigen::ComplexEigenSolver<ComplexMat> es(T.u, false);
  std::vector<double> a;
  for (int k = 0; k < n; ++k) {
    const double t = std::arg(es.eigenvalues()(k));
    a.push_back(t < 0 ? t + kTwoPi : t);
  }
  std::sort(a.begin(), a.end());
  return a;
}

}  // namespace

TEST_CASE("kernel_finite: diagonal, zeros") {
  CHECK(std::abs(kernel_finite(0.0, 7) - 7 / kTwoPi) < 1e-15);
  CHECK(std::abs(kernel_finite(kTwoPi / 8, 8)) < 1e-15);
  CHECK(std::abs(kernel_finite(kPi, 2)) < 1e-15);
  CHECK(std::abs(kernel_finite(1e-9, 5) - 5 / kTwoPi) < 1e-12);
}

TEST_CASE("kernel_sine and rho_r closed forms") {
  CHECK(kernel_sine(0.0) == 1.0);
  CHECK(std::abs(kernel_sine(1.0)) < 1e-15);
  CHECK(std::abs(kernel_sine(0.5) - 2 / kPi) < 1e-15);
  CHECK(std::abs(rho_r({0.3}) - 1.0) < 1e-15);
  CHECK(std::abs(rho_r({0.3, 0.3})) < 1e-15);
  CHECK(std::abs(rho_r({0.0, 0.5}) - (1.0 - 4.0 / (kPi * kPi))) < 1e-14);
  for (double d : {0.1, 0.7, 2.3}) CHECK(std::abs(rho_r({0.0, d}) - pair_density_sine(d)) < 1e-14);
  // Finite kernel: rho_1 is the flat density n / 2pi.
  CHECK(std::abs(rho_r({1.234}, KernelKind::Finite, 9) - 9 / kTwoPi) < 1e-14);
}

TEST_CASE("rho_r is symmetric under permutations") {
  RngStream rng(1, 0, Purpose::Aux);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = 3 * rng.uniform(), b = 3 * rng.uniform(), c = 3 * rng.uniform();
    const double base = rho_r({a, b, c});
    CHECK(std::abs(rho_r({b, a, c}) - base) < 1e-12);
    CHECK(std::abs(rho_r({c, b, a}) - base) < 1e-12);
    CHECK(std::abs(rho_r({b, c, a}) - base) < 1e-12);
    const double fbase = rho_r({a, b, c}, KernelKind::Finite, 10);
    CHECK(std::abs(rho_r({c, a, b}, KernelKind::Finite, 10) - fbase) < 1e-12);
  }
}

TEST_CASE("gap_probability: boundary cases, n = 1 exact, bound, bad intervals") {
  CHECK(gap_probability(5, 0.0, kTwoPi).probability == 0.0);
  CHECK(gap_probability(5, 1.0, 1.0).probability == 1.0);
  const GapProbability one = gap_probability(1, 0.5, 2.0);
  CHECK(std::abs(one.probability - (1.0 - 1.5 / kTwoPi)) < 1e-14);
  for (int n : {2, 8, 30})
    for (double len : {0.1, 1.0, 3.0}) {
      const GapProbability g = gap_probability(n, 1.0, 1.0 + len);
      CHECK(g.probability >= 0.0);
      CHECK(g.probability <= g.bound + 1e-14);
      CHECK(std::abs(g.bound - std::exp(-len * n / kTwoPi)) < 1e-15);
    }
  CHECK(testing::code_of([] { gap_probability(4, 2.0, 1.0); }) == ErrorCode::DegenerateInterval);
  CHECK(testing::code_of([] { gap_probability(4, -0.5, 1.0); }) == ErrorCode::DegenerateInterval);
}

TEST_CASE("gap_probability matches dense-matrix Monte Carlo at n = 12" * doctest::test_suite("stat")) {
  constexpr int n = 12, samples = 20000;
  const double a = 1.0, b = 1.0 + kPi / 6;
  long hits = 0;
  for (int s = 0; s < samples; ++s) hits += avoids_interval(dense_angles(70000 + s, n), a, b);
  const double p = static_cast<double>(hits) / samples;
  const double sigma = std::sqrt(p * (1 - p) / samples);
  const double exact = gap_probability(n, a, b).probability;
  CAPTURE(p);
  CAPTURE(exact);
  CHECK(std::abs(p - exact) <= 3 * sigma);
}

TEST_CASE("make_point_sample maps angles into (-n/2, n/2] in increasing order") {
  const PointSample p = make_point_sample({0.1, 3.0, 3.5, 6.0}, 4);
  REQUIRE(p.points.size() == 4);
  CHECK(p.n == 4);
  for (size_t i = 1; i < 4; ++i) CHECK(p.points[i] > p.points[i - 1]);
  CHECK(p.points.front() > -2.0);
  CHECK(p.points.back() <= 2.0);
}

TEST_CASE("pair correlation: repulsion at 0, sine-kernel density away from it" * doctest::test_suite("stat")) {
  constexpr int n = 64;
  PairCorrelationAccumulator acc(4.0, 0.125), first(4.0, 0.125), second(4.0, 0.125);
  for (std::uint64_t seed = 1; seed <= 3000; ++seed) {
    const PointSample ps = make_point_sample(sample_spectrum(seed, n), seed);
    acc.add(ps);
    (seed <= 1500 ? first : second).add(ps);
  }
  first.merge(second);
  const CorrelationHistogram h = acc.histogram(), m = first.histogram();
  for (size_t b = 0; b < h.counts.size(); ++b) CHECK(h.counts[b] == m.counts[b]);

  CHECK(h.density.front() < 0.05);
  for (size_t b = 0; b < h.density.size(); ++b) {
    if (h.edges[b] < 2.5 || h.edges[b + 1] > 3.5) continue;
    // Bin average of the limiting density; 1 - sinc^2 is flat to 1e-2 here.
    double avg = 0.0;
    for (int i = 0; i < 64; ++i) avg += pair_density_sine(h.edges[b] + (i + 0.5) * h.bin_width / 64) / 64;
    CAPTURE(h.center(b));
    CHECK(std::abs(h.density[b] - avg) <= 3 * h.sigma[b] + 0.01);
  }
  CHECK(testing::code_of([&] { acc.histogram(5000); }) == ErrorCode::InsufficientSamples);
}

TEST_CASE("trace moments: window, accumulator merge, targets at n = 16" * doctest::test_suite("stat")) {
  CHECK(testing::code_of([] { TraceMomentAccumulator(8, 5); }) == ErrorCode::WindowViolation);
  TraceMomentAccumulator all(16, 5), a(16, 5), b(16, 5);
  std::vector<std::vector<double>> spectra;
  for (std::uint64_t seed = 1; seed <= 20000; ++seed) {
    spectra.push_back(sample_spectrum(seed, 16));
    all.add(spectra.back());
    (seed % 3 ? a : b).add(spectra.back());
  }
  a.merge(b);
  const auto t = all.table(), tm = a.table(), tf = trace_moments(spectra, 5);
  for (int j = 1; j <= 5; ++j) {
    CHECK(t[j - 1].j == j);
    CHECK(t[j - 1].target == j);
    CHECK(std::abs(tm[j - 1].mean - t[j - 1].mean) < 1e-9);
    CHECK(std::abs(tf[j - 1].mean - t[j - 1].mean) < 1e-9);
    CAPTURE(j);
    CHECK(std::abs(t[j - 1].mean - j) <= 3 * t[j - 1].sigma);
  }
}

TEST_CASE("kolmogorov_q reference values") {
  CHECK(kolmogorov_q(0.0) == doctest::Approx(1.0));
  CHECK(kolmogorov_q(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(kolmogorov_q(1.6276) == doctest::Approx(0.01).epsilon(1e-3));
  CHECK(kolmogorov_q(0.5) == doctest::Approx(0.963945).epsilon(1e-5));
  CHECK(kolmogorov_q(5.0) < 1e-20);
}

TEST_CASE("KS self-test: Beta(1, n - 1) draws give uniform p-values" * doctest::test_suite("stat")) {
  constexpr int n = 64;
  RngStream rng(5, 0, Purpose::Aux);
  std::vector<double> p;
  for (int batch = 0; batch < 300; ++batch) {
    std::vector<double> x(1000);
    for (auto& v : x) v = 1.0 - std::pow(rng.uniform_open(), 1.0 / (n - 1));
    const KsResult r = beta_delocalization_test(x, n);
    p.push_back(r.p_value);
    if (batch == 0) CHECK(std::abs(r.mean - 1.0 / n) <= 3 * r.mean_sigma);
  }
  CHECK(ks_test(p, [](double u) { return std::clamp(u, 0.0, 1.0); }).p_value >= 0.01);
  CHECK(testing::code_of([] { beta_delocalization_test(std::vector<double>(10, 0.1), 8); }) ==
        ErrorCode::InsufficientSamples);
}

TEST_CASE("ks_two_sample separates shifted samples") {
  RngStream rng(6, 0, Purpose::Aux);
  std::vector<double> a(2000), b(2000), c(2000);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  for (auto& v : c) v = rng.normal() + 0.3;
  CHECK(ks_two_sample(a, b).p_value >= 0.01);
  CHECK(ks_two_sample(a, c).p_value < 1e-6);
}

TEST_CASE("delocalization: |<f_1, e_1>|^2 at n = 64 is Beta(1, 63)" * doctest::test_suite("stat")) {
  std::vector<double> x;
  for (std::uint64_t seed = 1; seed <= 2000; ++seed) {
    TrajectoryOptions o;
    o.seed = seed;
    o.vec_mode = VecMode::Coords;
    o.L = 1;
    Trajectory t(o);
    t.run_to(64);
    x.push_back(std::norm(t.state().vecs(0, 0)));
  }
  const KsResult r = beta_delocalization_test(x, 64);
  CHECK(r.p_value >= 0.01);
  CHECK(std::abs(r.mean - 1.0 / 64) <= 3 * r.mean_sigma);
}

TEST_CASE("event_flags: duplicate angles and zero coefficients are flagged") {
  StepLog s;
  s.n = 4;
  s.angles = {0.5, 1.0, 1.0, 2.0};
  s.max_abs_mu = 0.3;
  s.min_abs_mu = 0.1;
  s.abs_nu = 0.2;
  const EventFlags f = event_flags(s, 0.1);
  CHECK_FALSE(f.e0);
  CHECK_FALSE(f.e3_lower);
  CHECK(f.min_gap == 0.0);
  // Wrap-around gap from 2.0 to 0.5 + 2pi.
  CHECK(std::abs(f.max_gap - (kTwoPi - 1.5)) < 1e-15);
  s.angles = {0.5, 1.0, 2.0, 4.0};
  s.min_abs_mu = 0.0;
  CHECK_FALSE(event_flags(s, 0.1).e0);

  const EventSummary sum = event_diagnostics({s, s}, 0.1);
  CHECK(sum.count_e0 == 2);
  CHECK(sum.first_violation == 4);
}
