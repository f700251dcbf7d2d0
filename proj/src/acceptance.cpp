#include "isotower/acceptance.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "isotower/eigenpath.hpp"
#include "isotower/error.hpp"
#include "isotower/flow.hpp"
#include "isotower/rmt_stats.hpp"
#include "isotower/runner.hpp"
#include "isotower/simulation.hpp"

namespace isotower {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.3g", v); }

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + m));
}

double tol_of(const AcceptanceOptions& o) { return o.secular_tol.value_or(kDefaultSecularTol); }

TrajectoryOptions base_options(const AcceptanceOptions& o, std::uint64_t seed, SimMode mode, VecMode vm, int L = 0) {
  TrajectoryOptions t;
  t.seed = seed;
  t.mode = mode;
  t.vec_mode = vm;
  t.L = L;
  t.dense = false;
  t.secular_tol = tol_of(o);
  return t;
}

// Worked case: u_1 = (-1), x_2 = (-1/sqrt2, 1/sqrt2).
CriterionResult worked_case(const AcceptanceOptions& o) {
  CriterionResult r;
  SpectralState s = initial_state(Complex(-1.0, 0.0), VecMode::Full);
  UpdateCoeffs c;
  c.mu = ComplexVec::Constant(1, M_SQRT1_2);
  c.nu = M_SQRT1_2;
  const SecularSolveReport rep = advance(s, c, tol_of(o));

  double err = 0.0;
  err = std::max(err, std::abs(s.angles[0] - kPi / 4.0));
  err = std::max(err, std::abs(s.angles[1] - 7.0 * kPi / 4.0));
  err = std::max(err, std::abs(rep.h[0] - (1.0 - M_SQRT1_2)));

  ComplexVec lam(2);
  for (int k = 0; k < 2; ++k) lam(k) = unit_phase(s.angles[k]);
  const ComplexMat u_rec = s.vecs * lam.asDiagonal() * s.vecs.adjoint();
  MatrixTower T;
  extend_tower(T, ComplexVec::Constant(1, -1.0));
  ComplexVec x(2);
  x << -M_SQRT1_2, M_SQRT1_2;
  extend_tower(T, x);
  err = std::max(err, std::abs(T.u.trace() - Complex(std::sqrt(2.0), 0.0)));
  err = std::max(err, std::abs(T.u.determinant() - Complex(1.0, 0.0)));
  err = std::max(err, std::abs(u_rec.trace() - Complex(std::sqrt(2.0), 0.0)));
  err = std::max(err, std::abs(u_rec.determinant() - Complex(1.0, 0.0)));
  err = std::max(err, (u_rec - T.u).cwiseAbs().maxCoeff());
  r.passed = err <= 1e-12;
  r.detail = "max deviation " + sci(err) + " (limit 1e-12)";
  return r;
}

CriterionResult oracle_equivalence(const AcceptanceOptions& o) {
  constexpr int kSeeds = 100, kN = 48;
  struct Worst {
    double angle = 0, vec = 0, sigma2 = 0;
    int interlace = 0, failed_steps = 0;
    std::string error;
  };
  std::vector<Worst> w(kSeeds);
  parallel_for(kSeeds, o.threads, [&](long i) {
    TrajectoryOptions t = base_options(o, 1 + i, SimMode::Matrix, VecMode::Full);
    t.oracle = true;
    Trajectory tr(t);
    try {
      while (tr.n() < kN) {
        const StepRecord rec = tr.step();
        if (!rec.oracle) continue;
        w[i].angle = std::max(w[i].angle, rec.oracle->angle_error);
        w[i].vec = std::max(w[i].vec, rec.oracle->vector_error);
        w[i].sigma2 = std::max(w[i].sigma2, rec.oracle->rank_one_sigma2);
        w[i].interlace += rec.oracle->interlacing_violations;
        if (!rec.oracle->passed) ++w[i].failed_steps;
      }
    } catch (const Error& e) {
      w[i].error = e.what();
    }
  });
  Worst all;
  int errors = 0;
  for (const auto& x : w) {
    all.angle = std::max(all.angle, x.angle);
    all.vec = std::max(all.vec, x.vec);
    all.sigma2 = std::max(all.sigma2, x.sigma2);
    all.interlace += x.interlace;
    all.failed_steps += x.failed_steps;
    if (!x.error.empty()) {
      ++errors;
      if (all.error.empty()) all.error = x.error;
    }
  }
  CriterionResult r;
  r.passed = errors == 0 && all.failed_steps == 0;
  r.detail = "angle " + sci(all.angle) + "/1e-09, vector " + sci(all.vec) + "/1e-07, sigma2 " + sci(all.sigma2) +
             "/1e-10, interlacing violations " + std::to_string(all.interlace) + ", failed steps " +
             std::to_string(all.failed_steps);
  if (errors) r.detail += ", " + std::to_string(errors) + " seeds raised: " + all.error;
  return r;
}

CriterionResult haar_traces(const AcceptanceOptions& o) {
  constexpr int kN = 16, kJ = 5;
  constexpr long kSamples = 100000;
  std::vector<std::vector<double>> spectra(kSamples);
  parallel_for(kSamples, o.threads, [&](long i) {
    Trajectory t(base_options(o, 1 + i, SimMode::Coeff, VecMode::None));
    t.run_to(kN);
    spectra[i] = t.state().angles;
  });
  TraceMomentAccumulator acc(kN, kJ);
  for (const auto& a : spectra) acc.add(a);
  CriterionResult r;
  r.passed = true;
  std::ostringstream d;
  for (const auto& row : acc.table()) {
    const double z = (row.mean - row.target) / row.sigma;
    if (!(std::abs(z) <= 3.0)) r.passed = false;
    d << "j=" << row.j << ": " << fmt("%.3f", row.mean) << " (z " << fmt("%+.2f", z) << ") ";
  }
  r.detail = d.str();
  return r;
}

// Average of 1 - sinc^2 over [lo, hi] by composite Simpson.
double bin_theory(double lo, double hi) {
  constexpr int m = 64;
  const double h = (hi - lo) / m;
  double s = pair_density_sine(lo) + pair_density_sine(hi);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * pair_density_sine(lo + i * h);
  return s * h / 3.0 / (hi - lo);
}

CriterionResult pair_correlation(const AcceptanceOptions& o) {
  constexpr int kN = 64;
  constexpr long kSamples = 20000;
  std::vector<PointSample> samples(kSamples);
  parallel_for(kSamples, o.threads, [&](long i) {
    Trajectory t(base_options(o, 1 + i, SimMode::Coeff, VecMode::None));
    t.run_to(kN);
    samples[i] = make_point_sample(t.state().angles, 1 + i);
  });
  const CorrelationHistogram h = empirical_pair_correlation(samples, 4.0, 0.25);
  CriterionResult r;
  r.passed = true;
  double worst = 0.0, worst_at = 0.0, worst_allow = 0.0;
  for (size_t b = 0; b + 1 < h.edges.size(); ++b) {
    if (h.edges[b] < 0.25 - 1e-12) continue;
    const double dev = std::abs(h.density[b] - bin_theory(h.edges[b], h.edges[b + 1]));
    const double allow = std::max(0.03, 4.0 * h.sigma[b]);
    if (dev > allow) r.passed = false;
    if (dev / allow > worst / std::max(worst_allow, 1e-300) || worst_allow == 0.0) {
      worst = dev;
      worst_at = h.center(b);
      worst_allow = allow;
    }
  }
  r.detail = "largest deviation " + fmt("%.4f", worst) + " at " + fmt("%.3f", worst_at) + " (allowed " +
             fmt("%.4f", worst_allow) + "), first bin density " + fmt("%.4f", h.density[0]);
  return r;
}

CriterionResult gap_probability_check(const AcceptanceOptions& o) {
  constexpr int kN = 12;
  constexpr long kSamples = 100000;
  const double a = 1.0, b = 1.0 + kPi / 6.0;
  std::vector<char> avoid(kSamples);
  parallel_for(kSamples, o.threads, [&](long i) {
    TrajectoryOptions t = base_options(o, 1 + i, SimMode::Matrix, VecMode::Full);
    t.dense = true;
    Trajectory tr(t);
    tr.run_to(kN);
    Eigen::ComplexEigenSolver<ComplexMat> es(tr.dense(), false);
    std::vector<double> ang;
    for (Eigen::Index j = 0; j < kN; ++j) {
      double th = std::arg(es.eigenvalues()(j));
      if (th < 0.0) th += kTwoPi;
      ang.push_back(th);
    }
    avoid[i] = avoids_interval(ang, a, b);
  });
  long count = 0;
  for (char c : avoid) count += c;
  const double p = static_cast<double>(count) / kSamples;
  const double sigma = std::sqrt(p * (1.0 - p) / kSamples);
  const GapProbability g = gap_probability(kN, a, b);
  const double full = gap_probability(kN, 0.0, kTwoPi).probability;
  const double empty = gap_probability(kN, a, a).probability;
  CriterionResult r;
  const double z = (p - g.probability) / sigma;
  r.passed = std::abs(z) <= 3.0 && full == 0.0 && empty == 1.0 && g.probability <= g.bound;
  r.detail = "Toeplitz " + fmt("%.5f", g.probability) + ", Monte Carlo " + fmt("%.5f", p) + " (z " + fmt("%+.2f", z) +
             "), full circle " + sci(full) + ", empty " + sci(empty) + ", bound " + fmt("%.4f", g.bound);
  return r;
}

CriterionResult delocalization(const AcceptanceOptions& o) {
  constexpr int kN = 64;
  constexpr long kSeeds = 2000;
  std::vector<double> x(kSeeds);
  parallel_for(kSeeds, o.threads, [&](long i) {
    Trajectory t(base_options(o, 1 + i, SimMode::Coeff, VecMode::Coords, 1));
    t.run_to(kN);
    x[i] = std::norm(t.state().vecs(0, t.state().position(1)));
  });
  const KsResult beta = beta_delocalization_test(x, kN);
  std::vector<double> scaled(x);
  for (double& v : scaled) v *= kN;
  const KsResult ex = exponential_test(scaled);
  CriterionResult r;
  r.passed = beta.p_value >= 0.01 && ex.p_value >= 0.01;
  r.detail = "Beta(1,63) KS p " + fmt("%.3f", beta.p_value) + ", Exp(1) KS p " + fmt("%.3f", ex.p_value) +
             ", mean*n " + fmt("%.4f", beta.mean * kN);
  return r;
}

CriterionResult coupled_convergence(const AcceptanceOptions& o) {
  constexpr long kSeeds = 50;
  const std::vector<int> ladder{256, 512, 1024, 2048};
  struct Out {
    std::vector<double> y;
    std::vector<Complex> g;
    double ratio = 0.0;
    std::string error;
  };
  std::vector<Out> out(kSeeds);
  parallel_for(kSeeds, o.threads, [&](long i) {
    TrajectoryOptions t = base_options(o, 1 + i, SimMode::Coeff, VecMode::Coords, 1);
    t.paths = {1};
    Trajectory tr(t);
    try {
      for (int n : ladder) {
        tr.run_to(n);
        const PathSample& s = tr.path(1).current();
        out[i].y.push_back(s.scaled_angle);
        out[i].g.push_back(s.g().at(0));
        if (n == 1024) out[i].ratio = s.ratio;
      }
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  });
  CriterionResult r;
  std::string err;
  std::vector<double> dy[3], dg[3], ratio;
  for (const auto& x : out) {
    if (!x.error.empty()) {
      err = x.error;
      continue;
    }
    for (int j = 0; j < 3; ++j) {
      dy[j].push_back(std::abs(x.y[j] - x.y[j + 1]));
      dg[j].push_back(std::abs(x.g[j] - x.g[j + 1]));
    }
    ratio.push_back(std::abs(x.ratio - 1.0));
  }
  double my[3], mg[3];
  for (int j = 0; j < 3; ++j) {
    my[j] = median(dy[j]);
    mg[j] = median(dg[j]);
  }
  const double mr = median(ratio);
  r.passed = err.empty() && my[0] > my[1] && my[1] > my[2] && mg[0] > mg[1] && mg[1] > mg[2] && mr <= 0.2;
  r.detail = "median |dy| " + sci(my[0]) + " > " + sci(my[1]) + " > " + sci(my[2]) + "; median |dg| " + sci(mg[0]) +
             " > " + sci(mg[1]) + " > " + sci(mg[2]) + "; median |ratio-1| at 1024 " + fmt("%.3f", mr);
  if (!err.empty()) r.detail += "; error: " + err;
  return r;
}

CriterionResult martingale(const AcceptanceOptions& o) {
  constexpr int kN = 16, kTrials = 10000;
  constexpr std::uint64_t kSeed = 1;
  TrajectoryOptions t = base_options(o, kSeed, SimMode::Coeff, VecMode::Full);
  t.paths = {1, 2};
  Trajectory tr(t);
  tr.run_to(kN);
  RngStream crng(kSeed, kN, Purpose::Coeff);
  const UpdateCoeffs coeffs = sample_update_coeffs(kN, crng);
  CriterionResult r;
  r.passed = true;
  std::ostringstream d;
  for (int k = 1; k <= 2; ++k)
    for (int l = 1; l <= 2; ++l) {
      RngStream prng(kSeed, static_cast<std::uint64_t>(kN) * 4 + (k - 1) * 2 + (l - 1), Purpose::Phase);
      const PhaseTestResult res = martingale_phase_test(tr.state(), coeffs, tr.path(k).D(), prng, k, l, kTrials);
      const double z = std::abs(res.mean - res.previous) / res.sigma;
      const bool var_ok = res.variance <= res.variance_bound + 3.0 * res.variance_sigma;
      if (!(z <= 3.0) || !var_ok) r.passed = false;
      d << "(" << k << "," << l << ") z " << fmt("%.2f", z) << (var_ok ? "" : " var!") << " ";
    }
  r.detail = d.str();
  return r;
}

CriterionResult flow_residuals(const AcceptanceOptions& o) {
  constexpr long kSeeds = 50;
  FlowStudyOptions f;
  f.secular_tol = tol_of(o);
  std::vector<std::vector<FlowRow>> rows(kSeeds);
  std::vector<std::string> errs(kSeeds);
  parallel_for(kSeeds, o.threads, [&](long i) {
    try {
      rows[i] = flow_study(1 + i, f);
    } catch (const Error& e) {
      errs[i] = e.what();
    }
  });
  std::vector<std::vector<double>> by_n(f.snapshots.size());
  bool zero_ok = true;
  std::string err;
  for (long i = 0; i < kSeeds; ++i) {
    if (!errs[i].empty()) err = errs[i];
    for (const FlowRow& row : rows[i]) {
      if (row.alpha == 0.0) {
        zero_ok = zero_ok && row.residual == 0.0;
        continue;
      }
      const size_t idx = std::find(f.snapshots.begin(), f.snapshots.end(), row.n) - f.snapshots.begin();
      by_n[idx].push_back(row.normalized_residual);
    }
  }
  std::vector<double> med;
  for (const auto& v : by_n) med.push_back(median(v));
  bool mono = true;
  for (size_t j = 1; j < med.size(); ++j) mono = mono && med[j] <= med[j - 1];
  CriterionResult r;
  r.passed = err.empty() && zero_ok && mono && med.back() < med.front();
  std::ostringstream d;
  d << "median residual";
  for (size_t j = 0; j < med.size(); ++j) d << " n=" << f.snapshots[j] << ":" << fmt("%.4f", med[j]);
  d << "; alpha=0 exact " << (zero_ok ? "yes" : "no");
  if (!err.empty()) d << "; error: " << err;
  r.detail = d.str();
  return r;
}

CriterionResult inner_products(const AcceptanceOptions&) {
  constexpr double s = 0.9999;
  constexpr long kCesaro = 10000, kLen = 260000, kNodes = 1L << 19;
  std::vector<Complex> w(kLen), wp(kLen);
  RngStream r0(1, 0, Purpose::Proxy), r1(1, 1, Purpose::Proxy);
  for (long l = 0; l < kLen; ++l) {
    w[l] = r0.complex_normal();
    wp[l] = r1.complex_normal();
  }
  const std::vector<Complex> wc(w.begin(), w.begin() + kCesaro), wpc(wp.begin(), wp.begin() + kCesaro);
  const Complex c_cross = cesaro_inner(wc, wpc).value;
  const Complex c_self = cesaro_inner(wc, wc).value;
  const InnerProductEstimate a_cross = abel_inner(w, wp, s);
  const InnerProductEstimate a_self = abel_inner(w, w, s);
  // The circle integral at radius s reproduces 2/(1+s) times the Abel mean at s^2.
  const long N = a_cross.truncation;
  const Complex h_cross = holo_inner(w, wp, s, N, kNodes).value;
  const Complex h_self = holo_inner(w, w, s, N, kNodes).value;
  const Complex a2_cross = 2.0 / (1.0 + s) * abel_inner(w, wp, s * s, N).value;
  const Complex a2_self = 2.0 / (1.0 + s) * abel_inner(w, w, s * s, N).value;

  const double e1 = std::max(std::abs(c_cross), std::abs(c_self - 1.0));
  const double e2 = std::max(std::abs(c_cross - a_cross.value), std::abs(c_self - a_self.value));
  const double e3 = std::max(std::abs(h_cross - a2_cross), std::abs(h_self - a2_self));
  CriterionResult r;
  r.passed = e1 <= 0.05 && e2 <= 0.05 && e3 <= 1e-10;
  r.detail = "|cesaro - delta| " + fmt("%.4f", e1) + ", |cesaro - abel| " + fmt("%.4f", e2) + ", |abel - holo| " +
             sci(e3) + " (N " + std::to_string(N) + ", M " + std::to_string(kNodes) + ")";
  return r;
}

CriterionResult moving_average(const AcceptanceOptions&) {
  const MovingAverageSweep sw = moving_average_sweep(100000, 1000, 0.01, 1);
  CriterionResult r;
  r.passed = sw.violations == 0;
  r.detail = std::to_string(sw.violations) + " violations of c = 0.01 in " + std::to_string(sw.samples) +
             " draws; smallest ratio " + fmt("%.4f", sw.min_ratio);
  return r;
}

}  // namespace

std::vector<int> quick_criteria() { return {1, 2, 3, 4, 5, 6, 8, 10, 11}; }

std::string criterion_name(int id) {
  switch (id) {
    case 1: return "worked closed-form case n=1->2";
    case 2: return "dense oracle equivalence to n=48";
    case 3: return "Haar trace moments n=16";
    case 4: return "sine-kernel pair correlation n=64";
    case 5: return "gap probability n=12";
    case 6: return "eigenvector delocalization n=64";
    case 7: return "coupled convergence k=1";
    case 8: return "martingale phase resampling n=16";
    case 9: return "flow residuals k=1 alpha=1/2";
    case 10: return "Cesaro / Abel / holomorphic inner products";
    case 11: return "moving-average bound sweep";
  }
  return "unknown";
}

CriterionResult run_criterion(int id, const AcceptanceOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = worked_case(opt); break;
      case 2: r = oracle_equivalence(opt); break;
      case 3: r = haar_traces(opt); break;
      case 4: r = pair_correlation(opt); break;
      case 5: r = gap_probability_check(opt); break;
      case 6: r = delocalization(opt); break;
      case 7: r = coupled_convergence(opt); break;
      case 8: r = martingale(opt); break;
      case 9: r = flow_residuals(opt); break;
      case 10: r = inner_products(opt); break;
      case 11: r = moving_average(opt); break;
      default: fail(ErrorCode::ConfigError, "no criterion " + std::to_string(id));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError && (id < 1 || id > kCriterionCount)) throw;
    r.passed = false;
    r.detail = std::string("raised ") + e.what();
  }
  r.id = id;
  r.name = criterion_name(id);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<int> ids = opt.only;
  if (ids.empty()) {
    if (opt.quick) {
      ids = quick_criteria();
    } else {
      for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
    }
  }
  std::vector<CriterionResult> out;
  for (int id : ids) {
    out.push_back(run_criterion(id, opt));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  char head[128];
  std::snprintf(head, sizeof head, "%s %2d  %-44s", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
  return std::string(head) + " " + r.detail + "  [" + fmt("%.2f", r.seconds) + " s]";
}

}  // namespace isotower
