#include "isotower/flow.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include "isotower/error.hpp"
#include "isotower/rng.hpp"

namespace isotower {

namespace {

constexpr double kAbelTarget = 1e-12;

void require_full(const SpectralState& state) {
  if (state.mode != VecMode::Full || state.vecs.rows() != state.n)
    fail(ErrorCode::ModeError, "flow residuals need the full eigenbasis");
}

// Phases e^{i a theta_j} for the power u^a.
ComplexVec power_phases(const SpectralState& state, long a) {
  ComplexVec p(state.n);
  for (int j = 0; j < state.n; ++j)
    p(j) = unit_phase(std::remainder(static_cast<double>(a) * state.angles[j], kTwoPi));
  return p;
}

ComplexVec eigen_coords(const SpectralState& state, const ComplexVec& v) {
  if (v.size() != state.n) fail(ErrorCode::DimMismatch, "prefix length must equal n");
  return state.vecs.adjoint() * v;
}

// <x, u^b e_l> for x given by its eigenbasis coordinates xi.
Complex against_shifted_basis(const SpectralState& state, const ComplexVec& xi, long b, int l) {
  if (l < 1 || l > state.n) fail(ErrorCode::DimMismatch, "coordinate index out of range");
  Complex acc = 0.0;
  for (int j = 0; j < state.n; ++j)
    acc += xi(j) * state.vecs(l - 1, j) *
           unit_phase(-std::remainder(static_cast<double>(b) * state.angles[j], kTwoPi));
  return acc;
}

void check_cauchy_schwarz(Complex v, double ww, double wpwp) {
  const double bound = ww * wpwp;
  if (std::norm(v) > bound + 1e-12 * std::max(1.0, bound))
    fail(ErrorCode::IllConditioned, "Cauchy-Schwarz violated by an inner product estimate");
}

double max_product(const std::vector<Complex>& w, const std::vector<Complex>& wp, size_t len) {
  double m = 0.0;
  for (size_t l = 0; l < len; ++l) m = std::max(m, std::abs(w[l]) * std::abs(wp[l]));
  return m;
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// F(c)(s e^{2 pi i m / M}) for m < M by one backward transform.
std::vector<Complex> circle_values(const std::vector<Complex>& w, double s, long N, long M) {
  std::vector<Complex> buf(M, Complex(0.0));
  double sp = 1.0;
  for (long l = 0; l < N; ++l, sp *= s) buf[l] = w[l] * sp;
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(M), data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return buf;
}

}  // namespace

std::vector<Complex> FlowElement::materialize() const {
  size_t len = 0;
  for (const auto& [k, c] : coeffs) {
    auto it = g.find(k);
    if (it == g.end()) fail(ErrorCode::IndexUnresolvable, "no materialized path for k = " + std::to_string(k));
    len = len == 0 ? it->second.size() : std::min(len, it->second.size());
  }
  std::vector<Complex> w(len, Complex(0.0));
  for (const auto& [k, c] : coeffs) {
    const auto& gk = g.at(k);
    for (size_t l = 0; l < len; ++l) w[l] += c * gk[l];
  }
  return w;
}

double FlowElement::weight_profile(double delta) const {
  double acc = 0.0;
  for (const auto& [k, c] : coeffs) acc += (1.0 + std::pow(std::abs(static_cast<double>(k)), 1.0 + delta)) * std::norm(c);
  return acc;
}

FlowElement apply_U(double alpha, const FlowElement& elem) {
  FlowElement out = elem;
  if (alpha == 0.0) return out;
  for (auto& [k, c] : out.coeffs) {
    auto it = elem.y.find(k);
    if (it == elem.y.end()) fail(ErrorCode::IndexUnresolvable, "no y estimate for k = " + std::to_string(k));
    c *= unit_phase(kTwoPi * alpha * it->second);
  }
  return out;
}

long alpha_power(double alpha, int n) { return static_cast<long>(std::floor(alpha * n)); }

double flow_residual(const SpectralState& state, const ComplexVec& g, double alpha, double y) {
  require_full(state);
  if (alpha == 0.0) return 0.0;
  const ComplexVec eta = eigen_coords(state, g);
  const ComplexVec p = power_phases(state, alpha_power(alpha, state.n));
  const Complex target = unit_phase(kTwoPi * alpha * y);
  double num = 0.0, den = 0.0;
  for (int j = 0; j < state.n; ++j) {
    num += std::norm(eta(j)) * std::norm(p(j) - target);
    den += std::norm(eta(j));
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

double component_residual(const SpectralState& state, const ComplexVec& g, double alpha, double y,
                          double gamma, int l) {
  require_full(state);
  const ComplexVec eta = eigen_coords(state, g);
  const ComplexVec p = power_phases(state, alpha_power(alpha, state.n));
  const Complex target = unit_phase(kTwoPi * alpha * y);
  ComplexVec xi(state.n);
  for (int j = 0; j < state.n; ++j) xi(j) = eta(j) * (p(j) - target);
  const double value = std::abs(against_shifted_basis(state, xi, alpha_power(gamma, state.n), l));
  const double bound = xi.norm();
  if (value > bound * (1.0 + 1e-12) + 1e-14)
    fail(ErrorCode::IllConditioned, "component residual exceeds the full residual");
  return value;
}

const char* to_string(InnerMethod m) {
  switch (m) {
    case InnerMethod::Cesaro: return "cesaro";
    case InnerMethod::Abel: return "abel";
    case InnerMethod::Holo: return "holo";
  }
  return "?";
}

InnerProductEstimate cesaro_inner(const std::vector<Complex>& w, const std::vector<Complex>& wp) {
  if (w.size() != wp.size()) fail(ErrorCode::DimMismatch, "cesaro_inner needs equal lengths");
  InnerProductEstimate est;
  est.method = InnerMethod::Cesaro;
  est.truncation = static_cast<long>(w.size());
  if (w.empty()) return est;
  Complex acc = 0.0;
  double ww = 0.0, pp = 0.0;
  for (size_t l = 0; l < w.size(); ++l) {
    acc += w[l] * std::conj(wp[l]);
    ww += std::norm(w[l]);
    pp += std::norm(wp[l]);
  }
  const double inv = 1.0 / static_cast<double>(w.size());
  est.value = acc * inv;
  check_cauchy_schwarz(est.value, ww * inv, pp * inv);
  return est;
}

long abel_truncation(double s, double max_prod) {
  if (!(s > 0.0 && s < 1.0)) fail(ErrorCode::ConfigError, "Abel radius must lie in (0, 1)");
  const double lead = (1.0 - s) * max_prod;
  if (lead < kAbelTarget) return 1;
  return std::max<long>(1, static_cast<long>(std::ceil(std::log(kAbelTarget / lead) / std::log(s))));
}

InnerProductEstimate abel_inner(const std::vector<Complex>& w, const std::vector<Complex>& wp, double s,
                                long N) {
  if (!(s > 0.0 && s < 1.0)) fail(ErrorCode::ConfigError, "Abel radius must lie in (0, 1)");
  const size_t avail = std::min(w.size(), wp.size());
  const double mp = max_product(w, wp, avail);
  const long need = abel_truncation(s, mp);
  if (N == 0) N = need;
  if (N < need || static_cast<size_t>(N) > avail)
    fail(ErrorCode::TruncationTooCoarse, "Abel sum needs " + std::to_string(need) + " terms, have " +
                                             std::to_string(std::min<size_t>(avail, N)));
  InnerProductEstimate est;
  est.method = InnerMethod::Abel;
  est.s = s;
  est.truncation = N;
  Complex acc = 0.0;
  double sp = 1.0;
  for (long l = 0; l < N; ++l, sp *= s) acc += sp * w[l] * std::conj(wp[l]);
  est.value = (1.0 - s) * acc;
  est.truncation_bound = std::pow(s, static_cast<double>(N)) * mp;
  return est;
}

InnerProductEstimate holo_inner(const std::vector<Complex>& w, const std::vector<Complex>& wp, double s,
                                long N, long M) {
  if (!(s > 0.0 && s < 1.0)) fail(ErrorCode::ConfigError, "radius must lie in (0, 1)");
  const size_t avail = std::min(w.size(), wp.size());
  const double mp = max_product(w, wp, avail);
  // |F|^2 on radius s pairs coefficients with weight s^{2l}.
  const long need = abel_truncation(s * s, mp);
  if (N == 0) N = need;
  if (N < need || static_cast<size_t>(N) > avail)
    fail(ErrorCode::TruncationTooCoarse, "power series needs " + std::to_string(need) + " terms");
  if (M <= 2 * N) fail(ErrorCode::QuadratureTooCoarse, "quadrature needs more than 2N nodes");
  const std::vector<Complex> F = circle_values(w, s, N, M);
  const std::vector<Complex> Fp = circle_values(wp, s, N, M);
  Complex acc = 0.0;
  for (long m = 0; m < M; ++m) acc += F[m] * std::conj(Fp[m]);
  InnerProductEstimate est;
  est.method = InnerMethod::Holo;
  est.s = s;
  est.truncation = N;
  est.quadrature = M;
  est.value = 2.0 * (1.0 - s) * acc / static_cast<double>(M);
  est.truncation_bound = 2.0 / (1.0 + s) * std::pow(s, 2.0 * N) * mp;
  return est;
}

Complex moving_average_M(long p, Complex lambda) {
  if (p < 1) fail(ErrorCode::ConfigError, "moving average length must be positive");
  const double phi = std::arg(lambda);
  const double pd = static_cast<double>(p);
  if (std::abs(1.0 - lambda) < 1e-8) {
    if (std::abs(pd * phi) < 1e-4)
      return unit_phase(0.5 * (pd - 1.0) * phi) * (1.0 - (pd * pd - 1.0) * phi * phi / 24.0);
    return unit_phase(0.5 * (pd - 1.0) * phi) * std::sin(0.5 * pd * phi) / (pd * std::sin(0.5 * phi));
  }
  const Complex lp = unit_phase(std::remainder(pd * phi, kTwoPi));
  return (1.0 - lp) / (pd * (1.0 - lambda));
}

MovingAverageSweep moving_average_sweep(long samples, long n_max, double c, std::uint64_t seed) {
  if (n_max < 2) fail(ErrorCode::ConfigError, "sweep needs n_max >= 2");
  RngStream rng(seed, 0, Purpose::Sweep);
  MovingAverageSweep out;
  out.samples = samples;
  out.c = c;
  out.min_ratio = 1e300;
  for (long i = 0; i < samples; ++i) {
    const long n = 2 + static_cast<long>(rng.uniform() * static_cast<double>(n_max - 1));
    // Half the draws uniform on the circle, half concentrated at the scale 1/n where the bound is tight.
    double phi;
    if (i % 2 == 0) {
      phi = kTwoPi * rng.uniform() - kPi;
    } else {
      phi = std::pow(10.0, -6.0 + 6.5 * rng.uniform()) / static_cast<double>(n);
      if (rng.uniform() < 0.5) phi = -phi;
    }
    const Complex lambda = unit_phase(phi);
    const double x = std::min(static_cast<double>(n) * std::abs(lambda - 1.0), 1.0);
    if (x == 0.0) continue;
    const double lhs = std::norm(moving_average_M(n, lambda));
    out.min_ratio = std::min(out.min_ratio, (1.0 - lhs) / (x * x));
    if (lhs > 1.0 - c * x * x) ++out.violations;
  }
  return out;
}

std::vector<long> alpha_grid(double alpha, int n, double delta) {
  const long a = alpha_power(alpha, n);
  const double window = std::pow(static_cast<double>(n), 1.0 - delta);
  const long half = static_cast<long>(std::floor(window / 2.0));
  const long full = static_cast<long>(std::floor(window));
  return {a - full, a - half, a, a + half, a + full};
}

MembershipReport f_membership_check(const ComplexVec& w, const ComplexVec& Vw, const SpectralState& state,
                                    const MembershipParams& params) {
  require_full(state);
  MembershipReport rep;
  rep.n = state.n;
  rep.grid = alpha_grid(params.alpha, state.n, params.delta);
  const ComplexVec eta = eigen_coords(state, w);
  const ComplexVec zeta = eigen_coords(state, Vw);
  const long b = alpha_power(params.gamma, state.n);
  for (long a : rep.grid) {
    const ComplexVec xi = power_phases(state, a).cwiseProduct(eta) - zeta;
    rep.norm_sup = std::max(rep.norm_sup, xi.norm());
    rep.component_sup = std::max(rep.component_sup, std::abs(against_shifted_basis(state, xi, b, params.l)));
  }
  const double nd = static_cast<double>(state.n);
  rep.component_threshold = params.C_component * std::pow(nd, -params.delta_prime);
  rep.norm_threshold = params.C_norm * std::pow(nd, 0.5 - params.delta_prime);
  rep.component_ok = rep.component_sup <= rep.component_threshold;
  rep.norm_ok = rep.norm_sup <= rep.norm_threshold;
  return rep;
}

}  // namespace isotower
