#include "isotower/eigenpath.hpp"

#include <cmath>
#include <string>

#include "isotower/error.hpp"
#include "secular_kernel.hpp"

namespace isotower {

namespace {

// lambda_a - lambda_b = 2i e^{i(a+b)/2} sin((a-b)/2), without the cancellation of the direct form.
Complex phase_difference(double a, double b) {
  return Complex(0.0, 2.0) * unit_phase(0.5 * (a + b)) * std::sin(0.5 * (a - b));
}

int old_position(int n, int k) {
  if (k >= 1 ? k > n : k + n < 1)
    fail(ErrorCode::IndexUnresolvable, "index " + std::to_string(k) + " at n = " + std::to_string(n));
  return k >= 1 ? k - 1 : k + n - 1;
}

// Position of lambda_k^{(n+1)} in the new ladder.
int new_position(int n, int k) { return k >= 1 ? k - 1 : k + n; }

}  // namespace

double scaled_angle(const SpectralState& state, int k) { return state.n * state.angle(k) / kTwoPi; }

double ratio_diagnostic(const std::vector<double>& old_angles, const std::vector<double>& new_angles,
                        const UpdateCoeffs& coeffs, int k) {
  const int n = static_cast<int>(old_angles.size());
  const int po = old_position(n, k);
  const int pn = new_position(n, k);
  const double th = old_angles[po];
  const double t = new_angles[pn];
  const double mu2 = std::norm(coeffs.mu(po));
  if (k >= 1) return t * mu2 / (th - t);
  return (kTwoPi - t) * mu2 / (t - th);
}

std::vector<Complex> t_coords(const SpectralState& state, int k, int L, double phase) {
  if (state.mode == VecMode::None || state.vecs.size() == 0)
    fail(ErrorCode::ModeError, "t_coords needs eigenvector coordinates");
  const int pos = state.position(k);
  const int rows = std::min<int>(L, static_cast<int>(state.vecs.rows()));
  const Complex scale = std::sqrt(static_cast<double>(state.n)) * unit_phase(phase);
  std::vector<Complex> t(rows);
  for (int l = 0; l < rows; ++l) t[l] = scale * state.vecs(l, pos);
  return t;
}

double PathSample::abs_D() const { return std::exp(log_abs_D); }

Complex PathSample::D() const { return std::polar(abs_D(), phase); }

std::vector<Complex> PathSample::g() const {
  const Complex d = D();
  std::vector<Complex> out(coords.size());
  for (size_t l = 0; l < coords.size(); ++l) out[l] = d * coords[l];
  return out;
}

std::vector<Complex> PathSample::t() const {
  const Complex scale = std::sqrt(static_cast<double>(n)) * unit_phase(phase);
  std::vector<Complex> out(coords.size());
  for (size_t l = 0; l < coords.size(); ++l) out[l] = scale * coords[l];
  return out;
}

DFactor d_factor(const std::vector<double>& old_angles, const UpdateCoeffs& coeffs,
                 const SecularSolveReport& report, int k) {
  const int n = static_cast<int>(old_angles.size());
  const int po = old_position(n, k);
  const int pn = new_position(n, k);
  const Complex mu = coeffs.mu(po);
  // k >= 1: theta_k is the right pole of the new root's arc; k <= 0: the left pole.
  const double gap = k >= 1 ? report.gap_right[pn] : report.gap_left[pn];
  DFactor f;
  f.log_abs = 0.5 * std::log(report.h[pn]) + std::log(2.0 * std::sin(0.5 * gap)) - std::log(std::abs(mu));
  f.phase = (k >= 1 ? 0.5 : -0.5) * kPi + 0.5 * (old_angles[po] + report.angles[pn]) - std::arg(mu);
  return f;
}

EigenPath::EigenPath(int k, int L, bool keep_samples) : k_(k), L_(L), keep_(keep_samples) {}

Complex EigenPath::D() const { return std::polar(std::exp(log_abs_D_), phase_); }

double EigenPath::D_limit_estimate() const {
  return std::exp(2.0 * log_abs_D_) / static_cast<double>(current_.n);
}

PathSample EigenPath::sample(const SpectralState& state) const {
  PathSample s;
  s.n = state.n;
  s.scaled_angle = scaled_angle(state, k_);
  s.log_abs_D = log_abs_D_;
  s.phase = phase_;
  s.martingale = martingale_;
  if (state.mode != VecMode::None && state.vecs.size() > 0) {
    const int pos = state.position(k_);
    const int rows = std::min<int>(L_, static_cast<int>(state.vecs.rows()));
    s.coords.resize(rows);
    for (int l = 0; l < rows; ++l) s.coords[l] = state.vecs(l, pos);
  }
  return s;
}

void EigenPath::start(const SpectralState& state) {
  if (state.n != start_dim())
    fail(ErrorCode::IndexUnresolvable, "path " + std::to_string(k_) + " starts at n = " +
                                           std::to_string(start_dim()));
  started_ = true;
  log_abs_D_ = 0.0;
  phase_ = 0.0;
  martingale_ = 0.0;
  current_ = sample(state);
  samples_.clear();
  if (keep_) samples_.push_back(current_);
}

void EigenPath::record_step(const std::vector<double>& old_angles, const SpectralState& after,
                            const UpdateCoeffs& coeffs, const SecularSolveReport& report) {
  if (!started_) {
    if (after.n == start_dim()) start(after);
    return;
  }
  const int n = static_cast<int>(old_angles.size());
  const DFactor f = d_factor(old_angles, coeffs, report, k_);
  log_abs_D_ += f.log_abs;
  phase_ = std::remainder(phase_ + f.phase, kTwoPi);
  martingale_ += std::norm(coeffs.mu(old_position(n, k_))) - 1.0 / n;
  current_ = sample(after);
  current_.ratio = ratio_diagnostic(old_angles, report.angles, coeffs, k_);
  if (keep_) samples_.push_back(current_);
}

void EigenPath::restore(const PathSample& current, bool started) {
  started_ = started;
  current_ = current;
  log_abs_D_ = current.log_abs_D;
  phase_ = current.phase;
  martingale_ = current.martingale;
  samples_.clear();
  if (keep_ && started) samples_.push_back(current_);
}

PhaseTestResult martingale_phase_test(const SpectralState& state, const UpdateCoeffs& coeffs, Complex D,
                                      RngStream& rng, int k, int l, int trials, bool redraw) {
  if (state.mode != VecMode::Full || state.vecs.rows() != state.n)
    fail(ErrorCode::ModeError, "martingale_phase_test needs full eigenvectors");
  if (l < 1 || l > state.n) fail(ErrorCode::DimMismatch, "coordinate index out of range");
  if (!redraw) trials = 1;
  if (trials < 1) fail(ErrorCode::ConfigError, "trials must be positive");
  const int n = state.n;
  const int po = old_position(n, k);
  const SecularSolveReport rep = solve_secular(state, coeffs);
  const double t = rep.angles[new_position(n, k)];

  // c_j = f_j[l] / (lambda_j - lambda'_k); the sum over j carries the phases.
  std::vector<Complex> c(n);
  for (int j = 0; j < n; ++j) c[j] = state.vecs(l - 1, j) / phase_difference(state.angles[j], t);
  const Complex lead = D * phase_difference(state.angles[po], t);

  PhaseTestResult res;
  res.trials = trials;
  res.previous = D * state.vecs(l - 1, po);
  std::vector<Complex> draws(trials);
  std::vector<Complex> mu(n);
  for (int trial = 0; trial < trials; ++trial) {
    for (int j = 0; j < n; ++j)
      mu[j] = redraw ? std::abs(coeffs.mu(j)) * unit_phase(kTwoPi * rng.uniform()) : coeffs.mu(j);
    Complex sum = 0.0;
    for (int j = 0; j < n; ++j) sum += mu[j] * c[j];
    draws[trial] = lead / mu[po] * sum;
  }
  Complex mean = 0.0;
  for (const Complex& x : draws) mean += x;
  mean /= static_cast<double>(trials);
  double m2 = 0.0, m4 = 0.0;
  for (const Complex& x : draws) {
    const double d2 = std::norm(x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  res.mean = mean;
  if (trials > 1) {
    res.variance = m2 / (trials - 1);
    res.sigma = std::sqrt(res.variance / trials);
    const double mean4 = m4 / trials;
    res.variance_sigma = std::sqrt(std::max(0.0, mean4 - res.variance * res.variance) / trials);
  }
  const double scale = std::norm(lead) / std::norm(coeffs.mu(po));
  for (int j = 0; j < n; ++j) {
    if (j == po) continue;
    const double q = std::norm(coeffs.mu(j)) / std::norm(phase_difference(state.angles[j], t));
    res.variance_exact += scale * q * std::norm(state.vecs(l - 1, j));
    res.variance_bound += scale * q;
  }
  return res;
}

void BackPropagator::push(std::vector<double> old_angles, UpdateCoeffs coeffs, SecularSolveReport report) {
  if (!levels_.empty() && static_cast<int>(old_angles.size()) != to_dim())
    fail(ErrorCode::DimMismatch, "back-propagation levels must be consecutive");
  levels_.push_back(Level{std::move(old_angles), std::move(coeffs), std::move(report)});
}

int BackPropagator::from_dim() const {
  return levels_.empty() ? 0 : static_cast<int>(levels_.front().angles.size());
}

int BackPropagator::to_dim() const {
  return levels_.empty() ? 0 : static_cast<int>(levels_.back().angles.size()) + 1;
}

ComplexVec BackPropagator::coefficients(int k) const {
  if (levels_.empty()) fail(ErrorCode::ConfigError, "no levels recorded");
  const int top = to_dim();
  ComplexVec v = ComplexVec::Zero(top);
  v(k >= 1 ? k - 1 : k + top - 1) = 1.0;
  std::vector<double> r;
  for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
    const int m = static_cast<int>(it->angles.size());
    const detail::SecularKernel K(it->angles, it->coeffs);
    r.resize(m + 1);
    ComplexVec acc = ComplexVec::Zero(m);
    for (int kk = 1; kk <= m + 1; ++kk) {
      const Complex u = detail::SecularKernel::kappa(it->report.angles[kk - 1]) /
                        std::sqrt(it->report.h[kk - 1]) * v(kk - 1);
      if (u == 0.0) continue;
      K.column(kk, detail::ArcPoint{it->report.gap_left[kk - 1], it->report.gap_right[kk - 1]}, r.data());
      for (int j = 1; j <= m; ++j) acc(j - 1) += r[j] * u;
    }
    for (int j = 1; j <= m; ++j) acc(j - 1) *= K.scaled_coeff(j);
    v = std::move(acc);
  }
  return v;
}

}  // namespace isotower
