#include "isotower/rmt_stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isotower/error.hpp"

namespace isotower {

double kernel_finite(double t, int n) {
  const double s = std::sin(0.5 * t);
  if (std::abs(s) < 1e-300 || std::abs(std::remainder(t, kTwoPi)) < 1e-12) {
    // Continuous extension; t near 2pi m picks up the sign (-1)^{m(n-1)}.
    const long m = std::lround(t / kTwoPi);
    const double sign = (m * static_cast<long>(n - 1)) % 2 == 0 ? 1.0 : -1.0;
    return sign * n / kTwoPi;
  }
  return std::sin(0.5 * n * t) / (kTwoPi * s);
}

double kernel_sine(double y) {
  if (y == 0.0) return 1.0;
  const double x = kPi * y;
  return std::sin(x) / x;
}

double rho_r(const std::vector<double>& points, KernelKind kernel, int n) {
  const int r = static_cast<int>(points.size());
  if (r < 1) fail(ErrorCode::ConfigError, "rho_r needs at least one point");
  RealMat K(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      const double d = points[i] - points[j];
      K(i, j) = kernel == KernelKind::Sine ? kernel_sine(d) : kernel_finite(d, n);
    }
  return K.partialPivLu().determinant();
}

GapProbability gap_probability(int n, double a, double b) {
  if (n < 1) fail(ErrorCode::ConfigError, "gap_probability needs n >= 1");
  if (!(std::isfinite(a) && std::isfinite(b)) || a < 0.0 || b > kTwoPi || a > b)
    fail(ErrorCode::DegenerateInterval, "interval must satisfy 0 <= a <= b <= 2pi");
  GapProbability g;
  const double len = b - a;
  g.bound = std::exp(-len * n / kTwoPi);
  if (len == 0.0) {
    g.probability = 1.0;
    return g;
  }
  if (len >= kTwoPi) {
    g.probability = 0.0;
    return g;
  }
  // Entries of M^J over J = [0, 2pi) \ [a, b]: delta_{jk} minus the integral over [a, b].
  ComplexMat M(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const int m = j - k;
      if (m == 0) {
        M(j, k) = 1.0 - len / kTwoPi;
      } else {
        const Complex diff = unit_phase(std::remainder(m * b, kTwoPi)) - unit_phase(std::remainder(m * a, kTwoPi));
        M(j, k) = -diff / Complex(0.0, kTwoPi * m);
      }
    }
  g.probability = std::max(0.0, M.partialPivLu().determinant().real());
  if (g.probability > g.bound + 1e-12)
    fail(ErrorCode::IllConditioned, "gap probability exceeds its exponential bound");
  return g;
}

bool avoids_interval(const std::vector<double>& angles, double a, double b) {
  for (double t : angles)
    if (t >= a && t <= b) return false;
  return true;
}

PointSample make_point_sample(const std::vector<double>& angles, std::uint64_t seed) {
  PointSample s;
  s.n = static_cast<int>(angles.size());
  s.seed = seed;
  const double half = 0.5 * s.n;
  s.points.reserve(angles.size());
  for (double t : angles) {
    double x = s.n * t / kTwoPi;
    if (x > half) x -= s.n;
    s.points.push_back(x);
  }
  std::sort(s.points.begin(), s.points.end());
  return s;
}

double pair_density_sine(double d) {
  const double k = kernel_sine(d);
  return 1.0 - k * k;
}

PairCorrelationAccumulator::PairCorrelationAccumulator(double window, double bin_width)
    : window_(window), width_(bin_width) {
  if (!(window > 0.0 && bin_width > 0.0)) fail(ErrorCode::ConfigError, "window and bin width must be positive");
  const size_t bins = static_cast<size_t>(std::lround(window / bin_width));
  if (bins == 0) fail(ErrorCode::ConfigError, "window narrower than one bin");
  sum_.assign(bins, 0.0);
  sumsq_.assign(bins, 0.0);
  scratch_.assign(bins, 0);
}

void PairCorrelationAccumulator::add(const PointSample& sample) {
  if (n_ == 0) n_ = sample.n;
  if (sample.n != n_) fail(ErrorCode::DimMismatch, "samples from different dimensions");
  std::fill(scratch_.begin(), scratch_.end(), 0);
  const double n = static_cast<double>(n_);
  const size_t bins = scratch_.size();
  const auto& p = sample.points;
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = i + 1; j < p.size(); ++j) {
      double d = p[j] - p[i];
      d = std::min(d, n - d);
      if (d > window_) continue;
      const size_t b = static_cast<size_t>(d / width_);
      if (b < bins) ++scratch_[b];
    }
  for (size_t b = 0; b < bins; ++b) {
    const double c = static_cast<double>(scratch_[b]);
    sum_[b] += c;
    sumsq_[b] += c * c;
  }
  ++samples_;
}

void PairCorrelationAccumulator::merge(const PairCorrelationAccumulator& other) {
  if (other.samples_ == 0) return;
  if (other.sum_.size() != sum_.size() || other.width_ != width_)
    fail(ErrorCode::DimMismatch, "histograms with different binning");
  if (n_ == 0) n_ = other.n_;
  if (other.n_ != n_) fail(ErrorCode::DimMismatch, "samples from different dimensions");
  for (size_t b = 0; b < sum_.size(); ++b) {
    sum_[b] += other.sum_[b];
    sumsq_[b] += other.sumsq_[b];
  }
  samples_ += other.samples_;
}

CorrelationHistogram PairCorrelationAccumulator::histogram(long min_samples) const {
  if (samples_ < std::max(2L, min_samples))
    fail(ErrorCode::InsufficientSamples,
         "pair correlation needs " + std::to_string(min_samples) + " samples, have " + std::to_string(samples_));
  CorrelationHistogram h;
  h.samples = samples_;
  h.n = n_;
  h.bin_width = width_;
  const size_t bins = sum_.size();
  const double S = static_cast<double>(samples_);
  const double norm = 1.0 / (n_ * width_);
  for (size_t b = 0; b <= bins; ++b) h.edges.push_back(b * width_);
  for (size_t b = 0; b < bins; ++b) {
    const double mean = sum_[b] / S;
    const double var = std::max(0.0, (sumsq_[b] - S * mean * mean) / (S - 1.0));
    h.counts.push_back(sum_[b]);
    h.density.push_back(mean * norm);
    h.sigma.push_back(std::sqrt(var / S) * norm);
  }
  return h;
}

CorrelationHistogram empirical_pair_correlation(const std::vector<PointSample>& samples, double window,
                                                double bin_width) {
  PairCorrelationAccumulator acc(window, bin_width);
  for (const auto& s : samples) acc.add(s);
  return acc.histogram();
}

TraceMomentAccumulator::TraceMomentAccumulator(int n, int j_max) : n_(n), j_max_(j_max) {
  if (j_max < 1) fail(ErrorCode::ConfigError, "trace moments start at j = 1");
  if (2 * j_max > n)
    fail(ErrorCode::WindowViolation, "2 j_max = " + std::to_string(2 * j_max) + " exceeds n = " + std::to_string(n));
  sum_.assign(j_max, 0.0);
  sumsq_.assign(j_max, 0.0);
}

void TraceMomentAccumulator::add(const std::vector<double>& angles) {
  if (static_cast<int>(angles.size()) != n_) fail(ErrorCode::DimMismatch, "sample dimension differs");
  for (int j = 1; j <= j_max_; ++j) {
    Complex tr = 0.0;
    for (double t : angles) tr += unit_phase(std::remainder(j * t, kTwoPi));
    const double v = std::norm(tr);
    sum_[j - 1] += v;
    sumsq_[j - 1] += v * v;
  }
  ++count_;
}

void TraceMomentAccumulator::merge(const TraceMomentAccumulator& other) {
  if (other.n_ != n_ || other.j_max_ != j_max_) fail(ErrorCode::DimMismatch, "trace tables differ");
  for (int j = 0; j < j_max_; ++j) {
    sum_[j] += other.sum_[j];
    sumsq_[j] += other.sumsq_[j];
  }
  count_ += other.count_;
}

std::vector<TraceMomentRow> TraceMomentAccumulator::table() const {
  if (count_ < 2) fail(ErrorCode::InsufficientSamples, "trace moments need at least two samples");
  std::vector<TraceMomentRow> rows;
  const double S = static_cast<double>(count_);
  for (int j = 1; j <= j_max_; ++j) {
    TraceMomentRow r;
    r.j = j;
    r.mean = sum_[j - 1] / S;
    const double var = std::max(0.0, (sumsq_[j - 1] - S * r.mean * r.mean) / (S - 1.0));
    r.sigma = std::sqrt(var / S);
    r.target = std::min(j, n_);
    rows.push_back(r);
  }
  return rows;
}

std::vector<TraceMomentRow> trace_moments(const std::vector<std::vector<double>>& angle_samples, int j_max) {
  if (angle_samples.empty()) fail(ErrorCode::InsufficientSamples, "no samples");
  TraceMomentAccumulator acc(static_cast<int>(angle_samples.front().size()), j_max);
  for (const auto& a : angle_samples) acc.add(a);
  return acc.table();
}

double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // Theta-function form, fast for small arguments.
    const double y = -kPi * kPi / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k <= 7; k += 2) s += std::exp(y * k * k);
    return std::clamp(1.0 - std::sqrt(kTwoPi) / x * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

namespace {

double stephens(double n_eff, double d) {
  const double r = std::sqrt(n_eff);
  return kolmogorov_q((r + 0.12 + 0.11 / r) * d);
}

void fill_mean(KsResult& res, const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double s = 0.0, ss = 0.0;
  for (double v : x) s += v;
  res.mean = s / n;
  for (double v : x) ss += (v - res.mean) * (v - res.mean);
  res.mean_sigma = x.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
}

}  // namespace

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) fail(ErrorCode::InsufficientSamples, "KS test needs samples");
  KsResult res;
  res.samples = static_cast<long>(samples.size());
  fill_mean(res, samples);
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  res.statistic = d;
  res.p_value = stephens(n, d);
  return res;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::InsufficientSamples, "KS test needs samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  KsResult res;
  res.samples = static_cast<long>(a.size() + b.size());
  res.statistic = d;
  res.p_value = stephens(na * nb / (na + nb), d);
  fill_mean(res, a);
  return res;
}

KsResult beta_delocalization_test(const std::vector<double>& samples, int n, long min_samples) {
  if (static_cast<long>(samples.size()) < min_samples)
    fail(ErrorCode::InsufficientSamples, "delocalization test needs " + std::to_string(min_samples) + " samples");
  if (n < 2) fail(ErrorCode::ConfigError, "Beta(1, n - 1) needs n >= 2");
  const double e = n - 1.0;
  return ks_test(samples, [e](double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return -std::expm1(e * std::log1p(-x));
  });
}

KsResult exponential_test(const std::vector<double>& samples, long min_samples) {
  if (static_cast<long>(samples.size()) < min_samples)
    fail(ErrorCode::InsufficientSamples, "exponential test needs " + std::to_string(min_samples) + " samples");
  return ks_test(samples, [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); });
}

EventFlags event_flags(const StepLog& step, double eps) {
  EventFlags f;
  f.n = step.n;
  const double n = static_cast<double>(step.n);
  const double scale = std::pow(n, -0.5 + eps);
  std::vector<double> a = step.angles;
  std::sort(a.begin(), a.end());
  if (a.empty()) {
    f.min_gap = f.max_gap = kTwoPi;
  } else {
    f.min_gap = f.max_gap = kTwoPi - a.back() + a.front();
    for (size_t i = 1; i < a.size(); ++i) {
      const double g = a[i] - a[i - 1];
      f.min_gap = std::min(f.min_gap, g);
      f.max_gap = std::max(f.max_gap, g);
    }
  }
  f.e0 = step.abs_nu > 0.0 && step.min_abs_mu > 0.0 && f.min_gap > 0.0;
  f.e1 = step.abs_nu <= scale;
  f.e2 = step.max_abs_mu <= scale;
  f.e3_lower = f.min_gap >= std::pow(n, -5.0 / 3.0 - eps);
  f.e3_upper = f.max_gap <= std::pow(n, -1.0 + eps);
  return f;
}

EventSummary event_diagnostics(const std::vector<StepLog>& log, double eps) {
  EventSummary s;
  auto note = [&s](bool ok, int n, int& last, int& count) {
    if (ok) return;
    last = std::max(last, n);
    ++count;
    if (s.first_violation == 0 || n < s.first_violation) s.first_violation = n;
  };
  for (const StepLog& step : log) {
    const EventFlags f = event_flags(step, eps);
    note(f.e0, f.n, s.last_e0, s.count_e0);
    note(f.e1, f.n, s.last_e1, s.count_e1);
    note(f.e2, f.n, s.last_e2, s.count_e2);
    note(f.e3_lower, f.n, s.last_e3_lower, s.count_e3_lower);
    note(f.e3_upper, f.n, s.last_e3_upper, s.count_e3_upper);
    s.flags.push_back(f);
  }
  return s;
}

}  // namespace isotower
