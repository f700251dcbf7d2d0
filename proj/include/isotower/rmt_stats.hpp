#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "isotower/types.hpp"

namespace isotower {

// sin(n t / 2) / (2 pi sin(t / 2)), n / 2pi on the diagonal.
double kernel_finite(double t, int n);

// sin(pi y) / (pi y), 1 at y = 0.
double kernel_sine(double y);

enum class KernelKind { Sine, Finite };

// det [K(y_i - y_j)] by LU with partial pivoting. For the finite kernel the points are angles.
double rho_r(const std::vector<double>& points, KernelKind kernel = KernelKind::Sine, int n = 0);

struct GapProbability {
  double probability = 0.0;  // P(no eigenvalue of u_n in [a, b])
  double bound = 1.0;        // exp(-(b - a) n / 2pi)
};

// Toeplitz determinant of the complement [0, 2pi) \ [a, b]: avoiding [a, b] means every
// eigenvalue lies in the complement, whose probability is at most exp(-|[a, b]| n / 2pi).
GapProbability gap_probability(int n, double a, double b);

// True when no angle falls in [a, b].
bool avoids_interval(const std::vector<double>& angles, double a, double b);

struct PointSample {
  std::vector<double> points;  // n theta / 2pi mapped into (-n/2, n/2], increasing
  int n = 0;
  std::uint64_t seed = 0;
};

PointSample make_point_sample(const std::vector<double>& angles, std::uint64_t seed = 0);

struct CorrelationHistogram {
  std::vector<double> edges;
  std::vector<double> counts;
  std::vector<double> density;  // per-pair density, 1 for an uncorrelated process
  std::vector<double> sigma;    // MC standard error of the density
  long samples = 0;
  int n = 0;
  double bin_width = 0.0;

  double center(size_t bin) const { return 0.5 * (edges[bin] + edges[bin + 1]); }
};

// 1 - sinc^2(pi d)
double pair_density_sine(double d);

// Per-bin (count, sum, sum of squares) over samples; merges are exact so partial
// accumulators from different workers combine in any grouping.
class PairCorrelationAccumulator {
 public:
  PairCorrelationAccumulator(double window, double bin_width);
  void add(const PointSample& sample);
  void merge(const PairCorrelationAccumulator& other);
  long samples() const { return samples_; }
  // InsufficientSamples below min_samples.
  CorrelationHistogram histogram(long min_samples = 1000) const;

 private:
  double window_;
  double width_;
  int n_ = 0;
  long samples_ = 0;
  std::vector<double> sum_;
  std::vector<double> sumsq_;
  std::vector<long> scratch_;
};

CorrelationHistogram empirical_pair_correlation(const std::vector<PointSample>& samples, double window,
                                                double bin_width);

struct TraceMomentRow {
  int j = 0;
  double mean = 0.0;   // estimate of E|tr u^j|^2
  double sigma = 0.0;  // standard error
  double target = 0.0; // exact value min(j, n)
};

class TraceMomentAccumulator {
 public:
  TraceMomentAccumulator(int n, int j_max);  // WindowViolation if 2 j_max > n
  void add(const std::vector<double>& angles);
  void merge(const TraceMomentAccumulator& other);
  long samples() const { return count_; }
  std::vector<TraceMomentRow> table() const;

 private:
  int n_;
  int j_max_;
  long count_ = 0;
  std::vector<double> sum_;
  std::vector<double> sumsq_;
};

std::vector<TraceMomentRow> trace_moments(const std::vector<std::vector<double>>& angle_samples, int j_max);

// Q(x) = 2 sum_{k >= 1} (-1)^{k-1} exp(-2 k^2 x^2)
double kolmogorov_q(double x);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
  long samples = 0;
  double mean = 0.0;
  double mean_sigma = 0.0;
};

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Two-sided KS of |<f_k, e_l>|^2 samples against Beta(1, n - 1): CDF 1 - (1 - x)^{n-1}.
KsResult beta_delocalization_test(const std::vector<double>& samples, int n, long min_samples = 1000);

// KS against Exp(1).
KsResult exponential_test(const std::vector<double>& samples, long min_samples = 1000);

// Per-step data needed for the almost-sure events: coefficients of the step n -> n+1
// together with the angles of u_n.
struct StepLog {
  int n = 0;
  std::vector<double> angles;
  double max_abs_mu = 0.0;
  double min_abs_mu = 0.0;
  double abs_nu = 0.0;
};

struct EventFlags {
  int n = 0;
  bool e0 = true;        // nu and all mu nonzero, angles distinct
  bool e1 = true;        // |nu| <= n^{-1/2 + eps}
  bool e2 = true;        // max |mu_k| <= n^{-1/2 + eps}
  bool e3_lower = true;  // min gap >= n^{-5/3 - eps}
  bool e3_upper = true;  // max gap <= n^{-1 + eps}
  double min_gap = 0.0;
  double max_gap = 0.0;
};

struct EventSummary {
  std::vector<EventFlags> flags;
  // Last dimension with a violation (0 if none); the event holds from one past it.
  int last_e0 = 0, last_e1 = 0, last_e2 = 0, last_e3_lower = 0, last_e3_upper = 0;
  int count_e0 = 0, count_e1 = 0, count_e2 = 0, count_e3_lower = 0, count_e3_upper = 0;
  // Smallest dimension with any violation (0 if none).
  int first_violation = 0;
};

// Gaps are consecutive angle differences on the circle, including the wrap-around one.
EventFlags event_flags(const StepLog& step, double eps);
EventSummary event_diagnostics(const std::vector<StepLog>& log, double eps);

}  // namespace isotower
