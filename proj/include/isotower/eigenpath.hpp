#pragma once

#include <vector>

#include "isotower/haar.hpp"
#include "isotower/rng.hpp"
#include "isotower/spectral.hpp"
#include "isotower/types.hpp"

namespace isotower {

// n theta_k / 2pi with theta_k = theta_{k+n} - 2pi for k <= 0.
double scaled_angle(const SpectralState& state, int k);

// theta'_k |mu_k|^2 / (theta_k - theta'_k) for k >= 1; for k <= 0 the mirror image
// (2pi - theta'_k) |mu_k|^2 / (theta'_k - theta_k) measured from the top of the circle.
double ratio_diagnostic(const std::vector<double>& old_angles, const std::vector<double>& new_angles,
                        const UpdateCoeffs& coeffs, int k);

// sqrt(n) e^{i phase} <f_k, e_l>, l = 1..L. phase is the running argument of D_k.
std::vector<Complex> t_coords(const SpectralState& state, int k, int L, double phase);

struct PathSample {
  int n = 0;
  double scaled_angle = 0.0;
  double log_abs_D = 0.0;
  double phase = 0.0;       // argument of D_k^{(n)}
  double martingale = 0.0;  // M_k^{(n)}
  double ratio = 0.0;       // ratio diagnostic of the step into n (0 at the first sample)
  std::vector<Complex> coords;  // <f_k^{(n)}, e_l>, l = 1..L (as far as tracked)

  double abs_D() const;
  Complex D() const;
  std::vector<Complex> g() const;  // D_k^{(n)} <f_k, e_l>
  std::vector<Complex> t() const;  // sqrt(n) e^{i phase} <f_k, e_l>
};

// Trajectory of one signed index k through the dimensions. D_k starts at 1 at the first
// dimension where k is resolvable (n = k for k >= 1, n = 1 - k for k <= 0) and is updated by
//   D_k^{(n+1)} = D_k^{(n)} h_k^{1/2} (lambda_k^{(n)} - lambda_k^{(n+1)}) / mu_k^{(n)},
// kept as log|D| plus a phase.
class EigenPath {
 public:
  explicit EigenPath(int k, int L = 0, bool keep_samples = true);

  int k() const { return k_; }
  int L() const { return L_; }
  int start_dim() const { return k_ >= 1 ? k_ : 1 - k_; }
  bool started() const { return started_; }

  // Called once at n = start_dim().
  void start(const SpectralState& state);

  // Step n -> n+1. `after` is the state at n+1; the report and coefficients are those of
  // the step. Starts the path automatically when after.n == start_dim().
  void record_step(const std::vector<double>& old_angles, const SpectralState& after,
                   const UpdateCoeffs& coeffs, const SecularSolveReport& report);

  double log_abs_D() const { return log_abs_D_; }
  double phase() const { return phase_; }
  Complex D() const;
  double martingale() const { return martingale_; }
  const PathSample& current() const { return current_; }
  const std::vector<PathSample>& samples() const { return samples_; }

  double y_estimate() const { return current_.scaled_angle; }
  // |D_k^{(n)}|^2 / n at the last sample.
  double D_limit_estimate() const;

  // Restores the running state from a checkpoint.
  void restore(const PathSample& current, bool started);

 private:
  PathSample sample(const SpectralState& state) const;

  int k_;
  int L_;
  bool keep_;
  bool started_ = false;
  double log_abs_D_ = 0.0;
  double phase_ = 0.0;
  double martingale_ = 0.0;
  PathSample current_;
  std::vector<PathSample> samples_;
};

// The multiplicative D factor of one step for signed index k, split as log-modulus and phase.
struct DFactor {
  double log_abs = 0.0;
  double phase = 0.0;
};
DFactor d_factor(const std::vector<double>& old_angles, const UpdateCoeffs& coeffs,
                 const SecularSolveReport& report, int k);

struct PhaseTestResult {
  Complex previous;            // <g_k^{(n)}, e_l>
  Complex mean;                // mean of <g_k^{(n+1)}, e_l> over phase redraws
  double sigma = 0.0;          // Monte Carlo standard error of the mean
  double variance = 0.0;       // empirical variance over redraws
  double variance_exact = 0.0; // conditional variance from the closed form
  double variance_bound = 0.0; // same with |<f_j, e_l>|^2 replaced by 1
  double variance_sigma = 0.0; // standard error of the empirical variance
  int trials = 0;
};

// Holds |mu_j|, nu and the spectrum of u_n fixed, redraws the phases of mu_j uniformly and
// recomputes <g_k^{(n+1)}, e_l>. With redraw = false the drawn phases are kept (one trial).
PhaseTestResult martingale_phase_test(const SpectralState& state, const UpdateCoeffs& coeffs, Complex D,
                                      RngStream& rng, int k, int l, int trials, bool redraw = true);

// Maps the eigenvector f_k^{(N)} back to the eigenbasis at a lower dimension m: given the
// step data (angles before each step, coefficients, reports) for m..N-1, returns v with
// f_k^{(N)}[1..m] = F^{(m)} v. Each level costs O(level^2).
class BackPropagator {
 public:
  void push(std::vector<double> old_angles, UpdateCoeffs coeffs, SecularSolveReport report);
  int from_dim() const;
  int to_dim() const;
  // Coordinates of f_k^{(to_dim)} (signed k) in the eigenbasis at from_dim.
  ComplexVec coefficients(int k) const;

 private:
  struct Level {
    std::vector<double> angles;
    UpdateCoeffs coeffs;
    SecularSolveReport report;
  };
  std::vector<Level> levels_;
};

}  // namespace isotower
