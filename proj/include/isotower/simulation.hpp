#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isotower/eigenpath.hpp"
#include "isotower/haar.hpp"
#include "isotower/rmt_stats.hpp"
#include "isotower/spectral.hpp"

namespace isotower {

// MATRIX: x_{n+1} drawn on the sphere, coefficients read off in the eigenbasis, dense u_n
// optionally kept. COEFF: coefficients drawn directly, no matrices.
enum class SimMode { Matrix, Coeff };

const char* to_string(SimMode mode);
SimMode sim_mode_from_string(const std::string& s);
VecMode vec_mode_from_string(const std::string& s);

inline constexpr int kMatrixModeMaxDim = 512;

struct TrajectoryOptions {
  std::uint64_t seed = 0;
  SimMode mode = SimMode::Coeff;
  VecMode vec_mode = VecMode::None;
  int L = 0;
  std::vector<int> paths;      // signed indices to follow
  bool keep_path_samples = false;
  bool dense = true;           // MATRIX mode: maintain the dense u_n
  bool oracle = false;         // MATRIX mode: dense eigensolver comparison at each step
  bool event_log = false;
  double secular_tol = kDefaultSecularTol;
};

struct OracleTolerances {
  double angle = 1e-9;
  double vector = 1e-7;
  double rank_one = 1e-10;
};

struct OracleCheck {
  int n = 0;
  double angle_error = 0.0;
  double vector_error = 0.0;       // after per-column phase alignment
  double eigen_residual = 0.0;     // max ||u f - lambda f||
  double rank_one_sigma2 = 0.0;    // second singular value of u_n - diag(u_{n-1}, 1)
  int interlacing_violations = 0;
  bool passed = false;
};

// Dense comparison of the spectral state against the matrix u_n, given the previous dense
// matrix and angles.
OracleCheck oracle_check(const SpectralState& state, const ComplexMat& u, const ComplexMat& u_prev,
                         const std::vector<double>& old_angles, const OracleTolerances& tol = {});

// Number of violations of 0 < t_1 < theta_1 < t_2 < ... < theta_n < t_{n+1} < 2pi.
int interlacing_violations(const std::vector<double>& old_angles, const std::vector<double>& new_angles);

struct StepRecord {
  int n = 0;                         // dimension after the step
  std::vector<double> old_angles;    // angles at n - 1
  UpdateCoeffs coeffs;
  SecularSolveReport report;
  std::optional<OracleCheck> oracle;
  double seconds = 0.0;
};

struct Checkpoint {
  TrajectoryOptions options;
  SpectralState state;
  std::vector<PathSample> path_current;
  std::vector<bool> path_started;
};

class Trajectory {
 public:
  explicit Trajectory(TrajectoryOptions options);

  const TrajectoryOptions& options() const { return opt_; }
  int n() const { return state_.n; }
  const SpectralState& state() const { return state_; }
  const std::vector<EigenPath>& paths() const { return paths_; }
  const EigenPath& path(int k) const;
  // Dense u_n (MATRIX mode with dense = true).
  const ComplexMat& dense() const;
  const std::vector<StepLog>& event_log() const { return events_; }

  // Advances by one dimension (the first call creates u_1).
  StepRecord step();
  void run_to(int n_max);
  // Continues angle-only from here; the random draws do not depend on the vector mode.
  void drop_vectors();

  Checkpoint checkpoint() const;
  static Trajectory restore(const Checkpoint& cp);

 private:
  void init();
  UpdateCoeffs draw_coeffs(ComplexVec* x);
  void log_event(const UpdateCoeffs& c);

  TrajectoryOptions opt_;
  SpectralState state_;
  MatrixTower tower_;
  std::vector<EigenPath> paths_;
  std::vector<StepLog> events_;
};

// Angles of u_n after one trajectory; shorthand for ensembles of spectra.
std::vector<double> sample_spectrum(std::uint64_t seed, int n, SimMode mode = SimMode::Coeff);

}  // namespace isotower
