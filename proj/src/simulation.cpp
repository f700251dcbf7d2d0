#include "isotower/simulation.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "isotower/error.hpp"

namespace isotower {

const char* to_string(SimMode mode) { return mode == SimMode::Matrix ? "MATRIX" : "COEFF"; }

namespace {

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

SimMode sim_mode_from_string(const std::string& s) {
  const std::string u = upper(s);
  if (u == "MATRIX") return SimMode::Matrix;
  if (u == "COEFF") return SimMode::Coeff;
  fail(ErrorCode::ConfigError, "unknown mode '" + s + "' (MATRIX or COEFF)");
}

VecMode vec_mode_from_string(const std::string& s) {
  const std::string u = upper(s);
  if (u == "NONE") return VecMode::None;
  if (u == "COORDS") return VecMode::Coords;
  if (u == "FULL") return VecMode::Full;
  fail(ErrorCode::ConfigError, "unknown vector mode '" + s + "' (NONE, COORDS or FULL)");
}

int interlacing_violations(const std::vector<double>& old_angles, const std::vector<double>& new_angles) {
  const size_t n = old_angles.size();
  if (new_angles.size() != n + 1) return static_cast<int>(std::max(n + 1, new_angles.size()));
  int bad = 0;
  if (!(new_angles.front() > 0.0)) ++bad;
  if (!(new_angles.back() < kTwoPi)) ++bad;
  for (size_t j = 0; j < n; ++j) {
    if (!(new_angles[j] < old_angles[j])) ++bad;
    if (!(old_angles[j] < new_angles[j + 1])) ++bad;
  }
  return bad;
}

OracleCheck oracle_check(const SpectralState& state, const ComplexMat& u, const ComplexMat& u_prev,
                         const std::vector<double>& old_angles, const OracleTolerances& tol) {
  if (state.mode != VecMode::Full) fail(ErrorCode::ModeError, "oracle check needs full eigenvectors");
  const int n = state.n;
  if (u.rows() != n) fail(ErrorCode::DimMismatch, "dense matrix does not match the state");
  OracleCheck out;
  out.n = n;

  Eigen::ComplexEigenSolver<ComplexMat> es(u, true);
  std::vector<double> ang(n);
  for (int i = 0; i < n; ++i) {
    double t = std::arg(es.eigenvalues()(i));
    if (t < 0.0) t += kTwoPi;
    ang[i] = t;
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ang[a] < ang[b]; });
  for (int i = 0; i < n; ++i) {
    double d = std::abs(ang[order[i]] - state.angles[i]);
    d = std::min(d, kTwoPi - d);
    out.angle_error = std::max(out.angle_error, d);
    const ComplexVec v = es.eigenvectors().col(order[i]).normalized();
    const ComplexVec f = state.vecs.col(i);
    const Complex overlap = v.dot(f);
    const Complex align = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex(1.0);
    out.vector_error = std::max(out.vector_error, (f - align * v).cwiseAbs().maxCoeff());
  }
  const ComplexMat R = u * state.vecs - state.vecs * ComplexVec(
      Eigen::Map<const Eigen::VectorXd>(state.angles.data(), n).unaryExpr([](double t) {
        return unit_phase(t);
      })).asDiagonal();
  out.eigen_residual = R.colwise().norm().maxCoeff();

  if (n >= 2) {
    ComplexMat D = u;
    D.topLeftCorner(n - 1, n - 1) -= u_prev;
    D(n - 1, n - 1) -= 1.0;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<ComplexMat>(D).singularValues();
    out.rank_one_sigma2 = sv.size() > 1 ? sv(1) : 0.0;
    out.interlacing_violations = interlacing_violations(old_angles, state.angles);
  }
  out.passed = out.angle_error <= tol.angle && out.vector_error <= tol.vector &&
               out.rank_one_sigma2 <= tol.rank_one && out.interlacing_violations == 0;
  return out;
}

Trajectory::Trajectory(TrajectoryOptions options) : opt_(std::move(options)) {
  if (opt_.mode == SimMode::Matrix) {
    // Coefficients are read off the eigenbasis, so the full basis is always carried.
    opt_.vec_mode = VecMode::Full;
    if (opt_.oracle) opt_.dense = true;
  } else {
    opt_.dense = false;
    opt_.oracle = false;
  }
  if (opt_.L < 0) fail(ErrorCode::ConfigError, "L must be nonnegative");
  if (opt_.vec_mode == VecMode::Coords && opt_.L < 1) fail(ErrorCode::ConfigError, "COORDS mode needs L >= 1");
  for (int k : opt_.paths) paths_.emplace_back(k, opt_.L, opt_.keep_path_samples);
}

const EigenPath& Trajectory::path(int k) const {
  for (const auto& p : paths_)
    if (p.k() == k) return p;
  fail(ErrorCode::IndexUnresolvable, "path " + std::to_string(k) + " is not tracked");
}

const ComplexMat& Trajectory::dense() const {
  if (!opt_.dense) fail(ErrorCode::ModeError, "dense matrices are kept in MATRIX mode only");
  return tower_.u;
}

void Trajectory::init() {
  if (opt_.mode == SimMode::Matrix) {
    RngStream rng(opt_.seed, 0, Purpose::Sphere);
    const ComplexVec x = sample_sphere(1, rng);
    if (opt_.dense) extend_tower(tower_, x);
    state_ = initial_state(x(0), VecMode::Full);
  } else {
    RngStream rng(opt_.seed, 0, Purpose::Coeff);
    const ComplexVec x = sample_sphere(1, rng);
    state_ = initial_state(x(0), opt_.vec_mode, opt_.L);
  }
  for (auto& p : paths_)
    if (p.start_dim() == 1) p.start(state_);
}

UpdateCoeffs Trajectory::draw_coeffs(ComplexVec* x) {
  const int n = state_.n;
  if (opt_.mode == SimMode::Matrix) {
    RngStream rng(opt_.seed, n, Purpose::Sphere);
    *x = sample_sphere(n + 1, rng);
    return decompose_in_eigenbasis(*x, state_);
  }
  RngStream rng(opt_.seed, n, Purpose::Coeff);
  return sample_update_coeffs(n, rng);
}

void Trajectory::log_event(const UpdateCoeffs& c) {
  StepLog s;
  s.n = state_.n;
  s.angles = state_.angles;
  s.abs_nu = std::abs(c.nu);
  const Eigen::VectorXd a = c.mu.cwiseAbs();
  s.max_abs_mu = a.maxCoeff();
  s.min_abs_mu = a.minCoeff();
  events_.push_back(std::move(s));
}

StepRecord Trajectory::step() {
  const auto t0 = std::chrono::steady_clock::now();
  StepRecord rec;
  if (state_.n == 0) {
    init();
    rec.n = 1;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }
  if (opt_.mode == SimMode::Matrix && state_.n >= kMatrixModeMaxDim)
    fail(ErrorCode::ConfigError, "MATRIX mode is limited to n <= " + std::to_string(kMatrixModeMaxDim));
  ComplexVec x;
  rec.coeffs = draw_coeffs(&x);
  if (opt_.event_log) log_event(rec.coeffs);
  rec.old_angles = state_.angles;
  ComplexMat u_prev;
  if (opt_.dense) {
    if (opt_.oracle) u_prev = tower_.u;
    extend_tower(tower_, x);
  }
  rec.report = advance(state_, rec.coeffs, opt_.secular_tol);
  rec.n = state_.n;
  for (auto& p : paths_) p.record_step(rec.old_angles, state_, rec.coeffs, rec.report);
  if (opt_.oracle) rec.oracle = oracle_check(state_, tower_.u, u_prev, rec.old_angles);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

void Trajectory::run_to(int n_max) {
  while (state_.n < n_max) step();
}

void Trajectory::drop_vectors() {
  if (opt_.mode == SimMode::Matrix) fail(ErrorCode::ModeError, "MATRIX mode needs the eigenbasis");
  opt_.vec_mode = VecMode::None;
  opt_.L = 0;
  state_.mode = VecMode::None;
  state_.L = 0;
  state_.vecs.resize(0, 0);
}

Checkpoint Trajectory::checkpoint() const {
  Checkpoint cp;
  cp.options = opt_;
  cp.state = state_;
  for (const auto& p : paths_) {
    cp.path_current.push_back(p.current());
    cp.path_started.push_back(p.started());
  }
  return cp;
}

Trajectory Trajectory::restore(const Checkpoint& cp) {
  Trajectory t(cp.options);
  t.state_ = cp.state;
  if (cp.path_current.size() != t.paths_.size() || cp.path_started.size() != t.paths_.size())
    fail(ErrorCode::ConfigError, "checkpoint path data does not match the tracked paths");
  for (size_t i = 0; i < t.paths_.size(); ++i) t.paths_[i].restore(cp.path_current[i], cp.path_started[i]);
  if (t.opt_.dense) {
    // The sphere draws are keyed by dimension, so the tower replays exactly.
    for (int m = 0; m < t.state_.n; ++m) {
      RngStream rng(t.opt_.seed, m, Purpose::Sphere);
      extend_tower(t.tower_, sample_sphere(m + 1, rng));
    }
  }
  return t;
}

std::vector<double> sample_spectrum(std::uint64_t seed, int n, SimMode mode) {
  TrajectoryOptions o;
  o.seed = seed;
  o.mode = mode;
  o.dense = false;
  Trajectory t(o);
  t.run_to(n);
  return t.state().angles;
}

}  // namespace isotower
