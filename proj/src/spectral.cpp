#include "isotower/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isotower/error.hpp"
#include "secular_kernel.hpp"

namespace isotower {

namespace {

// Rows tracked this cheaply are updated with dot products inside the root loop;
// larger blocks go through one real matrix product per step.
constexpr Eigen::Index kFusedRows = 8;

// B * R for complex B and real R, done as a real product on the interleaved storage.
ComplexMat multiply_real(const ComplexMat& B, const RealMat& R) {
  Eigen::Map<const RealMat> br(reinterpret_cast<const double*>(B.data()), 2 * B.rows(), B.cols());
  ComplexMat out(B.rows(), R.cols());
  Eigen::Map<RealMat> o(reinterpret_cast<double*>(out.data()), 2 * B.rows(), R.cols());
  o.noalias() = br * R;
  return out;
}

// Columns a_j f_j (j >= 1) and a_0 e_{n+1} when the new coordinate is tracked.
ComplexMat scaled_basis(const ComplexMat& vecs, Eigen::Index rows_new, bool grow,
                        const detail::SecularKernel& K) {
  const int n = K.n();
  ComplexMat B = ComplexMat::Zero(rows_new, n + 1);
  if (grow) B(rows_new - 1, 0) = K.scaled_coeff(0);
  const Eigen::Index rows_old = vecs.rows();
  for (int j = 1; j <= n; ++j) B.col(j).head(rows_old) = K.scaled_coeff(j) * vecs.col(j - 1);
  return B;
}

void check_interlacing(const std::vector<double>& old_angles, const std::vector<double>& new_angles) {
  const size_t n = old_angles.size();
  if (new_angles.size() != n + 1) fail(ErrorCode::BracketFailure, "wrong number of roots");
  bool ok = new_angles.front() > 0.0 && new_angles.back() < kTwoPi;
  for (size_t k = 0; k < n && ok; ++k) ok = new_angles[k] < old_angles[k] && old_angles[k] < new_angles[k + 1];
  if (!ok) fail(ErrorCode::BracketFailure, "interlacing violated");
}

void fill_report(SecularSolveReport& rep, int idx, const detail::SecularKernel::Root& root) {
  rep.angles[idx] = root.t;
  rep.residual[idx] = std::abs(root.value);
  rep.iterations[idx] = root.iterations;
  rep.h[idx] = 0.5 * root.derivative;
  rep.gap_left[idx] = root.point.dL;
  rep.gap_right[idx] = root.point.dR;
}

SecularSolveReport empty_report(int m, double tol) {
  SecularSolveReport rep;
  rep.angles.resize(m);
  rep.residual.resize(m);
  rep.iterations.resize(m);
  rep.h.resize(m);
  rep.gap_left.resize(m);
  rep.gap_right.resize(m);
  rep.tol = tol;
  return rep;
}

ComplexMat propagate(const ComplexMat& vecs, bool grow, const detail::SecularKernel& K,
                     const SecularSolveReport& rep) {
  const int n = K.n();
  const Eigen::Index rows_new = vecs.rows() + (grow ? 1 : 0);
  const ComplexMat B = scaled_basis(vecs, rows_new, grow, K);
  RealMat R(n + 1, n + 1);
  for (int k = 1; k <= n + 1; ++k)
    K.column(k, detail::ArcPoint{rep.gap_left[k - 1], rep.gap_right[k - 1]}, R.col(k - 1).data());
  ComplexMat out = multiply_real(B, R);
  for (int k = 0; k <= n; ++k) out.col(k) *= detail::SecularKernel::kappa(rep.angles[k]) / std::sqrt(rep.h[k]);
  return out;
}

}  // namespace

const char* to_string(VecMode mode) {
  switch (mode) {
    case VecMode::None: return "none";
    case VecMode::Coords: return "coords";
    case VecMode::Full: return "full";
  }
  return "?";
}

int SpectralState::position(int k) const {
  if (!resolvable(k))
    fail(ErrorCode::IndexUnresolvable, "index " + std::to_string(k) + " at n = " + std::to_string(n));
  return k >= 1 ? k - 1 : k + n - 1;
}

double SpectralState::angle(int k) const {
  const double th = angles[position(k)];
  return k >= 1 ? th : th - kTwoPi;
}

SpectralState initial_state(Complex x1, VecMode mode, int L) {
  double th = std::arg(x1);
  if (th < 0.0) th += kTwoPi;
  if (!(th > 0.0 && th < kTwoPi)) fail(ErrorCode::DegenerateCoefficient, "u_1 = 1");
  SpectralState s;
  s.n = 1;
  s.angles = {th};
  s.mode = mode;
  s.L = mode == VecMode::Full ? 1 : L;
  if (mode == VecMode::Full || (mode == VecMode::Coords && L >= 1)) s.vecs = ComplexMat::Constant(1, 1, -1.0);
  return s;
}

void check_ordering(const std::vector<double>& angles) {
  bool ok = !angles.empty() && angles.front() > 0.0 && angles.back() < kTwoPi;
  for (size_t k = 1; k < angles.size() && ok; ++k) ok = angles[k] > angles[k - 1];
  if (!ok) fail(ErrorCode::BracketFailure, "angles not strictly ordered in (0, 2pi)");
}

int SecularSolveReport::max_iterations() const {
  return iterations.empty() ? 0 : *std::max_element(iterations.begin(), iterations.end());
}

double SecularSolveReport::max_residual() const {
  return residual.empty() ? 0.0 : *std::max_element(residual.begin(), residual.end());
}

UpdateCoeffs decompose_in_eigenbasis(const ComplexVec& x, const SpectralState& state) {
  if (state.mode != VecMode::Full || state.vecs.rows() != state.n)
    fail(ErrorCode::ModeError, "decompose_in_eigenbasis needs full eigenvectors");
  if (x.size() != state.n + 1) fail(ErrorCode::DimMismatch, "x must live in C^{n+1}");
  UpdateCoeffs c;
  c.mu = state.vecs.adjoint() * x.head(state.n);
  c.nu = x(state.n);
  return c;
}

double secular_function(double t, const std::vector<double>& angles, const UpdateCoeffs& coeffs) {
  auto dist = [](double x) {
    const double r = std::remainder(x, kTwoPi);
    return std::abs(r);
  };
  if (dist(t) < 1e-13) fail(ErrorCode::PoleEvaluation, "t at the pole 0");
  for (double th : angles)
    if (dist(t - th) < 1e-13) fail(ErrorCode::PoleEvaluation, "t at an eigenangle");
  return detail::SecularKernel(angles, coeffs).evaluate(t);
}

double secular_derivative(double t, const std::vector<double>& angles, const UpdateCoeffs& coeffs) {
  return detail::SecularKernel(angles, coeffs).derivative(t);
}

SecularSolveReport solve_secular(const SpectralState& state, const UpdateCoeffs& coeffs, double tol) {
  check_ordering(state.angles);
  validate_coeffs(coeffs);
  const detail::SecularKernel K(state.angles, coeffs);
  const int m = state.n + 1;
  SecularSolveReport rep = empty_report(m, tol);
  detail::SecularKernel::Carry carry;
  for (int k = 1; k <= m; ++k) fill_report(rep, k - 1, K.solve(k, tol, nullptr, true, &carry));
  check_interlacing(state.angles, rep.angles);
  return rep;
}

SpectralState update_eigenvectors(const SpectralState& state, const UpdateCoeffs& coeffs,
                                  const SecularSolveReport& report) {
  if (state.mode != VecMode::Full || state.vecs.rows() != state.n)
    fail(ErrorCode::ModeError, "update_eigenvectors needs full eigenvectors");
  const detail::SecularKernel K(state.angles, coeffs);
  SpectralState next;
  next.n = state.n + 1;
  next.angles = report.angles;
  next.mode = VecMode::Full;
  next.L = next.n;
  next.phase_fixed = state.phase_fixed;
  next.vecs = propagate(state.vecs, true, K, report);
  return next;
}

ComplexMat update_coordinates(const ComplexMat& slab, const UpdateCoeffs& coeffs,
                              const std::vector<double>& old_angles, const SecularSolveReport& report) {
  const Eigen::Index n = static_cast<Eigen::Index>(old_angles.size());
  if (slab.rows() > n) fail(ErrorCode::ModeError, "coordinate slab wider than the dimension");
  if (slab.cols() != n) fail(ErrorCode::DimMismatch, "slab must have one column per eigenvector");
  const detail::SecularKernel K(old_angles, coeffs);
  return propagate(slab, false, K, report);
}

SecularSolveReport advance(SpectralState& state, const UpdateCoeffs& coeffs, double tol) {
  validate_coeffs(coeffs);
  if (coeffs.n() != state.n) fail(ErrorCode::DimMismatch, "coefficients do not match the state");
  const detail::SecularKernel K(state.angles, coeffs);
  const int n = state.n;
  const int m = n + 1;
  SecularSolveReport rep = empty_report(m, tol);

  const bool has_vecs = state.mode != VecMode::None && state.vecs.size() > 0;
  const Eigen::Index rows_old = has_vecs ? state.vecs.rows() : 0;
  const bool grow = has_vecs && (state.mode == VecMode::Full || rows_old < state.L);
  const Eigen::Index rows_new = rows_old + (grow ? 1 : 0);
  const bool fused = has_vecs && rows_new <= kFusedRows;

  ComplexMat B;
  RealMat bre, bim;  // row-major copies for the fused dot products
  RealMat R;
  if (has_vecs) {
    B = scaled_basis(state.vecs, rows_new, grow, K);
    if (fused) {
      bre = B.real().transpose();
      bim = B.imag().transpose();
    } else {
      R.resize(m, m);
    }
  }
  ComplexMat next_vecs;
  if (fused) next_vecs.resize(rows_new, m);

  std::vector<double> scratch(m);
  detail::SecularKernel::Carry carry;
  for (int k = 1; k <= m; ++k) {
    double* r = (has_vecs && !fused) ? R.col(k - 1).data() : scratch.data();
    const auto root = K.solve(k, tol, r, state.mode == VecMode::Full, &carry);
    fill_report(rep, k - 1, root);
    if (fused) {
      const Complex scale = detail::SecularKernel::kappa(root.t) / std::sqrt(rep.h[k - 1]);
      for (Eigen::Index l = 0; l < rows_new; ++l) {
        const double* xr = bre.col(l).data();
        const double* xi = bim.col(l).data();
        double sr = 0.0, si = 0.0;
#pragma omp simd reduction(+ : sr, si)
        for (int j = 0; j < m; ++j) {
          sr += r[j] * xr[j];
          si += r[j] * xi[j];
        }
        next_vecs(l, k - 1) = scale * Complex(sr, si);
      }
    }
  }
  check_interlacing(state.angles, rep.angles);

  if (has_vecs && !fused) {
    next_vecs = multiply_real(B, R);
    for (int k = 0; k < m; ++k)
      next_vecs.col(k) *= detail::SecularKernel::kappa(rep.angles[k]) / std::sqrt(rep.h[k]);
  }
  state.n = m;
  state.angles = rep.angles;
  if (state.mode == VecMode::Full) state.L = m;
  if (has_vecs) state.vecs = std::move(next_vecs);
  return rep;
}

RecoveredCoeffs recover_coeffs_from_angles(const std::vector<double>& old_angles,
                                           const std::vector<double>& new_angles) {
  const int n = static_cast<int>(old_angles.size());
  if (static_cast<int>(new_angles.size()) != n + 1)
    fail(ErrorCode::DimMismatch, "new ladder must have n+1 angles");
  bool interlaced = new_angles.front() > 0.0 && new_angles.back() < kTwoPi;
  for (int k = 0; k < n && interlaced; ++k)
    interlaced = new_angles[k] < old_angles[k] && old_angles[k] < new_angles[k + 1];
  if (!interlaced) fail(ErrorCode::IllConditioned, "ladders do not interlace");

  // lambda_j - lambda'_k = 2i e^{i(theta_j + t_k)/2} sin((theta_j - t_k)/2)
  auto diff = [](double th, double t) {
    return Complex(0.0, 2.0) * unit_phase(0.5 * (th + t)) * std::sin(0.5 * (th - t));
  };
  ComplexMat R(n + 1, n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = new_angles[k];
    for (int j = 0; j < n; ++j) R(k, j) = unit_phase(old_angles[j]) / diff(old_angles[j], t);
    R(k, n) = 1.0 / diff(0.0, t);
  }
  const ComplexVec w = ComplexVec::Ones(n + 1);
  const ComplexVec v = R.partialPivLu().solve(w);

  RecoveredCoeffs out;
  out.nu = 1.0 - v(n);
  out.mu_abs2.resize(n);
  double total = std::norm(out.nu);
  double leak = 0.0;
  for (int j = 0; j < n; ++j) {
    const Complex m2 = v(j) * std::conj(1.0 - out.nu);
    out.mu_abs2[j] = m2.real();
    total += m2.real();
    leak = std::max(leak, std::abs(m2.imag()));
  }
  const double solve_res = (R * v - w).cwiseAbs().maxCoeff();
  out.residual = std::max({solve_res, std::abs(total - 1.0), leak});
  if (!std::isfinite(out.residual) || out.residual > 1e-6)
    fail(ErrorCode::IllConditioned, "ladder inversion residual " + std::to_string(out.residual));
  return out;
}

}  // namespace isotower
