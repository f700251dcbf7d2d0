#pragma once

#include <vector>

#include "isotower/haar.hpp"
#include "isotower/types.hpp"

namespace isotower {

enum class VecMode { None, Coords, Full };

const char* to_string(VecMode mode);

// Spectral data of u_n: angles 0 < theta_1 < ... < theta_n < 2pi and eigenvector data.
// vecs holds one eigenvector per column; row l is the coordinate <f_k, e_{l+1}>.
// Full: n rows. Coords: min(n, L) rows. None: empty.
struct SpectralState {
  int n = 0;
  std::vector<double> angles;
  VecMode mode = VecMode::None;
  int L = 0;
  ComplexMat vecs;
  bool phase_fixed = true;

  // 0-based storage position of signed index k (k <= 0 maps to k + n).
  int position(int k) const;
  // theta_k with theta_{k} = theta_{k+n} - 2pi for k <= 0.
  double angle(int k) const;
  Complex eigenvalue(int k) const { return unit_phase(angles[position(k)]); }
  bool resolvable(int k) const { return k >= 1 ? k <= n : k + n >= 1; }
};

// u_1 = (x1) with the eigenvector convention f_1 = -e_1.
SpectralState initial_state(Complex x1, VecMode mode, int L = 0);

// Throws BracketFailure unless 0 < theta_1 < ... < theta_n < 2pi.
void check_ordering(const std::vector<double>& angles);

struct SecularSolveReport {
  std::vector<double> angles;     // n+1 new angles, root k in arc k
  std::vector<double> residual;   // |s(t*)|
  std::vector<int> iterations;
  std::vector<double> h;          // normalizers h_k
  std::vector<double> gap_left;   // t* minus the left pole of its arc
  std::vector<double> gap_right;  // right pole of its arc minus t*
  double tol = 0.0;

  int max_iterations() const;
  double max_residual() const;
};

// mu_j = <x, f_j>, nu = last coordinate of x.
UpdateCoeffs decompose_in_eigenbasis(const ComplexVec& x, const SpectralState& state);

// s(t) = sum_j |mu_j|^2 cot((theta_j - t)/2) - |1 - nu|^2 cot(t/2) + 2 Im(nu).
double secular_function(double t, const std::vector<double>& angles, const UpdateCoeffs& coeffs);

// d s / d t; equals 2 h(t).
double secular_derivative(double t, const std::vector<double>& angles, const UpdateCoeffs& coeffs);

inline constexpr double kDefaultSecularTol = 1e-13;

SecularSolveReport solve_secular(const SpectralState& state, const UpdateCoeffs& coeffs,
                                 double tol = kDefaultSecularTol);

// Full eigenvector update (n x n -> (n+1) x (n+1)).
SpectralState update_eigenvectors(const SpectralState& state, const UpdateCoeffs& coeffs,
                                  const SecularSolveReport& report);

// Leading-L coordinate update; requires L <= n.
ComplexMat update_coordinates(const ComplexMat& slab, const UpdateCoeffs& coeffs,
                              const std::vector<double>& old_angles,
                              const SecularSolveReport& report);

// One dimension step in place: roots, normalizers and eigenvector data in a single pass.
SecularSolveReport advance(SpectralState& state, const UpdateCoeffs& coeffs,
                           double tol = kDefaultSecularTol);

struct RecoveredCoeffs {
  std::vector<double> mu_abs2;
  Complex nu{0.0, 0.0};
  double residual = 0.0;  // relative residual of the linear solve
};

// Inverts the eigenvalue ladder theta -> theta' back to |mu_j|^2 and nu.
RecoveredCoeffs recover_coeffs_from_angles(const std::vector<double>& old_angles,
                                           const std::vector<double>& new_angles);

}  // namespace isotower
