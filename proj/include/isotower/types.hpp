#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace isotower {

using Complex = std::complex<double>;
using ComplexVec = Eigen::VectorXcd;
using ComplexMat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// <u, v> = sum u_k conj(v_k): linear in the first slot.
inline Complex inner(const ComplexVec& u, const ComplexVec& v) { return v.dot(u); }

inline Complex unit_phase(double angle) { return std::polar(1.0, angle); }

// Basis vector e_l (1-based l) in C^n.
ComplexVec basis_vector(int n, int l);

}  // namespace isotower
