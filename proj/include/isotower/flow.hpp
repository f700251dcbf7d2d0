#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isotower/spectral.hpp"
#include "isotower/types.hpp"

namespace isotower {

// Finite combination sum_k c_k g_k over tracked eigenpaths; U^alpha acts diagonally with
// the finite-n estimates y_k.
struct FlowElement {
  std::map<int, Complex> coeffs;
  std::map<int, double> y;                         // y_k estimates
  std::map<int, std::vector<Complex>> g;           // materialized g_{k,l}, l = 1..L

  // w_l = sum_k c_k g_{k,l}
  std::vector<Complex> materialize() const;
  // sum (1 + |k|^{1+delta}) |c_k|^2
  double weight_profile(double delta) const;
};

// Multiplies coefficient k by e^{2 pi i alpha y_k}.
FlowElement apply_U(double alpha, const FlowElement& elem);

// floor(alpha n), the exponent used for u_n^{alpha_n}.
long alpha_power(double alpha, int n);

// || u_n^{floor(alpha n)} g - e^{2 pi i alpha y} g || / ||g||, evaluated in the eigenbasis of
// the FULL state. g is a prefix of length n.
double flow_residual(const SpectralState& state, const ComplexVec& g, double alpha, double y);

// |< u_n^{floor(alpha n)} g - e^{2 pi i alpha y} g, u_n^{floor(gamma n)} e_l >|
double component_residual(const SpectralState& state, const ComplexVec& g, double alpha, double y,
                          double gamma, int l);

enum class InnerMethod { Cesaro, Abel, Holo };
const char* to_string(InnerMethod m);

struct InnerProductEstimate {
  Complex value;
  InnerMethod method = InnerMethod::Cesaro;
  double s = 0.0;                // Abel / holomorphic radius
  long truncation = 0;           // number of terms used
  long quadrature = 0;           // nodes on the circle (holomorphic route)
  double truncation_bound = 0.0; // bound on the neglected tail
};

// (1/n) sum_{l <= n} w_l conj(w'_l)
InnerProductEstimate cesaro_inner(const std::vector<Complex>& w, const std::vector<Complex>& wp);

// Smallest N with (1 - s) s^N max|w_l w'_l| < 1e-12.
long abel_truncation(double s, double max_product);

// (1 - s) sum_{l <= N} s^{l-1} w_l conj(w'_l). N = 0 picks abel_truncation; the inputs must
// hold at least N terms (TruncationTooCoarse otherwise).
InnerProductEstimate abel_inner(const std::vector<Complex>& w, const std::vector<Complex>& wp, double s,
                                long N = 0);

// 2(1 - s) (1/M) sum_m F(w)(s e^{i theta_m}) conj(F(w')(s e^{i theta_m})) with the power series
// F(w)(z) = sum_{l <= N} w_l z^{l-1}, evaluated by FFT. M must exceed 2N.
InnerProductEstimate holo_inner(const std::vector<Complex>& w, const std::vector<Complex>& wp, double s,
                                long N, long M);

// (1/p) sum_{j < p} lambda^j
Complex moving_average_M(long p, Complex lambda);

struct MovingAverageSweep {
  long samples = 0;
  double min_ratio = 0.0;  // min of (1 - |M_n|^2) / min(n |lambda - 1|, 1)^2
  long violations = 0;     // samples breaking the bound for the given c
  double c = 0.0;
};
// Random (2 <= n <= n_max, lambda) sweep of |M_n(lambda)|^2 <= 1 - c min(n|lambda - 1|, 1)^2.
// n = 1 is excluded: M_1 = 1 identically.
MovingAverageSweep moving_average_sweep(long samples, long n_max, double c, std::uint64_t seed);

struct MembershipParams {
  double alpha = 0.5;
  double gamma = 0.0;
  int l = 1;
  double delta = 0.15;
  double delta_prime = 0.10;
  double C_component = 1.0;
  double C_norm = 1.0;
};

struct MembershipReport {
  int n = 0;
  std::vector<long> grid;           // alpha_n values examined
  double component_sup = 0.0;
  double norm_sup = 0.0;
  double component_threshold = 0.0; // C n^{-delta'}
  double norm_threshold = 0.0;      // C n^{1/2 - delta'}
  bool component_ok = false;
  bool norm_ok = false;
};

// 5-point grid {a, a +- floor(n^{1-delta}/2), a +- floor(n^{1-delta})} around a = floor(alpha n).
std::vector<long> alpha_grid(double alpha, int n, double delta);

// Sup over alpha_grid of |<u^{a} w - Vw, u^{floor(gamma n)} e_l>| and ||u^{a} w - Vw||.
MembershipReport f_membership_check(const ComplexVec& w, const ComplexVec& Vw, const SpectralState& state,
                                    const MembershipParams& params);

}  // namespace isotower
