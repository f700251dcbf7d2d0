#pragma once

#include <vector>

#include "isotower/haar.hpp"
#include "isotower/types.hpp"

namespace isotower::detail {

// A point inside an arc (a, b), stored by its distances to both poles.
// The smaller distance is exact; the other one is derived from the arc length.
struct ArcPoint {
  double dL = 0.0;
  double dR = 0.0;
  bool near_left() const { return dL <= dR; }
};

// The secular function of one dimension step, written over poles j = 0..n with
// theta_0 = 0, w_0 = |1 - nu|^2, w_j = |mu_j|^2:
//   s(t) = 2 Im nu + sum_j w_j cot((theta_j - t)/2).
// Arc k (1..n+1) runs from pole k-1 to pole k, the last one wrapping to 2pi.
class SecularKernel {
 public:
  SecularKernel(const std::vector<double>& angles, const UpdateCoeffs& coeffs);

  int n() const { return n_; }
  double pole(int j) const { return theta_[j]; }
  double weight(int j) const { return w_[j]; }

  struct Arc {
    int left;
    int right;  // 0 for the wrapping arc
    double a;
    double b;
    double length;
  };
  Arc arc(int k) const;

  ArcPoint from_left(const Arc& arc, double dL) const { return {dL, arc.length - dL}; }
  ArcPoint from_right(const Arc& arc, double dR) const { return {arc.length - dR, dR}; }
  double angle_of(const Arc& arc, const ArcPoint& p) const {
    return p.near_left() ? arc.a + p.dL : arc.b - p.dR;
  }

  // Direct evaluation over every pole (no special handling of adjacent poles).
  double evaluate(double t) const;
  double derivative(double t) const;

  struct Root {
    ArcPoint point;
    double t = 0.0;
    double value = 0.0;       // s(t*)
    double derivative = 0.0;  // s'(t*)
    int iterations = 0;
  };

  struct Sums {
    double f0 = 0.0, f1 = 0.0, f2 = 0.0;
  };

  // Far-field sums at the previous root, reused to start the next arc.
  struct Carry {
    bool valid = false;
    int k = 0;
    double t = 0.0;
    Sums far;
  };

  // Root in arc k. When r is non-null it receives r_j = 1/sin((theta_j - t*)/2), j = 0..n.
  // With relative set, the distance to the nearest pole is also resolved to about
  // 10 tol relative accuracy, which full eigenvector updates need to stay orthonormal.
  // Solving arcs in increasing order with one Carry saves about one pass per root.
  Root solve(int k, double tol, double* r, bool relative = true, Carry* carry = nullptr) const;

  // Regenerates r_j for a known root of arc k.
  void column(int k, const ArcPoint& p, double* r) const;

  // mu_j e^{-i theta_j/2} for j >= 1, nu - 1 for j = 0.
  Complex scaled_coeff(int j) const { return a_[j]; }

  // e^{-it/2}/(2i): together with scaled_coeff and r_j this gives mu_j/(lambda_j - e^{it}).
  static Complex kappa(double t);

 private:
  struct Eval {
    double s = 0.0, ds = 0.0;
    Sums far;
  };

  Sums far_sums(const Arc& arc, int k, double t, double* r) const;
  Sums range_sums(int lo, int hi, double st, double ct, double* r) const;
  Eval eval(const Arc& arc, int k, const ArcPoint& p, double* r) const;
  struct Near {
    double value, deriv;  // adjacent-pole part of s and s'
    double sl, cl, sr, cr;
    void scale(double m, double dm, double& F, double& dF) const;
  };
  Near near_terms(const Arc& arc, const ArcPoint& p) const;
  void near_column(const Arc& arc, const ArcPoint& p, double* r) const;
  ArcPoint midpoint(const Arc& arc, const ArcPoint& x, const ArcPoint& y) const;
  template <class Model>
  ArcPoint model_root(const Arc& arc, ArcPoint lo, ArcPoint hi, ArcPoint q, double rel_stop,
                      Model&& model) const;
  ArcPoint carried_start(const Arc& arc, int k, const Carry& carry, ArcPoint lo, ArcPoint hi,
                         ArcPoint start) const;

  int n_;
  double c_;
  std::vector<double> theta_, sh_, ch_, w_, hw_;
  std::vector<Complex> a_;
};

}  // namespace isotower::detail
