#include "secular_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isotower/error.hpp"

namespace isotower::detail {

namespace {

constexpr int kLeafSize = 256;
constexpr int kMaxIterations = 200;
constexpr int kMaxModelIterations = 100;
constexpr int kCarryWindow = 8;
constexpr double kPoleGuard = 1e-15 * kTwoPi;
constexpr double kMinRootDistance = 1e-14;

// x strictly left of y, comparing on the side where both distances are exact.
bool before(const ArcPoint& x, const ArcPoint& y) {
  if (x.near_left() || y.near_left()) return x.dL < y.dL;
  return x.dR > y.dR;
}

double separation(const ArcPoint& x, const ArcPoint& y) {
  if (!x.near_left() && !y.near_left()) return std::abs(x.dR - y.dR);
  return std::abs(x.dL - y.dL);
}

// Signed t(q) - t(p).
double offset(const ArcPoint& p, const ArcPoint& q) {
  if (!p.near_left() && !q.near_left()) return p.dR - q.dR;
  return q.dL - p.dL;
}

}  // namespace

SecularKernel::SecularKernel(const std::vector<double>& angles, const UpdateCoeffs& coeffs)
    : n_(static_cast<int>(angles.size())), c_(2.0 * coeffs.nu.imag()) {
  if (coeffs.n() != n_) fail(ErrorCode::DimMismatch, "coefficients do not match the spectrum");
  theta_.resize(n_ + 1);
  sh_.resize(n_ + 1);
  ch_.resize(n_ + 1);
  w_.resize(n_ + 1);
  hw_.resize(n_ + 1);
  a_.resize(n_ + 1);
  theta_[0] = 0.0;
  sh_[0] = 0.0;
  ch_[0] = 1.0;
  w_[0] = std::norm(1.0 - coeffs.nu);
  a_[0] = coeffs.nu - 1.0;
  for (int j = 1; j <= n_; ++j) {
    const double th = angles[j - 1];
    theta_[j] = th;
    sh_[j] = std::sin(0.5 * th);
    ch_[j] = std::cos(0.5 * th);
    w_[j] = std::norm(coeffs.mu(j - 1));
    a_[j] = coeffs.mu(j - 1) * Complex(ch_[j], -sh_[j]);
  }
  for (int j = 0; j <= n_; ++j) hw_[j] = 0.5 * w_[j];
}

SecularKernel::Arc SecularKernel::arc(int k) const {
  Arc arc;
  arc.left = k - 1;
  arc.right = k <= n_ ? k : 0;
  arc.a = theta_[k - 1];
  arc.b = k <= n_ ? theta_[k] : kTwoPi;
  arc.length = arc.b - arc.a;
  return arc;
}

Complex SecularKernel::kappa(double t) { return unit_phase(-0.5 * t) * Complex(0.0, -0.5); }

SecularKernel::Sums SecularKernel::range_sums(int lo, int hi, double st, double ct, double* r) const {
  if (hi - lo > kLeafSize) {
    const int mid = lo + (hi - lo) / 2;
    const Sums x = range_sums(lo, mid, st, ct, r);
    const Sums y = range_sums(mid, hi, st, ct, r);
    return {x.f0 + y.f0, x.f1 + y.f1, x.f2 + y.f2};
  }
  const double* sh = sh_.data();
  const double* ch = ch_.data();
  const double* w = w_.data();
  const double* hw = hw_.data();
  double f0 = 0.0, f1 = 0.0, f2 = 0.0;
#pragma omp simd reduction(+ : f0, f1, f2)
  for (int j = lo; j < hi; ++j) {
    // sin and cos of (theta_j - t)/2 by angle subtraction
    const double sn = sh[j] * ct - ch[j] * st;
    const double cs = ch[j] * ct + sh[j] * st;
    const double inv = 1.0 / sn;
    const double cot = cs * inv;
    const double half_w_csc2 = hw[j] * inv * inv;
    f0 += w[j] * cot;
    f1 += half_w_csc2;
    f2 += half_w_csc2 * cot;
    r[j] = inv;
  }
  return {f0, f1, f2};
}

SecularKernel::Sums SecularKernel::far_sums(const Arc& arc, int k, double t, double* r) const {
  const double st = std::sin(0.5 * t);
  const double ct = std::cos(0.5 * t);
  if (k <= n_) {
    const Sums x = range_sums(0, arc.left, st, ct, r);
    const Sums y = range_sums(arc.right + 1, n_ + 1, st, ct, r);
    return {x.f0 + y.f0, x.f1 + y.f1, x.f2 + y.f2};
  }
  return range_sums(1, n_, st, ct, r);
}

SecularKernel::Near SecularKernel::near_terms(const Arc& arc, const ArcPoint& p) const {
  Near nr;
  nr.sl = std::sin(0.5 * p.dL);
  nr.cl = std::cos(0.5 * p.dL);
  nr.sr = std::sin(0.5 * p.dR);
  nr.cr = std::cos(0.5 * p.dR);
  const double wl = w_[arc.left];
  const double wr = w_[arc.right];
  nr.value = -wl * nr.cl / nr.sl + wr * nr.cr / nr.sr;
  nr.deriv = 0.5 * wl / (nr.sl * nr.sl) + 0.5 * wr / (nr.sr * nr.sr);
  return nr;
}

// Model value m and slope dm multiplied by sin(dL/2) sin(dR/2): same sign and root, but
// the adjacent poles are gone, so Newton converges from anywhere in the arc.
void SecularKernel::Near::scale(double m, double dm, double& F, double& dF) const {
  const double prod = sl * sr;
  F = m * prod;
  dF = dm * prod + 0.5 * m * (cl * sr - sl * cr);
}

void SecularKernel::near_column(const Arc& arc, const ArcPoint& p, double* r) const {
  r[arc.left] = -1.0 / std::sin(0.5 * p.dL);
  // pole 0 seen from the wrapping arc sits at 2pi, which flips the half-angle sine
  r[arc.right] = (arc.right == 0 ? -1.0 : 1.0) / std::sin(0.5 * p.dR);
}

SecularKernel::Eval SecularKernel::eval(const Arc& arc, int k, const ArcPoint& p, double* r) const {
  Eval e;
  e.far = far_sums(arc, k, angle_of(arc, p), r);
  const Near nr = near_terms(arc, p);
  near_column(arc, p, r);
  e.s = c_ + e.far.f0 + nr.value;
  e.ds = e.far.f1 + nr.deriv;
  return e;
}

double SecularKernel::evaluate(double t) const {
  std::vector<double> r(n_ + 1);
  const Sums s = range_sums(0, n_ + 1, std::sin(0.5 * t), std::cos(0.5 * t), r.data());
  return c_ + s.f0;
}

double SecularKernel::derivative(double t) const {
  std::vector<double> r(n_ + 1);
  return range_sums(0, n_ + 1, std::sin(0.5 * t), std::cos(0.5 * t), r.data()).f1;
}

void SecularKernel::column(int k, const ArcPoint& p, double* r) const {
  const Arc a = arc(k);
  far_sums(a, k, angle_of(a, p), r);
  near_column(a, p, r);
}

template <class Model>
ArcPoint SecularKernel::model_root(const Arc& A, ArcPoint lo, ArcPoint hi, ArcPoint q, double rel_stop,
                                   Model&& model) const {
  double m = 0.0, dm = 0.0;
  model(q, m, dm);
  for (int i = 0; i < kMaxModelIterations; ++i) {
    if (m < 0.0)
      lo = q;
    else if (m > 0.0)
      hi = q;
    else
      break;
    ArcPoint next;
    bool ok = std::isfinite(m) && std::isfinite(dm) && dm != 0.0;
    if (ok) {
      next = q.near_left() ? from_left(A, q.dL - m / dm) : from_right(A, q.dR + m / dm);
      ok = next.dL > 0.0 && next.dR > 0.0 && before(lo, next) && before(next, hi);
    }
    if (!ok) next = midpoint(A, lo, hi);
    const double step = separation(q, next);
    if (ok && step <= rel_stop * std::min(q.dL, q.dR)) return next;
    q = next;
    model(q, m, dm);
    if (step <= rel_stop * std::min(q.dL, q.dR) || !before(lo, hi)) break;
  }
  return q;
}

// Bisection point; geometric when both ends sit on the same side at very different
// distances from that pole, so roots hugging a pole are reached in O(log) steps.
ArcPoint SecularKernel::midpoint(const Arc& A, const ArcPoint& x, const ArcPoint& y) const {
  auto mean = [](double u, double v) {
    const double lo = std::min(u, v), hi = std::max(u, v);
    return hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
  };
  if (x.near_left() && y.near_left()) return from_left(A, mean(x.dL, y.dL));
  if (!x.near_left() && !y.near_left()) return from_right(A, mean(x.dR, y.dR));
  const double dl = 0.5 * (x.dL + y.dL);
  return dl <= 0.5 * A.length ? from_left(A, dl) : from_right(A, A.length - dl);
}

// Starting point for arc k from the far-field sums at the root of arc k-1: poles within
// kCarryWindow of the arc are summed exactly, the rest by a Taylor shift from the old root.
ArcPoint SecularKernel::carried_start(const Arc& A, int k, const Carry& carry, ArcPoint lo, ArcPoint hi,
                                      ArcPoint start) const {
  const int first = std::max(0, k - 1 - kCarryWindow);
  const int last = std::min(n_, k + kCarryWindow);
  auto term = [&](int j, double st, double ct, Sums& acc, double sign) {
    const double sn = sh_[j] * ct - ch_[j] * st;
    const double cs = ch_[j] * ct + sh_[j] * st;
    const double inv = 1.0 / sn;
    const double half_w_csc2 = 0.5 * w_[j] * inv * inv;
    acc.f0 += sign * w_[j] * cs * inv;
    acc.f1 += sign * half_w_csc2;
    acc.f2 += sign * half_w_csc2 * cs * inv;
  };
  Sums rest = carry.far;
  {
    const double st = std::sin(0.5 * carry.t);
    const double ct = std::cos(0.5 * carry.t);
    for (int j = first; j <= last; ++j)
      if (j != k - 2 && j != k - 1) term(j, st, ct, rest, -1.0);
  }
  auto model = [&](const ArcPoint& q, double& m, double& dm) {
    const double t = angle_of(A, q);
    const double d = t - carry.t;
    Sums win;
    const double st = std::sin(0.5 * t);
    const double ct = std::cos(0.5 * t);
    for (int j = first; j <= last; ++j)
      if (j != k - 1 && j != k) term(j, st, ct, win, 1.0);
    const Near nr = near_terms(A, q);
    nr.scale(c_ + rest.f0 + d * (rest.f1 + 0.5 * d * rest.f2) + win.f0 + nr.value,
             rest.f1 + d * rest.f2 + win.f1 + nr.deriv, m, dm);
  };
  return model_root(A, lo, hi, start, 1e-9, model);  // the model itself is only a few digits good
}

SecularKernel::Root SecularKernel::solve(int k, double tol, double* r, bool relative, Carry* carry) const {
  std::vector<double> scratch;
  if (r == nullptr) {
    scratch.resize(n_ + 1);
    r = scratch.data();
  }
  const Arc A = arc(k);
  if (!(A.length > 4.0 * kPoleGuard))
    fail(ErrorCode::BracketFailure, "arc " + std::to_string(k) + " is too short");

  ArcPoint lo = from_left(A, kPoleGuard);
  ArcPoint hi = from_right(A, kPoleGuard);

  // Warm start theta_k - theta_k |mu_k|^2, else the arc midpoint.
  ArcPoint p = from_left(A, 0.5 * A.length);
  if (k <= n_) {
    const double guess = theta_[k] * w_[k];
    if (guess > kPoleGuard && guess < 0.5 * A.length) p = from_right(A, guess);
  }
  if (carry != nullptr && carry->valid && carry->k == k - 1 && k <= n_ && n_ > 4 * kCarryWindow)
    p = carried_start(A, k, *carry, lo, hi, p);

  double step_hist[2] = {A.length, A.length};
  for (int it = 1; it <= kMaxIterations; ++it) {
    const Eval e = eval(A, k, p, r);
    if (!std::isfinite(e.s) || !(e.ds > 0.0))
      fail(ErrorCode::BracketFailure, "secular function not finite on arc " + std::to_string(k));

    Root root;
    root.point = p;
    root.t = angle_of(A, p);
    root.value = e.s;
    root.derivative = e.ds;
    root.iterations = it;
    auto accept = [&]() {
      if (std::min(p.dL, p.dR) < kMinRootDistance)
        fail(ErrorCode::BracketFailure, "root of arc " + std::to_string(k) + " within 1e-14 of a pole");
      if (carry != nullptr) *carry = Carry{true, k, root.t, e.far};
      return root;
    };
    if (e.s == 0.0) return accept();
    if (e.s < 0.0)
      lo = p;
    else
      hi = p;

    // Local model: exact adjacent poles plus a quadratic Taylor model of the far field.
    auto model = [&](const ArcPoint& q, double& m, double& dm) {
      const double d = offset(p, q);
      const Near nr = near_terms(A, q);
      nr.scale(c_ + e.far.f0 + d * (e.far.f1 + 0.5 * d * e.far.f2) + nr.value,
               e.far.f1 + d * e.far.f2 + nr.deriv, m, dm);
    };
    ArcPoint q = model_root(A, lo, hi, p, 4e-16, model);

    // Bisect when the model step leaves the bracket or the steps stop shrinking.
    const double step = separation(p, q);
    const bool stalled = it > 2 && step > 0.5 * step_hist[it % 2];
    step_hist[it % 2] = step;
    if (stalled || !(before(lo, q) && before(q, hi))) q = midpoint(A, lo, hi);

    const double dist = std::min(p.dL, p.dR);
    const bool resolved = separation(lo, hi) <= 1e-15 * dist;  // bracket at machine resolution
    if ((step <= tol && (!relative || step <= 10.0 * tol * dist)) || resolved) return accept();
    if (!before(lo, hi) || separation(lo, hi) == 0.0)
      fail(ErrorCode::BracketFailure, "bracket collapsed on arc " + std::to_string(k));
    p = q;
  }
  fail(ErrorCode::NonConvergence, "arc " + std::to_string(k) + " after 200 iterations");
}

}  // namespace isotower::detail
