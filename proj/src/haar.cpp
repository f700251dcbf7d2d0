#include "isotower/haar.hpp"

#include <cmath>
#include <string>

#include "isotower/error.hpp"

namespace isotower {

ComplexVec sample_sphere(int n, RngStream& rng) {
  if (n < 1) fail(ErrorCode::DimMismatch, "sample_sphere needs n >= 1");
  ComplexVec x(n);
  for (;;) {
    for (int j = 0; j < n; ++j) x(j) = rng.complex_normal();
    const double norm = x.norm();
    if (norm > 0.0) {
      x /= norm;
      return x;
    }
  }
}

bool is_degenerate(const UpdateCoeffs& c) {
  for (int j = 0; j < c.n(); ++j)
    if (!(std::abs(c.mu(j)) >= 1e-300)) return true;
  return !(std::abs(1.0 - c.nu) >= 1e-300);
}

void validate_coeffs(const UpdateCoeffs& c) {
  const double total = c.mu.squaredNorm() + std::norm(c.nu);
  if (std::abs(total - 1.0) > 1e-12)
    fail(ErrorCode::NonUnitInput, "update coefficients off the unit sphere by " +
                                      std::to_string(total - 1.0));
  if (is_degenerate(c)) fail(ErrorCode::DegenerateCoefficient, "zero mu or nu == 1");
}

UpdateCoeffs sample_update_coeffs(int n, RngStream& rng) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ComplexVec z = sample_sphere(n + 1, rng);
    UpdateCoeffs c;
    c.mu = z.head(n);
    c.nu = z(n);
    if (!is_degenerate(c)) return c;
  }
  fail(ErrorCode::DegenerateCoefficient, "degenerate coefficients twice at n = " + std::to_string(n));
}

ComplexMat extend_dense(const ComplexMat& u, const Reflection& r) {
  const Eigen::Index n = u.rows();
  ComplexMat v = ComplexMat::Zero(n + 1, n + 1);
  v.topLeftCorner(n, n) = u;
  v(n, n) = 1.0;
  if (r.is_identity()) return v;
  const ComplexVec& a = r.anchor();
  // r(V) = V - (1 - alpha)/<a,a> a (a^* V)
  const Eigen::RowVectorXcd row = a.adjoint() * v;
  v.noalias() -= ((1.0 - r.alpha()) / r.anchor_norm2()) * (a * row);
  return v;
}

void extend_tower(MatrixTower& tower, const ComplexVec& x) {
  const int n = tower.n();
  if (x.size() != n + 1) fail(ErrorCode::DimMismatch, "extend_tower: x must have dim n+1");
  Reflection r = reflection_sending(basis_vector(n + 1, n + 1), x);
  tower.u = extend_dense(n == 0 ? ComplexMat(0, 0) : tower.u, r);
  tower.reflections.push_back(std::move(r));
}

MatrixTower next_matrix(const MatrixTower& tower, RngStream& rng) {
  MatrixTower next = tower;
  extend_tower(next, sample_sphere(tower.n() + 1, rng));
  return next;
}

}  // namespace isotower
