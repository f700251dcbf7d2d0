#include "isotower/reflection.hpp"

#include <cmath>
#include <string>

#include "isotower/error.hpp"

namespace isotower {

ComplexVec basis_vector(int n, int l) {
  ComplexVec e = ComplexVec::Zero(n);
  e(l - 1) = 1.0;
  return e;
}

Reflection Reflection::identity(int dim) {
  Reflection r;
  r.dim_ = dim;
  r.identity_ = true;
  return r;
}

void Reflection::apply_leading(Eigen::Ref<ComplexVec> x) const {
  if (identity_) return;
  auto head = x.head(dim_);
  const Complex proj = anchor_.dot(head) / anchor_norm2_;  // <x,a>/<a,a>
  head.noalias() -= ((1.0 - alpha_) * proj) * anchor_;
}

Reflection make_reflection(const ComplexVec& a, Complex alpha) {
  const double norm2 = a.squaredNorm();
  if (!(norm2 > 0.0)) fail(ErrorCode::ZeroAnchor, "reflection anchor has zero norm");
  const double modulus = std::abs(alpha);
  if (!(std::abs(modulus - 1.0) <= 1e-12))
    fail(ErrorCode::NonUnitPhase, "|alpha| = " + std::to_string(modulus));
  Reflection r;
  r.anchor_ = a;
  r.alpha_ = alpha / modulus;
  r.anchor_norm2_ = norm2;
  r.dim_ = static_cast<int>(a.size());
  r.identity_ = (r.alpha_ == Complex(1.0, 0.0));
  return r;
}

Reflection reflection_sending(const ComplexVec& e, const ComplexVec& m) {
  if (e.size() != m.size()) fail(ErrorCode::DimMismatch, "reflection_sending: dims differ");
  if (std::abs(e.norm() - 1.0) > 1e-12 || std::abs(m.norm() - 1.0) > 1e-12)
    fail(ErrorCode::NonUnitInput, "reflection_sending expects unit vectors");
  const ComplexVec a = m - e;
  if (a.norm() < 1e-14) return Reflection::identity(static_cast<int>(e.size()));
  const Complex c = inner(m, e);
  const Complex alpha = -(1.0 - c) / (1.0 - std::conj(c));
  return make_reflection(a, alpha);
}

ComplexVec apply(const Reflection& r, const ComplexVec& x) {
  if (x.size() != r.dim())
    fail(ErrorCode::DimMismatch, "apply: vector dim " + std::to_string(x.size()) +
                                     " vs reflection dim " + std::to_string(r.dim()));
  ComplexVec y = x;
  r.apply_leading(y);
  return y;
}

ComplexVec compose_apply(const std::vector<Reflection>& rs, const ComplexVec& x) {
  ComplexVec y = x;
  for (const auto& r : rs) {
    if (r.dim() > y.size()) fail(ErrorCode::DimMismatch, "compose_apply: reflection exceeds ambient dim");
    r.apply_leading(y);
  }
  return y;
}

ComplexMat to_dense(const Reflection& r) {
  ComplexMat m = ComplexMat::Identity(r.dim(), r.dim());
  if (r.is_identity()) return m;
  // I - (1 - alpha)/<a,a> a a^*
  m.noalias() -= ((1.0 - r.alpha()) / r.anchor_norm2()) * (r.anchor() * r.anchor().adjoint());
  return m;
}

}  // namespace isotower
