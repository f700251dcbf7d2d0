#pragma once

#include <vector>

#include "isotower/types.hpp"

namespace isotower {

// r_{a,alpha}(x) = x - (1 - alpha) <x,a>/<a,a> a, acting on C^dim.
class Reflection {
 public:
  static Reflection identity(int dim);

  int dim() const { return dim_; }
  bool is_identity() const { return identity_; }
  const ComplexVec& anchor() const { return anchor_; }
  Complex alpha() const { return alpha_; }
  double anchor_norm2() const { return anchor_norm2_; }

  // Applies the map to the leading dim() coordinates of x; the rest is untouched.
  void apply_leading(Eigen::Ref<ComplexVec> x) const;

 private:
  friend Reflection make_reflection(const ComplexVec& a, Complex alpha);
  Reflection() = default;

  ComplexVec anchor_;
  Complex alpha_{1.0, 0.0};
  double anchor_norm2_ = 0.0;
  int dim_ = 0;
  bool identity_ = true;
};

Reflection make_reflection(const ComplexVec& a, Complex alpha);

// The unique reflection with r(e) = m; identity when ||m - e|| < 1e-14.
Reflection reflection_sending(const ComplexVec& e, const ComplexVec& m);

ComplexVec apply(const Reflection& r, const ComplexVec& x);

// u_n x with u_n = r_n ... r_1, r_j acting on the leading C^j block.
ComplexVec compose_apply(const std::vector<Reflection>& rs, const ComplexVec& x);

// Dense matrix of r; O(dim^2) memory, meant for oracles and tests.
ComplexMat to_dense(const Reflection& r);

}  // namespace isotower
