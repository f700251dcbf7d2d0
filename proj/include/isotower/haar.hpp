#pragma once

#include <vector>

#include "isotower/reflection.hpp"
#include "isotower/rng.hpp"
#include "isotower/types.hpp"

namespace isotower {

// Coordinates of x_{n+1} in the basis (f_1..f_n, e_{n+1}).
struct UpdateCoeffs {
  ComplexVec mu;  // length n
  Complex nu{0.0, 0.0};
  int n() const { return static_cast<int>(mu.size()); }
};

// Uniform unit vector in C^n.
ComplexVec sample_sphere(int n, RngStream& rng);

// (mu_1..mu_n, nu) uniform on the unit sphere of C^{n+1}; one resample on degeneracy.
UpdateCoeffs sample_update_coeffs(int n, RngStream& rng);

bool is_degenerate(const UpdateCoeffs& c);

// Throws DegenerateCoefficient / NonUnitInput.
void validate_coeffs(const UpdateCoeffs& c);

// The reflections r_1..r_n together with the dense u_n they generate.
struct MatrixTower {
  std::vector<Reflection> reflections;
  ComplexMat u;  // n x n
  int n() const { return static_cast<int>(reflections.size()); }
};

// Appends r_{n+1} = reflection_sending(e_{n+1}, x) and updates u.
void extend_tower(MatrixTower& tower, const ComplexVec& x);

// Samples x_{n+1} uniformly and extends the tower by one level.
MatrixTower next_matrix(const MatrixTower& tower, RngStream& rng);

// u_{n+1} = r diag(u_n, 1) for a reflection r on C^{n+1}, in O(n^2).
ComplexMat extend_dense(const ComplexMat& u, const Reflection& r);

}  // namespace isotower
