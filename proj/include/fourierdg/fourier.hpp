#pragma once

#include <cstddef>

#include "fourierdg/tensor.hpp"

namespace fourierdg {

// Real discrete Fourier basis of R^d, stored as the rows of a d x d matrix:
//   row 0          DC, all ones
//   rows 2k-1, 2k  cos(2*pi*k*j/d), sin(2*pi*k*j/d) for k = 1 .. d/2-1
//   row d-1        Nyquist, (-1)^j
// Rows are mutually orthogonal but left unnormalized: squared norm d for the
// DC and Nyquist rows, d/2 for the rest. Immutable after construction.
class FourierBasis {
 public:
  explicit FourierBasis(std::size_t dim);

  std::size_t dim() const { return dim_; }
  const Matrix& rows() const { return basis_; }
  const Vector& norms_sq() const { return norms_sq_; }

 private:
  std::size_t dim_;
  Matrix basis_;
  Vector norms_sq_;
};

FourierBasis build_basis(std::size_t dim);

// Coefficients z[i][r] = <h_i, b_r>, i.e. z = h B^T.
Matrix project(const Matrix& h, const FourierBasis& basis);
// Gradient of project: dH = dZ B.
Matrix project_backward(const Matrix& dz, const FourierBasis& basis);
// Inverse expansion h_i = sum_r (z[i][r] / |b_r|^2) b_r.
Matrix reconstruct(const Matrix& z, const FourierBasis& basis);

}  // namespace fourierdg
