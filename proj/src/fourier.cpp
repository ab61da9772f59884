#include "fourierdg/fourier.hpp"

#include <cmath>
#include <string>

#include "fourierdg/error.hpp"

namespace fourierdg {

FourierBasis::FourierBasis(std::size_t dim) : dim_(dim) {
  if (dim < 2 || dim % 2 != 0) {
    throw ParameterError("Fourier basis dimension must be even and >= 2, got " +
                         std::to_string(dim));
  }
  basis_ = Matrix(dim, dim);
  norms_sq_.assign(dim, static_cast<double>(dim) / 2.0);
  norms_sq_.front() = static_cast<double>(dim);
  norms_sq_.back() = static_cast<double>(dim);

  const double step = 2.0 * M_PI / static_cast<double>(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    basis_(0, j) = 1.0;
    basis_(dim - 1, j) = (j % 2 == 0) ? 1.0 : -1.0;
    for (std::size_t k = 1; k < dim / 2; ++k) {
      // Reduce k*j modulo d before scaling to keep the angle small.
      const double angle = step * static_cast<double>((k * j) % dim);
      basis_(2 * k - 1, j) = std::cos(angle);
      basis_(2 * k, j) = std::sin(angle);
    }
  }
}

FourierBasis build_basis(std::size_t dim) { return FourierBasis(dim); }

namespace {

void check_width(const char* op, const Matrix& m, const FourierBasis& basis) {
  if (m.cols() != basis.dim()) {
    throw DimensionError(std::string(op) + ": expected " + std::to_string(basis.dim()) +
                         " columns, got " + std::to_string(m.cols()));
  }
}

}  // namespace

Matrix project(const Matrix& h, const FourierBasis& basis) {
  check_width("project", h, basis);
  return matmul_bt(h, basis.rows());
}

Matrix project_backward(const Matrix& dz, const FourierBasis& basis) {
  check_width("project_backward", dz, basis);
  return matmul(dz, basis.rows());
}

Matrix reconstruct(const Matrix& z, const FourierBasis& basis) {
  check_width("reconstruct", z, basis);
  Matrix scaled = z;
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    auto row = scaled.row(i);
    for (std::size_t r = 0; r < row.size(); ++r) row[r] /= basis.norms_sq()[r];
  }
  return matmul(scaled, basis.rows());
}

}  // namespace fourierdg
