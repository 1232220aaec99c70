#pragma once

#include <cstddef>
#include <vector>

namespace disinfo::linalg {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::size_t n);
  Matrix transposed() const;
};

Matrix multiply(const Matrix& a, const Matrix& b);
// aᵀ·b without forming the transpose.
Matrix multiply_tn(const Matrix& a, const Matrix& b);

// Thin Q (rows × min(rows, cols)) of a Householder QR. Columns are
// orthonormal even when the input is rank deficient.
Matrix orthonormal_basis(const Matrix& a);

struct Svd {
  Matrix u;                   // rows × r
  std::vector<double> sigma;  // r values, non-increasing
  Matrix v;                   // cols × r
};

// Thin SVD by one-sided Jacobi rotations, r = min(rows, cols). Singular
// vectors for zero singular values are completed to an orthonormal set.
// Signs are fixed so the largest-magnitude entry of each v column is
// positive. Throws ConvergenceError if rotations do not settle.
Svd jacobi_svd(const Matrix& a);

}  // namespace disinfo::linalg
