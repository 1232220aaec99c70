#include "disinfo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "disinfo/error.hpp"

namespace disinfo::linalg {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ValidationError("matrix shapes do not conform");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double x = a(i, k);
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += x * b(k, j);
    }
  }
  return c;
}

Matrix multiply_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw ValidationError("matrix shapes do not conform");
  Matrix c(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double x = a(k, i);
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += x * b(k, j);
    }
  }
  return c;
}

Matrix orthonormal_basis(const Matrix& a) {
  const std::size_t m = a.rows;
  const std::size_t p = std::min(a.rows, a.cols);
  Matrix r = a;
  std::vector<std::vector<double>> reflectors;
  reflectors.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> v(m - j);
    double norm = 0.0;
    for (std::size_t i = j; i < m; ++i) {
      v[i - j] = r(i, j);
      norm += v[i - j] * v[i - j];
    }
    norm = std::sqrt(norm);
    // Reflect onto -sign(x0)·|x|·e1 to avoid cancellation.
    const double alpha = v[0] >= 0.0 ? -norm : norm;
    v[0] -= alpha;
    double vnorm = 0.0;
    for (double x : v) vnorm += x * x;
    if (vnorm > 0.0) {
      vnorm = std::sqrt(vnorm);
      for (auto& x : v) x /= vnorm;
      for (std::size_t c = j; c < a.cols; ++c) {
        double dot = 0.0;
        for (std::size_t i = j; i < m; ++i) dot += v[i - j] * r(i, c);
        for (std::size_t i = j; i < m; ++i) r(i, c) -= 2.0 * v[i - j] * dot;
      }
    }
    reflectors.push_back(std::move(v));
  }
  // Q = H_0 H_1 … H_{p-1} applied to the first p unit vectors.
  Matrix q(m, p);
  for (std::size_t i = 0; i < p; ++i) q(i, i) = 1.0;
  for (std::size_t jj = p; jj-- > 0;) {
    const auto& v = reflectors[jj];
    for (std::size_t c = 0; c < p; ++c) {
      double dot = 0.0;
      for (std::size_t i = jj; i < m; ++i) dot += v[i - jj] * q(i, c);
      if (dot == 0.0) continue;
      for (std::size_t i = jj; i < m; ++i) q(i, c) -= 2.0 * v[i - jj] * dot;
    }
  }
  return q;
}

namespace {

double column_dot(const Matrix& m, std::size_t p, std::size_t q) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) s += m(i, p) * m(i, q);
  return s;
}

void rotate_columns(Matrix& m, std::size_t p, std::size_t q, double c, double s) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double xp = m(i, p);
    const double xq = m(i, q);
    m(i, p) = c * xp - s * xq;
    m(i, q) = s * xp + c * xq;
  }
}

// Fills columns of `basis` whose norm is zero with unit vectors orthogonal to
// all other columns (Gram-Schmidt over the standard basis).
void complete_basis(Matrix& basis, const std::vector<bool>& filled) {
  std::vector<bool> have = filled;
  std::size_t next_unit = 0;
  for (std::size_t c = 0; c < basis.cols; ++c) {
    if (have[c]) continue;
    while (next_unit < basis.rows) {
      std::vector<double> e(basis.rows, 0.0);
      e[next_unit++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < basis.cols; ++o) {
          if (!have[o]) continue;
          double dot = 0.0;
          for (std::size_t i = 0; i < basis.rows; ++i) dot += basis(i, o) * e[i];
          for (std::size_t i = 0; i < basis.rows; ++i) e[i] -= dot * basis(i, o);
        }
      }
      double norm = 0.0;
      for (double x : e) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (std::size_t i = 0; i < basis.rows; ++i) basis(i, c) = e[i] / norm;
        have[c] = true;
        break;
      }
    }
  }
}

}  // namespace

Svd jacobi_svd(const Matrix& a) {
  // Work on the orientation with at least as many rows as columns; the
  // columns of W are rotated until mutually orthogonal, W·J = U·Σ.
  const bool flip = a.rows < a.cols;
  Matrix w = flip ? a.transposed() : a;
  const std::size_t r = w.cols;
  Matrix j = Matrix::identity(r);
  constexpr double eps = 1e-15;
  constexpr int max_sweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < r; ++p) {
      for (std::size_t q = p + 1; q < r; ++q) {
        const double alpha = column_dot(w, p, p);
        const double beta = column_dot(w, q, q);
        const double gamma = column_dot(w, p, q);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_columns(w, p, q, c, s);
        rotate_columns(j, p, q, c, s);
      }
    }
  }
  if (!converged) throw ConvergenceError("jacobi svd did not converge", 0.0);

  std::vector<double> norms(r);
  double top = 0.0;
  for (std::size_t c = 0; c < r; ++c) {
    norms[c] = std::sqrt(column_dot(w, c, c));
    top = std::max(top, norms[c]);
  }
  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  Svd out;
  Matrix left(w.rows, r), right(r, r);
  out.sigma.resize(r);
  std::vector<bool> filled(r);
  const double cutoff = top * 1e-14;
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t c = order[k];
    const bool nonzero = norms[c] > cutoff && norms[c] > 0.0;
    out.sigma[k] = nonzero ? norms[c] : 0.0;
    filled[k] = nonzero;
    for (std::size_t i = 0; i < w.rows; ++i) left(i, k) = nonzero ? w(i, c) / norms[c] : 0.0;
    for (std::size_t i = 0; i < r; ++i) right(i, k) = j(i, c);
  }
  complete_basis(left, filled);
  // Orientation: a = left·Σ·rightᵀ (or its transpose when flipped).
  out.u = flip ? std::move(right) : std::move(left);
  out.v = flip ? std::move(left) : std::move(right);

  for (std::size_t k = 0; k < r; ++k) {
    std::size_t arg = 0;
    for (std::size_t i = 0; i < out.v.rows; ++i) {
      if (std::abs(out.v(i, k)) > std::abs(out.v(arg, k))) arg = i;
    }
    if (out.v(arg, k) < 0.0) {
      for (std::size_t i = 0; i < out.v.rows; ++i) out.v(i, k) = -out.v(i, k);
      for (std::size_t i = 0; i < out.u.rows; ++i) out.u(i, k) = -out.u(i, k);
    }
  }
  return out;
}

}  // namespace disinfo::linalg
