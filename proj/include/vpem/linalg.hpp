#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vpem {

// Dense row-major matrix of doubles, zero-initialized.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c)
      : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return a.data() + static_cast<std::size_t>(i) * cols;
  }
};

// Symmetric matrix; set() writes both triangles so symmetry holds exactly.
struct SymMatrix {
  int dim = 0;
  std::vector<double> e;  // row-major dim*dim

  SymMatrix() = default;
  explicit SymMatrix(int d)
      : dim(d), e(static_cast<std::size_t>(d) * d, 0.0) {}

  static SymMatrix identity(int d) {
    SymMatrix s(d);
    for (int i = 0; i < d; ++i) s.e[static_cast<std::size_t>(i) * d + i] = 1.0;
    return s;
  }

  double operator()(int i, int j) const {
    return e[static_cast<std::size_t>(i) * dim + j];
  }
  void set(int i, int j, double v) {
    e[static_cast<std::size_t>(i) * dim + j] = v;
    e[static_cast<std::size_t>(j) * dim + i] = v;
  }

  double mean_diagonal() const;
};

struct CholeskyFactor {
  int dim = 0;
  std::vector<double> lower;  // row-major lower triangle, zeros above
  double log_det = 0.0;       // of the factored matrix, 2*sum(log(L_ii))
};

// Plain Cholesky, no pivoting. Throws NotPositiveDefinite when a pivot falls
// at or below 1e-12 times the largest diagonal entry of the input.
CholeskyFactor cholesky(const SymMatrix& a);

// v' A^-1 v via one forward substitution: ||L^-1 v||^2. Nonnegative by
// construction. Throws DimensionMismatch.
double quad_form(const CholeskyFactor& f, std::span<const double> v);

// a + eps*I
SymMatrix regularize(const SymMatrix& a, double eps);

}  // namespace vpem
