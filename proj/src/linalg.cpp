#include "vpem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vpem/errors.hpp"

namespace vpem {

double SymMatrix::mean_diagonal() const {
  if (dim == 0) return 0.0;
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += (*this)(i, i);
  return s / dim;
}

CholeskyFactor cholesky(const SymMatrix& a) {
  const int n = a.dim;
  CholeskyFactor f;
  f.dim = n;
  f.lower.assign(static_cast<std::size_t>(n) * n, 0.0);
  if (n == 0) return f;  // empty block: |A| = 1, log det 0

  double max_diag = 0.0;
  for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
  const double tol = 1e-12 * max_diag;

  auto l = [&](int i, int j) -> double& {
    return f.lower[static_cast<std::size_t>(i) * n + j];
  };

  double half_log_det = 0.0;
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(d) +
                                " at index " + std::to_string(j) +
                                " (tolerance " + std::to_string(tol) + ")");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    half_log_det += std::log(ljj);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  f.log_det = 2.0 * half_log_det;
  return f;
}

double quad_form(const CholeskyFactor& f, std::span<const double> v) {
  const int n = f.dim;
  if (static_cast<int>(v.size()) != n) {
    throw DimensionMismatch("quad_form: vector length " +
                            std::to_string(v.size()) + " vs dim " +
                            std::to_string(n));
  }
  // forward solve L y = v, return ||y||^2
  double q = 0.0;
  double y[64];
  std::vector<double> heap;
  double* yp = y;
  if (n > 64) {
    heap.resize(n);
    yp = heap.data();
  }
  const double* lw = f.lower.data();
  for (int i = 0; i < n; ++i) {
    double s = v[i];
    const double* li = lw + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < i; ++k) s -= li[k] * yp[k];
    const double yi = s / li[i];
    yp[i] = yi;
    q += yi * yi;
  }
  return q;
}

SymMatrix regularize(const SymMatrix& a, double eps) {
  SymMatrix r = a;
  for (int i = 0; i < r.dim; ++i)
    r.e[static_cast<std::size_t>(i) * r.dim + i] += eps;
  return r;
}

}  // namespace vpem
