#pragma once

// Brute-force reference implementations used only by tests. These stay
// independent of the library's computation paths: plain Gaussian
// elimination, direct densities without log-space, explicit loops.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "vpem/dataset.hpp"
#include "vpem/gmm.hpp"
#include "vpem/linalg.hpp"

namespace oracle {

// Solve A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> ge_solve(const vpem::SymMatrix& a,
                                    std::vector<double> b) {
  const int n = a.dim;
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = a(i, j);
  std::vector<double> x = std::move(b);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    std::swap(m[col], m[piv]);
    std::swap(x[col], x[piv]);
    for (int r = col + 1; r < n; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < n; ++c) m[r][c] -= f * m[col][c];
      x[r] -= f * x[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    for (int c = r + 1; c < n; ++c) x[r] -= m[r][c] * x[c];
    x[r] /= m[r][r];
  }
  return x;
}

inline double quad_form_ge(const vpem::SymMatrix& a,
                           const std::vector<double>& v) {
  const auto x = ge_solve(a, v);
  double s = 0.0;
  for (int i = 0; i < a.dim; ++i) s += v[i] * x[i];
  return s;
}

// Determinant via LU (partial pivoting).
inline double determinant(const vpem::SymMatrix& a) {
  const int n = a.dim;
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = a(i, j);
  double det = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (piv != col) {
      std::swap(m[col], m[piv]);
      det = -det;
    }
    det *= m[col][col];
    for (int r = col + 1; r < n; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return det;
}

// Dense block-diagonal Gaussian density, no log-space anywhere.
inline double gaussian_density(const std::vector<double>& x,
                               const std::vector<double>& mu,
                               const std::vector<vpem::SymMatrix>& blocks,
                               const vpem::BlockLayout& layout) {
  double dens = 1.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [lo, hi] = layout.blocks[b];
    const int len = hi - lo;
    if (len == 0) continue;
    std::vector<double> v(len);
    for (int i = 0; i < len; ++i) v[i] = x[lo + i] - mu[lo + i];
    const double q = quad_form_ge(blocks[b], v);
    const double det = determinant(blocks[b]);
    dens *= std::pow(2.0 * std::numbers::pi, -0.5 * len) /
            std::sqrt(det) * std::exp(-0.5 * q);
  }
  return dens;
}

// Direct responsibilities and log-likelihood by density ratios.
struct NaiveEStep {
  vpem::Matrix gamma;
  double ll = 0.0;
};

inline NaiveEStep e_step(const vpem::Dataset& data,
                         const vpem::GmmParams& theta) {
  NaiveEStep out;
  out.gamma = vpem::Matrix(data.m, theta.k);
  for (int i = 0; i < data.m; ++i) {
    std::vector<double> x(data.x.row(i), data.x.row(i) + data.d);
    std::vector<double> dens(theta.k);
    double total = 0.0;
    for (int j = 0; j < theta.k; ++j) {
      std::vector<double> mu(theta.mu.row(j), theta.mu.row(j) + data.d);
      dens[j] = theta.pi[j] *
                gaussian_density(x, mu, theta.sigma[j], theta.layout);
      total += dens[j];
    }
    for (int j = 0; j < theta.k; ++j) out.gamma(i, j) = dens[j] / total;
    out.ll += std::log(total);
  }
  return out;
}

// Explicit-loop M-step (weights, means, block-masked scatter).
inline vpem::GmmParams m_step(const vpem::Dataset& data,
                              const vpem::Matrix& gamma,
                              const vpem::BlockLayout& layout) {
  const int m = data.m, d = data.d, k = gamma.cols;
  vpem::GmmParams theta;
  theta.k = k;
  theta.layout = layout;
  theta.pi.assign(k, 0.0);
  theta.mu = vpem::Matrix(k, d);
  theta.sigma.assign(k, {});
  for (int j = 0; j < k; ++j) {
    double w = 0.0;
    for (int i = 0; i < m; ++i) w += gamma(i, j);
    theta.pi[j] = w / m;
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += gamma(i, j) * data.x(i, c);
      theta.mu(j, c) = s / w;
    }
    for (auto [lo, hi] : layout.blocks) {
      vpem::SymMatrix blk(hi - lo);
      for (int p = lo; p < hi; ++p)
        for (int q = lo; q < hi; ++q) {
          double s = 0.0;
          for (int i = 0; i < m; ++i)
            s += gamma(i, j) * (data.x(i, p) - theta.mu(j, p)) *
                 (data.x(i, q) - theta.mu(j, q));
          blk.set(p - lo, q - lo, s / w);
        }
      theta.sigma[j].push_back(std::move(blk));
    }
  }
  return theta;
}

// Expected complete-data log-likelihood at fixed responsibilities.
inline double surrogate_q(const vpem::Dataset& data,
                          const vpem::Matrix& gamma,
                          const vpem::GmmParams& theta) {
  double total = 0.0;
  for (int i = 0; i < data.m; ++i) {
    std::vector<double> x(data.x.row(i), data.x.row(i) + data.d);
    for (int j = 0; j < theta.k; ++j) {
      std::vector<double> mu(theta.mu.row(j), theta.mu.row(j) + data.d);
      const double dens =
          gaussian_density(x, mu, theta.sigma[j], theta.layout);
      total += gamma(i, j) * (std::log(theta.pi[j]) + std::log(dens));
    }
  }
  return total;
}

// Jacobi eigenvalue iteration for small symmetric matrices.
inline std::vector<double> sym_eigenvalues(const vpem::Matrix& a) {
  const int n = a.rows;
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = a(i, j);
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m[p][q] * m[p][q];
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(m[p][q]) < 1e-18) continue;
        const double theta2 = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
        const double t = (theta2 >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta2) + std::sqrt(theta2 * theta2 + 1));
        const double c = 1.0 / std::sqrt(t * t + 1);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double mip = m[i][p], miq = m[i][q];
          m[i][p] = c * mip - s * miq;
          m[i][q] = s * mip + c * miq;
        }
        for (int i = 0; i < n; ++i) {
          const double mpi = m[p][i], mqi = m[q][i];
          m[p][i] = c * mpi - s * mqi;
          m[q][i] = s * mpi + c * mqi;
        }
      }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = m[i][i];
  return eig;
}

// Best label permutation by rescanning the raw vectors per mapping
// (factorial, tiny k only).
inline double accuracy_exhaustive(const std::vector<int>& pred,
                                  const std::vector<int>& labels, int k) {
  std::vector<int> perm(k);
  for (int i = 0; i < k; ++i) perm[i] = i;
  long best = -1;
  do {
    long s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (perm[pred[i]] == labels[i]) s++;
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

}  // namespace oracle
