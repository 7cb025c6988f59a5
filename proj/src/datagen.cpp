#include "vpem/datagen.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "vpem/errors.hpp"
#include "vpem/rng.hpp"

namespace vpem {

GmmParams random_gmm(int k, int d, std::uint64_t seed, double separation) {
  if (k < 1 || d < 1) throw InvalidParameter("random_gmm: k, d must be >= 1");
  if (separation < 0.0)
    throw InvalidParameter("random_gmm: separation must be >= 0");
  Rng rng = make_stream(seed, RngStream::sampling);

  GmmParams theta;
  theta.k = k;
  theta.layout = BlockLayout::dense(d);
  theta.pi.resize(k);
  double ps = 0.0;
  for (int j = 0; j < k; ++j) {
    theta.pi[j] = -std::log(rng.uniform_pos());
    ps += theta.pi[j];
  }
  for (int j = 0; j < k; ++j) theta.pi[j] /= ps;

  // sigma = A A^T + I with A scaled to keep conditioning mild
  theta.sigma.assign(k, {});
  const double ascale = 1.0 / std::sqrt(2.0 * d);
  double mean_radius = 0.0;
  for (int j = 0; j < k; ++j) {
    Matrix a(d, d);
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q) a(p, q) = ascale * rng.normal();
    SymMatrix s(d);
    for (int p = 0; p < d; ++p)
      for (int q = p; q < d; ++q) {
        double v = (p == q) ? 1.0 : 0.0;
        for (int t = 0; t < d; ++t) v += a(p, t) * a(q, t);
        s.set(p, q, v);
      }
    double tr = 0.0;
    for (int p = 0; p < d; ++p) tr += s(p, p);
    mean_radius += std::sqrt(tr / d);
    theta.sigma[j].push_back(std::move(s));
  }
  mean_radius /= k;

  theta.mu = Matrix(k, d);
  if (k == 1) {
    for (int j = 0; j < d; ++j) theta.mu(0, j) = rng.normal();
    return theta;
  }
  const double min_dist = separation * mean_radius;
  double box = std::max(min_dist, 1.0) * std::cbrt(static_cast<double>(k));
  const int max_tries = 200;
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    for (int j = 0; j < k; ++j)
      for (int t = 0; t < d; ++t) theta.mu(j, t) = box * rng.uniform();
    double worst = std::numeric_limits<double>::infinity();
    for (int a2 = 0; a2 < k; ++a2)
      for (int b = a2 + 1; b < k; ++b) {
        double s = 0.0;
        for (int t = 0; t < d; ++t) {
          const double diff = theta.mu(a2, t) - theta.mu(b, t);
          s += diff * diff;
        }
        worst = std::min(worst, std::sqrt(s));
      }
    if (worst >= min_dist) return theta;
    box *= 1.3;
  }
  throw SeparationInfeasible("random_gmm: could not place " +
                             std::to_string(k) + " means with separation " +
                             std::to_string(separation));
}

Dataset sample_gmm(const GmmParams& theta_true, int m, std::uint64_t seed) {
  theta_true.validate();
  if (theta_true.layout.num_blocks() != 1)
    throw InvalidParameter("sample_gmm: ground truth must use a dense layout");
  const int d = theta_true.layout.d;
  const int k = theta_true.k;
  std::vector<CholeskyFactor> chol(k);
  for (int j = 0; j < k; ++j) chol[j] = cholesky(theta_true.sigma[j][0]);
  std::vector<double> cum(k);
  double acc = 0.0;
  for (int j = 0; j < k; ++j) {
    acc += theta_true.pi[j];
    cum[j] = acc;
  }

  Rng rng = make_stream(seed, RngStream::sampling);
  Dataset ds;
  ds.m = m;
  ds.d = d;
  ds.x = Matrix(m, d);
  ds.labels.resize(m);
  std::vector<double> z(d);
  for (int i = 0; i < m; ++i) {
    const double u = rng.uniform();
    int comp = k - 1;
    for (int j = 0; j < k; ++j)
      if (u < cum[j]) {
        comp = j;
        break;
      }
    ds.labels[i] = comp;
    for (int t = 0; t < d; ++t) z[t] = rng.normal();
    const auto& l = chol[comp].lower;
    double* xrow = ds.x.row(i);
    for (int p = 0; p < d; ++p) {
      double s = theta_true.mu(comp, p);
      const double* lrow = l.data() + static_cast<std::size_t>(p) * d;
      for (int t = 0; t <= p; ++t) s += lrow[t] * z[t];
      xrow[p] = s;
    }
  }
  return ds;
}

}  // namespace vpem
