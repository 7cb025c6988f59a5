#include "vpem/gmm.hpp"

#include <algorithm>
#include <atomic>
#include <cfloat>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_set>

#include "vpem/errors.hpp"
#include "vpem/rng.hpp"

namespace vpem {

BlockLayout BlockLayout::from_dims(const std::vector<int>& dims) {
  BlockLayout l;
  int pos = 0;
  for (int w : dims) {
    if (w < 0) throw DimensionMismatch("BlockLayout: negative block width");
    l.blocks.emplace_back(pos, pos + w);
    pos += w;
  }
  l.d = pos;
  return l;
}

void BlockLayout::validate() const {
  int pos = 0;
  for (auto [lo, hi] : blocks) {
    if (lo != pos || hi < lo)
      throw DimensionMismatch("BlockLayout: ranges must be sorted, disjoint "
                              "and covering");
    pos = hi;
  }
  if (pos != d) throw DimensionMismatch("BlockLayout: ranges do not cover d");
}

void GmmParams::validate() const {
  layout.validate();
  if (static_cast<int>(pi.size()) != k || mu.rows != k || mu.cols != layout.d)
    throw DimensionMismatch("GmmParams: inconsistent shapes");
  double s = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0)) throw NumericalFailure("GmmParams: negative weight");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12)
    throw NumericalFailure("GmmParams: weights sum to " + std::to_string(s));
  if (static_cast<int>(sigma.size()) != k)
    throw DimensionMismatch("GmmParams: sigma count");
  for (const auto& comp : sigma) {
    if (comp.size() != layout.blocks.size())
      throw DimensionMismatch("GmmParams: sigma block count");
    for (std::size_t b = 0; b < comp.size(); ++b) {
      const auto [lo, hi] = layout.blocks[b];
      if (comp[b].dim != hi - lo)
        throw DimensionMismatch("GmmParams: sigma block dim");
    }
  }
}

SigmaFactors factor_params(const GmmParams& theta) {
  SigmaFactors out;
  out.f.resize(theta.k);
  for (int j = 0; j < theta.k; ++j) {
    out.f[j].reserve(theta.sigma[j].size());
    for (std::size_t b = 0; b < theta.sigma[j].size(); ++b) {
      try {
        out.f[j].push_back(cholesky(theta.sigma[j][b]));
      } catch (const NotPositiveDefinite& e) {
        throw NumericalFailure("covariance block " + std::to_string(b) +
                               " of component " + std::to_string(j) +
                               " is not positive definite: " + e.what());
      }
    }
  }
  return out;
}

double q_block(const CholeskyFactor& f, const double* xrow,
               const double* murow, int lo, int hi) {
  const int n = hi - lo;
  if (n == 0) return 0.0;
  if (f.dim != n) throw DimensionMismatch("q_block: range vs factor dim");
  double q = f.log_det;
  double ybuf[64];
  std::vector<double> heap;
  double* y = ybuf;
  if (n > 64) {
    heap.resize(n);
    y = heap.data();
  }
  const double* lw = f.lower.data();
  for (int i = 0; i < n; ++i) {
    double s = xrow[lo + i] - murow[lo + i];
    const double* li = lw + static_cast<std::size_t>(i) * n;
    for (int t = 0; t < i; ++t) s -= li[t] * y[t];
    const double yi = s / li[i];
    y[i] = yi;
    q += yi * yi;
  }
  return q;
}

void finalize_gamma_row(const double* qsum, const double* log_pi, int k, int d,
                        double* gamma_row, double* ll_m) {
  double maxv = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) {
    const double l = log_pi[j] - 0.5 * qsum[j];
    gamma_row[j] = l;  // reuse as logit store
    if (l > maxv) maxv = l;
  }
  double s = 0.0;
  for (int j = 0; j < k; ++j) {
    const double e = std::exp(gamma_row[j] - maxv);
    gamma_row[j] = e;
    s += e;
  }
  for (int j = 0; j < k; ++j) gamma_row[j] /= s;
  *ll_m = maxv + std::log(s) - 0.5 * d * kLog2Pi;
}

std::vector<double> gamma_col_sums(const Matrix& gamma) {
  std::vector<double> w(gamma.cols, 0.0);
  for (int i = 0; i < gamma.rows; ++i) {
    const double* row = gamma.row(i);
    for (int j = 0; j < gamma.cols; ++j) w[j] += row[j];
  }
  return w;
}

double empty_component_threshold(int m) { return 10.0 * DBL_EPSILON * m; }

void mstep_mu_range(const Matrix& x, const Matrix& gamma, int k, double denom,
                    int lo, int hi, double* out) {
  const int len = hi - lo;
  std::fill(out, out + len, 0.0);
  for (int i = 0; i < x.rows; ++i) {
    const double g = gamma(i, k);
    const double* xrow = x.row(i);
    for (int j = 0; j < len; ++j) out[j] += g * xrow[lo + j];
  }
  for (int j = 0; j < len; ++j) out[j] /= denom;
}

SymMatrix mstep_sigma_range(const Matrix& x, const Matrix& gamma, int k,
                            double denom, const double* mu_slice, int lo,
                            int hi) {
  const int n = hi - lo;
  SymMatrix s(n);
  if (n == 0) return s;
  std::vector<double> c(n);
  for (int i = 0; i < x.rows; ++i) {
    const double g = gamma(i, k);
    const double* xrow = x.row(i);
    for (int j = 0; j < n; ++j) c[j] = xrow[lo + j] - mu_slice[j];
    for (int p = 0; p < n; ++p) {
      const double gc = g * c[p];
      double* row = s.e.data() + static_cast<std::size_t>(p) * n;
      for (int q = p; q < n; ++q) row[q] += gc * c[q];
    }
  }
  for (int p = 0; p < n; ++p)
    for (int q = p; q < n; ++q) {
      const double v = s(p, q) / denom;
      s.set(p, q, v);
    }
  return s;
}

SymMatrix covariance_range(const Matrix& x, int lo, int hi) {
  const int n = hi - lo;
  const int m = x.rows;
  std::vector<double> mean(n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* xrow = x.row(i);
    for (int j = 0; j < n; ++j) mean[j] += xrow[lo + j];
  }
  for (int j = 0; j < n; ++j) mean[j] /= m;
  SymMatrix s(n);
  std::vector<double> c(n);
  for (int i = 0; i < m; ++i) {
    const double* xrow = x.row(i);
    for (int j = 0; j < n; ++j) c[j] = xrow[lo + j] - mean[j];
    for (int p = 0; p < n; ++p) {
      double* row = s.e.data() + static_cast<std::size_t>(p) * n;
      for (int q = p; q < n; ++q) row[q] += c[p] * c[q];
    }
  }
  for (int p = 0; p < n; ++p)
    for (int q = p; q < n; ++q) s.set(p, q, s(p, q) / m);
  return s;
}

void regularize_block(SymMatrix& s, double scale) {
  const double eps = scale * s.mean_diagonal();
  for (int i = 0; i < s.dim; ++i)
    s.e[static_cast<std::size_t>(i) * s.dim + i] += eps;
  try {
    (void)cholesky(s);
  } catch (const NotPositiveDefinite& e) {
    throw NumericalFailure(std::string("covariance block not positive "
                                       "definite after regularization: ") +
                           e.what());
  }
}

double log_gaussian(std::span<const double> x, std::span<const double> mu,
                    const std::vector<CholeskyFactor>& blocks,
                    const BlockLayout& layout) {
  if (static_cast<int>(x.size()) != layout.d ||
      static_cast<int>(mu.size()) != layout.d ||
      blocks.size() != layout.blocks.size())
    throw DimensionMismatch("log_gaussian: inconsistent dimensions");
  double q = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [lo, hi] = layout.blocks[b];
    q += q_block(blocks[b], x.data(), mu.data(), lo, hi);
  }
  return -0.5 * layout.d * kLog2Pi - 0.5 * q;
}

EStepResult e_step(const Dataset& data, const GmmParams& theta, Exec exec) {
  if (data.d != theta.layout.d)
    throw DimensionMismatch("e_step: data dimension " +
                            std::to_string(data.d) + " vs layout " +
                            std::to_string(theta.layout.d));
  const int m = data.m;
  const int k = theta.k;
  const SigmaFactors fac = factor_params(theta);
  std::vector<double> log_pi(k);
  for (int j = 0; j < k; ++j) log_pi[j] = std::log(theta.pi[j]);

  EStepResult res;
  res.resp.gamma = Matrix(m, k);
  res.ll_per_example.resize(m);
  const auto& blocks = theta.layout.blocks;
  const int nb = static_cast<int>(blocks.size());
  std::atomic<bool> bad{false};

  par_for(exec, m, [&](std::int64_t i) {
    thread_local std::vector<double> qsum;
    qsum.resize(k);
    const double* xrow = data.x.row(static_cast<int>(i));
    for (int j = 0; j < k; ++j) {
      double q = 0.0;
      for (int b = 0; b < nb; ++b)
        q += q_block(fac.f[j][b], xrow, theta.mu.row(j), blocks[b].first,
                     blocks[b].second);
      qsum[j] = q;
    }
    finalize_gamma_row(qsum.data(), log_pi.data(), k, data.d,
                       res.resp.gamma.row(static_cast<int>(i)),
                       &res.ll_per_example[i]);
    if (!std::isfinite(res.ll_per_example[i]))
      bad.store(true, std::memory_order_relaxed);
  });
  if (bad.load())
    throw NumericalFailure("e_step: non-finite log-likelihood contribution");

  double ll = 0.0;
  for (int i = 0; i < m; ++i) ll += res.ll_per_example[i];
  res.ll = ll;
  return res;
}

GmmParams m_step(const Dataset& data, const Responsibilities& resp,
                 const BlockLayout& layout, double reg_scale, Exec exec) {
  if (resp.gamma.rows != data.m || layout.d != data.d)
    throw DimensionMismatch("m_step: inconsistent dimensions");
  const int m = data.m;
  const int k = resp.gamma.cols;
  const auto w = gamma_col_sums(resp.gamma);
  const double thresh = empty_component_threshold(m);
  for (int j = 0; j < k; ++j)
    if (w[j] < thresh)
      throw EmptyComponent("component " + std::to_string(j) +
                           " has responsibility mass " + std::to_string(w[j]));

  GmmParams theta;
  theta.k = k;
  theta.layout = layout;
  theta.pi.resize(k);
  theta.mu = Matrix(k, layout.d);
  theta.sigma.assign(k, {});
  for (int j = 0; j < k; ++j) theta.pi[j] = w[j] / m;

  const int nb = layout.num_blocks();
  std::vector<std::string> errors(k);
  par_for(exec, k, [&](std::int64_t jj) {
    const int j = static_cast<int>(jj);
    try {
      const double denom = static_cast<double>(m) * theta.pi[j];
      mstep_mu_range(data.x, resp.gamma, j, denom, 0, layout.d,
                     theta.mu.row(j));
      theta.sigma[j].reserve(nb);
      for (int b = 0; b < nb; ++b) {
        const auto [lo, hi] = layout.blocks[b];
        SymMatrix s = mstep_sigma_range(data.x, resp.gamma, j, denom,
                                        theta.mu.row(j) + lo, lo, hi);
        regularize_block(s, reg_scale);
        theta.sigma[j].push_back(std::move(s));
      }
    } catch (const Error& e) {
      errors[j] = e.what();
    }
  });
  for (const auto& msg : errors)
    if (!msg.empty()) throw NumericalFailure(msg);
  return theta;
}

namespace {

double dist2_rows(const Matrix& x, int a, const double* c) {
  double s = 0.0;
  const double* ra = x.row(a);
  for (int j = 0; j < x.cols; ++j) {
    const double diff = ra[j] - c[j];
    s += diff * diff;
  }
  return s;
}

bool has_k_distinct_rows(const Dataset& data, int k) {
  std::unordered_set<std::string> seen;
  for (int i = 0; i < data.m; ++i) {
    const double* row = data.x.row(i);
    seen.emplace(reinterpret_cast<const char*>(row),
                 sizeof(double) * data.d);
    if (static_cast<int>(seen.size()) >= k) return true;
  }
  return false;
}

}  // namespace

GmmParams init_params(const Dataset& data, int k, const BlockLayout& layout,
                      std::uint64_t seed, InitStrategy strategy,
                      double reg_scale) {
  if (k < 1) throw InvalidParameter("init_params: k must be >= 1");
  if (data.m < k)
    throw DegenerateData("init_params: need at least k examples");
  if (layout.d != data.d)
    throw DimensionMismatch("init_params: layout vs data dimension");
  if (!has_k_distinct_rows(data, k))
    throw DegenerateData("init_params: fewer than k distinct examples");

  Rng rng = make_stream(seed, RngStream::init);
  const int m = data.m;

  if (strategy == InitStrategy::random_responsibility) {
    Responsibilities resp;
    resp.gamma = Matrix(m, k);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      double* row = resp.gamma.row(i);
      for (int j = 0; j < k; ++j) {
        row[j] = -std::log(rng.uniform_pos());
        s += row[j];
      }
      for (int j = 0; j < k; ++j) row[j] /= s;
    }
    GmmParams theta = m_step(data, resp, layout, reg_scale, Exec::serial);
    for (int j = 0; j < k; ++j) theta.pi[j] = 1.0 / k;
    return theta;
  }

  // kmeans++ means: k data points by distance-weighted sampling.
  std::vector<int> centers;
  centers.push_back(rng.uniform_int(m));
  std::vector<double> dist(m);
  for (int i = 0; i < m; ++i)
    dist[i] = dist2_rows(data.x, i, data.x.row(centers[0]));
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) total += dist[i];
    if (!(total > 0.0))
      throw DegenerateData("init_params: fewer than k distinct examples");
    const double r = rng.uniform() * total;
    double cum = 0.0;
    int pick = -1;
    for (int i = 0; i < m; ++i) {
      cum += dist[i];
      if (r < cum) {
        pick = i;
        break;
      }
    }
    if (pick < 0) {  // fp edge: take the last example with positive weight
      for (int i = m - 1; i >= 0; --i)
        if (dist[i] > 0.0) {
          pick = i;
          break;
        }
    }
    centers.push_back(pick);
    for (int i = 0; i < m; ++i)
      dist[i] = std::min(dist[i], dist2_rows(data.x, i, data.x.row(pick)));
  }

  GmmParams theta;
  theta.k = k;
  theta.layout = layout;
  theta.pi.assign(k, 1.0 / k);
  theta.mu = Matrix(k, data.d);
  for (int j = 0; j < k; ++j)
    std::memcpy(theta.mu.row(j), data.x.row(centers[j]),
                sizeof(double) * data.d);
  theta.sigma.assign(k, {});
  std::vector<SymMatrix> blocks;
  for (auto [lo, hi] : layout.blocks) {
    SymMatrix s = covariance_range(data.x, lo, hi);
    regularize_block(s, reg_scale);
    blocks.push_back(std::move(s));
  }
  for (int j = 0; j < k; ++j) theta.sigma[j] = blocks;
  return theta;
}

void reseed_components(GmmParams& theta, const std::vector<int>& dead,
                       const Dataset& data,
                       const std::vector<double>& ll_per_example,
                       double reg_scale) {
  // worst-fit examples: lowest per-example log-likelihood first
  std::vector<int> order(data.m);
  for (int i = 0; i < data.m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ll_per_example[a] < ll_per_example[b];
  });
  std::vector<SymMatrix> blocks;
  for (auto [lo, hi] : theta.layout.blocks) {
    SymMatrix s = covariance_range(data.x, lo, hi);
    regularize_block(s, reg_scale);
    blocks.push_back(std::move(s));
  }
  for (std::size_t t = 0; t < dead.size(); ++t) {
    const int j = dead[t];
    const int src = order[t % order.size()];
    std::memcpy(theta.mu.row(j), data.x.row(src), sizeof(double) * data.d);
    theta.sigma[j] = blocks;
    theta.pi[j] = 1.0 / theta.k;
  }
  double s = 0.0;
  for (double p : theta.pi) s += p;
  for (double& p : theta.pi) p /= s;
}

FitResult fit_centralized(const Dataset& data, int k,
                          const BlockLayout& layout, const InitSpec& init,
                          const StopSpec& stop, const FitOptions& opts) {
  if (k < 1) throw InvalidParameter("fit_centralized: k must be >= 1");
  if (data.m < k)
    throw DegenerateData("fit_centralized: need at least k examples");

  GmmParams theta =
      init.explicit_params
          ? *init.explicit_params
          : init_params(data, k, layout, init.seed, init.strategy,
                        opts.reg_scale);

  FitResult out;
  FitTrace trace;
  double prev = 0.0;
  const double thresh = empty_component_threshold(data.m);

  for (int t = 0; t < stop.max_iters; ++t) {
    EStepResult es = e_step(data, theta, opts.exec);
    trace.ll.push_back(es.ll);
    out.resp = std::move(es.resp);
    if (t > 0 && stop.plateaued(prev, es.ll)) {
      trace.converged = true;
      trace.stop_reason = StopReason::ll_plateau;
      break;
    }
    prev = es.ll;

    const auto w = gamma_col_sums(out.resp.gamma);
    std::vector<int> dead;
    for (int j = 0; j < k; ++j)
      if (w[j] < thresh) dead.push_back(j);
    if (!dead.empty()) {
      if (!opts.reseed_empty)
        throw EmptyComponent("component " + std::to_string(dead.front()) +
                             " lost all responsibility mass");
      reseed_components(theta, dead, data, es.ll_per_example, opts.reg_scale);
      continue;
    }
    theta = m_step(data, out.resp, layout, opts.reg_scale, opts.exec);
  }
  trace.iterations = static_cast<int>(trace.ll.size());
  if (!trace.converged) trace.stop_reason = StopReason::max_iters;
  out.params = std::move(theta);
  out.trace = std::move(trace);
  return out;
}

GmmParams params_to_original_order(const GmmParams& src,
                                   const std::vector<int>& perm) {
  const int d = src.layout.d;
  if (static_cast<int>(perm.size()) != d)
    throw DimensionMismatch("params_to_original_order: permutation length");
  // block id + offset per permuted position
  std::vector<int> block_of(d), off_of(d);
  for (int b = 0; b < src.layout.num_blocks(); ++b) {
    const auto [lo, hi] = src.layout.blocks[b];
    for (int p = lo; p < hi; ++p) {
      block_of[p] = b;
      off_of[p] = p - lo;
    }
  }
  GmmParams out;
  out.k = src.k;
  out.layout = BlockLayout::dense(d);
  out.pi = src.pi;
  out.mu = Matrix(src.k, d);
  out.sigma.assign(src.k, {SymMatrix(d)});
  for (int j = 0; j < src.k; ++j) {
    for (int a = 0; a < d; ++a) out.mu(j, a) = src.mu(j, perm[a]);
    SymMatrix& dense = out.sigma[j][0];
    for (int a = 0; a < d; ++a) {
      const int pa = perm[a];
      for (int b2 = a; b2 < d; ++b2) {
        const int pb = perm[b2];
        double v = 0.0;
        if (block_of[pa] == block_of[pb])
          v = src.sigma[j][block_of[pa]](off_of[pa], off_of[pb]);
        dense.set(a, b2, v);
      }
    }
  }
  return out;
}

GmmParams params_from_original_order(const GmmParams& dense_orig,
                                     const std::vector<int>& perm,
                                     const BlockLayout& layout) {
  const int d = layout.d;
  if (dense_orig.layout.num_blocks() != 1 || dense_orig.layout.d != d ||
      static_cast<int>(perm.size()) != d)
    throw DimensionMismatch("params_from_original_order: expected dense "
                            "input of matching dimension");
  std::vector<int> inv(d);
  for (int a = 0; a < d; ++a) inv[perm[a]] = a;
  GmmParams out;
  out.k = dense_orig.k;
  out.layout = layout;
  out.pi = dense_orig.pi;
  out.mu = Matrix(out.k, d);
  out.sigma.assign(out.k, {});
  for (int j = 0; j < out.k; ++j) {
    for (int p = 0; p < d; ++p) out.mu(j, p) = dense_orig.mu(j, inv[p]);
    for (auto [lo, hi] : layout.blocks) {
      SymMatrix s(hi - lo);
      const SymMatrix& dense = dense_orig.sigma[j][0];
      for (int p = lo; p < hi; ++p)
        for (int q = p; q < hi; ++q)
          s.set(p - lo, q - lo, dense(inv[p], inv[q]));
      out.sigma[j].push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace vpem
