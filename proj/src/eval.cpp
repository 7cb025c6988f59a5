#include "vpem/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "vpem/errors.hpp"
#include "vpem/rng.hpp"

namespace vpem {

std::vector<int> hard_assign(const Responsibilities& resp) {
  std::vector<int> out(resp.gamma.rows);
  for (int i = 0; i < resp.gamma.rows; ++i) {
    const double* row = resp.gamma.row(i);
    int best = 0;
    for (int j = 1; j < resp.gamma.cols; ++j)
      if (row[j] > row[best]) best = j;
    out[i] = best;
  }
  return out;
}

std::vector<int> best_match_exhaustive(
    const std::vector<std::vector<long>>& confusion) {
  const int k = static_cast<int>(confusion.size());
  std::vector<int> perm(k), best(k);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  long best_score = -1;
  do {
    long score = 0;
    for (int c = 0; c < k; ++c) score += confusion[c][perm[c]];
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// O(k^3) Kuhn-Munkres on the negated counts (minimization form).
std::vector<int> best_match_hungarian(
    const std::vector<std::vector<long>>& confusion) {
  const int n = static_cast<int>(confusion.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur =
            -static_cast<double>(confusion[i0 - 1][j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j]) match[p[j] - 1] = j - 1;
  return match;
}

AccuracyReport clustering_accuracy(std::span<const int> pred,
                                   std::span<const int> labels, int k) {
  if (pred.size() != labels.size())
    throw DimensionMismatch("clustering_accuracy: length mismatch");
  const long m = static_cast<long>(pred.size());
  AccuracyReport rep;
  rep.confusion.assign(k, std::vector<long>(k, 0));
  for (long i = 0; i < m; ++i) {
    if (pred[i] < 0 || pred[i] >= k || labels[i] < 0 || labels[i] >= k)
      throw DimensionMismatch("clustering_accuracy: value out of [0, k)");
    rep.confusion[pred[i]][labels[i]]++;
  }
  rep.permutation = k <= 8 ? best_match_exhaustive(rep.confusion)
                           : best_match_hungarian(rep.confusion);
  long matched = 0;
  for (int c = 0; c < k; ++c) matched += rep.confusion[c][rep.permutation[c]];
  rep.accuracy = static_cast<double>(matched) / static_cast<double>(m);
  return rep;
}

namespace {

struct LloydRun {
  Matrix centers;
  std::vector<int> assign;
  double inertia = 0.0;
  std::vector<double> inertia_per_iteration;
};

double row_dist2(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int j = 0; j < d; ++j) {
    const double c = a[j] - b[j];
    s += c * c;
  }
  return s;
}

LloydRun lloyd_once(const Dataset& ds, int k, Rng& rng, Exec exec) {
  const int m = ds.m, d = ds.d;
  // kmeans++ seeding
  Matrix centers(k, d);
  std::vector<double> dist(m);
  int c0 = rng.uniform_int(m);
  std::memcpy(centers.row(0), ds.x.row(c0), sizeof(double) * d);
  for (int i = 0; i < m; ++i)
    dist[i] = row_dist2(ds.x.row(i), centers.row(0), d);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) total += dist[i];
    if (!(total > 0.0))
      throw DegenerateData("kmeans: fewer than k distinct examples");
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
    if (pick < 0)
      for (int i = m - 1; i >= 0; --i)
        if (dist[i] > 0.0) {
          pick = i;
          break;
        }
    std::memcpy(centers.row(c), ds.x.row(pick), sizeof(double) * d);
    for (int i = 0; i < m; ++i)
      dist[i] = std::min(dist[i], row_dist2(ds.x.row(i), centers.row(c), d));
  }

  LloydRun run;
  run.assign.assign(m, -1);
  std::vector<double> best_d2(m);
  const int max_iters = 300;
  for (int it = 0; it < max_iters; ++it) {
    // assignment (parallel, rows independent)
    std::vector<int> next(m);
    par_for(exec, m, [&](std::int64_t i) {
      const double* xrow = ds.x.row(static_cast<int>(i));
      int best = 0;
      double bd = row_dist2(xrow, centers.row(0), d);
      for (int c = 1; c < k; ++c) {
        const double d2 = row_dist2(xrow, centers.row(c), d);
        if (d2 < bd) {
          bd = d2;
          best = c;
        }
      }
      next[i] = best;
      best_d2[i] = bd;
    });
    double inertia = 0.0;
    for (int i = 0; i < m; ++i) inertia += best_d2[i];
    run.inertia_per_iteration.push_back(inertia);
    const bool stable = next == run.assign;
    run.assign = std::move(next);
    run.inertia = inertia;
    if (stable) break;

    // means (serial, fixed order)
    Matrix sums(k, d);
    std::vector<long> counts(k, 0);
    for (int i = 0; i < m; ++i) {
      const int c = run.assign[i];
      counts[c]++;
      const double* xrow = ds.x.row(i);
      double* srow = sums.row(c);
      for (int j = 0; j < d; ++j) srow[j] += xrow[j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // reseed from the farthest point
        int far = 0;
        for (int i = 1; i < m; ++i)
          if (best_d2[i] > best_d2[far]) far = i;
        std::memcpy(centers.row(c), ds.x.row(far), sizeof(double) * d);
        best_d2[far] = 0.0;
        continue;
      }
      for (int j = 0; j < d; ++j) centers(c, j) = sums(c, j) / counts[c];
    }
  }
  run.centers = std::move(centers);
  return run;
}

}  // namespace

KmeansResult kmeans_baseline(const Dataset& ds, int k, std::uint64_t seed,
                             int restarts, Exec exec) {
  if (k < 1 || restarts < 1)
    throw InvalidParameter("kmeans_baseline: k and restarts must be >= 1");
  if (ds.m < k) throw DegenerateData("kmeans_baseline: need at least k rows");
  std::vector<LloydRun> runs(restarts);
  // Restarts are independent; fixed-order best selection keeps the result
  // schedule-independent.
  par_for(exec, restarts, [&](std::int64_t r) {
    Rng rng = make_stream(seed, RngStream::restart, static_cast<std::uint64_t>(r));
    runs[r] = lloyd_once(ds, k, rng, Exec::serial);
  });
  int best = 0;
  for (int r = 1; r < restarts; ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;
  KmeansResult out;
  out.assign = std::move(runs[best].assign);
  out.inertia = runs[best].inertia;
  out.centers = std::move(runs[best].centers);
  out.inertia_per_iteration = std::move(runs[best].inertia_per_iteration);
  return out;
}

}  // namespace vpem
