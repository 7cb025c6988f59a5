#include "vpem/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "vpem/dataset.hpp"
#include "vpem/errors.hpp"
#include "vpem/rng.hpp"

namespace vpem {

Graph Graph::from_edges(int n, std::vector<std::pair<int, int>> edges) {
  if (n < 1) throw InvalidParameter("graph: n must be >= 1");
  for (auto& [u, v] : edges) {
    if (u == v) throw InvalidParameter("graph: self-loop at " +
                                       std::to_string(u));
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw InvalidParameter("graph: node id out of range");
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  Graph g;
  g.n = n;
  g.edges = std::move(edges);
  return g;
}

std::vector<std::vector<int>> Graph::adjacency() const {
  std::vector<std::vector<int>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

std::vector<int> Graph::degrees() const {
  std::vector<int> deg(n, 0);
  for (auto [u, v] : edges) {
    deg[u]++;
    deg[v]++;
  }
  return deg;
}

double Graph::mean_degree() const {
  return n == 0 ? 0.0 : 2.0 * static_cast<double>(edges.size()) / n;
}

bool is_connected(const Graph& g) {
  if (g.n == 0) return false;
  const auto adj = g.adjacency();
  std::vector<char> seen(g.n, 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int count = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        count++;
        queue.push_back(v);
      }
  }
  return count == g.n;
}

Graph gen_cycle(int n) {
  if (n < 2) throw InvalidParameter("gen_cycle: n must be >= 2");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  if (n == 2) edges.pop_back();  // avoid the duplicate 1-0 edge
  return Graph::from_edges(n, std::move(edges));
}

Graph gen_star(int n) {
  if (n < 2) throw InvalidParameter("gen_star: n must be >= 2");
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(0, i);
  return Graph::from_edges(n, std::move(edges));
}

Graph gen_random_geometric(int n, double radius, std::uint64_t seed) {
  if (n < 2) throw InvalidParameter("gen_random_geometric: n must be >= 2");
  if (!(radius > 0.0))
    throw InvalidParameter("gen_random_geometric: radius must be > 0");
  Rng rng = make_stream(seed, RngStream::graph);
  std::vector<double> px(n), py(n);
  for (int i = 0; i < n; ++i) {
    px[i] = rng.uniform();
    py[i] = rng.uniform();
  }
  double r = radius;
  for (;;) {
    std::vector<std::pair<int, int>> edges;
    const double r2 = r * r;
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) {
        const double dx = px[u] - px[v];
        const double dy = py[u] - py[v];
        if (dx * dx + dy * dy <= r2) edges.emplace_back(u, v);
      }
    Graph g = Graph::from_edges(n, std::move(edges));
    if (is_connected(g)) return g;
    r *= 1.1;
  }
}

Graph gen_scale_free(int n, int m_attach, std::uint64_t seed) {
  if (n < 2) throw InvalidParameter("gen_scale_free: n must be >= 2");
  if (m_attach < 1 || m_attach >= n)
    throw InvalidParameter("gen_scale_free: need 1 <= m_attach < n");
  Rng rng = make_stream(seed, RngStream::graph);
  std::vector<std::pair<int, int>> edges;
  std::vector<int> endpoints;  // one entry per edge endpoint
  const int seed_nodes = m_attach;
  for (int u = 0; u < seed_nodes; ++u)
    for (int v = u + 1; v < seed_nodes; ++v) {
      edges.emplace_back(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  for (int i = seed_nodes; i < n; ++i) {
    std::set<int> targets;
    const int want = std::min(m_attach, i);
    int guard = 0;
    while (static_cast<int>(targets.size()) < want && guard < 100000) {
      int t;
      if (endpoints.empty()) {
        t = rng.uniform_int(i);
      } else {
        t = endpoints[rng.uniform_int(static_cast<int>(endpoints.size()))];
      }
      targets.insert(t);
      guard++;
    }
    for (int t = 0; static_cast<int>(targets.size()) < want; ++t)
      if (t < i) targets.insert(t);
    for (int t : targets) {
      edges.emplace_back(t, i);
      endpoints.push_back(t);
      endpoints.push_back(i);
    }
  }
  return Graph::from_edges(n, std::move(edges));
}

WeightMatrix metropolis_weights(const Graph& g) {
  if (!is_connected(g)) throw NotConnected("metropolis_weights");
  const auto deg = g.degrees();
  WeightMatrix wm;
  wm.n = g.n;
  wm.w = Matrix(g.n, g.n);
  for (auto [u, v] : g.edges) {
    const double w = 1.0 / (1.0 + std::max(deg[u], deg[v]));
    wm.w(u, v) = w;
    wm.w(v, u) = w;
  }
  for (int u = 0; u < g.n; ++u) {
    double off = 0.0;
    for (int v = 0; v < g.n; ++v)
      if (v != u) off += wm.w(u, v);
    wm.w(u, u) = 1.0 - off;
  }
  wm.spectral_gap_bound = estimate_lambda2(wm);
  return wm;
}

double laplacian_lambda_max(const Graph& g) {
  // power iteration on L (PSD, so no deflation needed)
  const int n = g.n;
  const auto deg = g.degrees();
  const auto adj = g.adjacency();
  Rng rng = make_stream(0x1ac0de, RngStream::graph);
  std::vector<double> v(n), t(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform() - 0.5;
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (int u = 0; u < n; ++u) {
      double s = deg[u] * x[u];
      for (int w : adj[u]) s -= x[w];
      y[u] = s;
    }
  };
  double lam = 0.0;
  for (int it = 0; it < 100000; ++it) {
    apply(v, t);
    double norm = 0.0;
    for (double x : t) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) return 0.0;
    for (int i = 0; i < n; ++i) v[i] = t[i] / norm;
    apply(v, t);
    double r = 0.0;
    for (int i = 0; i < n; ++i) r += v[i] * t[i];
    if (it > 2 && std::abs(r - lam) <= 1e-13 * std::max(1.0, std::abs(r)))
      return r;
    lam = r;
  }
  return lam;  // close enough for a bound check
}

WeightMatrix laplacian_weights(const Graph& g, double alpha) {
  if (!is_connected(g)) throw NotConnected("laplacian_weights");
  const double lmax = laplacian_lambda_max(g);
  if (!(alpha > 0.0) || !(alpha < 2.0 / lmax))
    throw AlphaOutOfRange("laplacian_weights: alpha " + std::to_string(alpha) +
                          " outside (0, " + std::to_string(2.0 / lmax) + ")");
  const auto deg = g.degrees();
  WeightMatrix wm;
  wm.n = g.n;
  wm.w = Matrix(g.n, g.n);
  for (int u = 0; u < g.n; ++u) wm.w(u, u) = 1.0 - alpha * deg[u];
  for (auto [u, v] : g.edges) {
    wm.w(u, v) = alpha;
    wm.w(v, u) = alpha;
  }
  wm.spectral_gap_bound = estimate_lambda2(wm);
  return wm;
}

double estimate_lambda2(const WeightMatrix& wm) {
  const int n = wm.n;
  if (n < 1) throw InvalidParameter("estimate_lambda2: empty matrix");
  if (n == 1) return 0.0;

  // B = W - 11^T/n applied twice per step; the Rayleigh quotient of B^2
  // converges to lambda_2^2 even when +/- eigenvalue pairs are present.
  auto apply_deflated = [&](const std::vector<double>& x,
                            std::vector<double>& y) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    for (int u = 0; u < n; ++u) {
      double s = 0.0;
      const double* row = wm.w.row(u);
      for (int v = 0; v < n; ++v) s += row[v] * x[v];
      y[u] = s - mean;
    }
  };

  Rng rng = make_stream(0x5eedf00d, RngStream::graph);
  std::vector<double> v(n), t1(n), t2(n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = rng.uniform() - 0.5;
    mean += v[i];
  }
  mean /= n;
  double norm = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] -= mean;
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) return 0.0;
  for (int i = 0; i < n; ++i) v[i] /= norm;

  double prev = -1.0;
  int stable = 0;
  for (int it = 0; it < 100000; ++it) {
    apply_deflated(v, t1);
    apply_deflated(t1, t2);
    double r = 0.0;
    for (int i = 0; i < n; ++i) r += v[i] * t2[i];  // Rayleigh of B^2
    double tnorm = 0.0;
    for (double x : t2) tnorm += x * x;
    tnorm = std::sqrt(tnorm);
    if (tnorm < 1e-154) return 0.0;  // deflated matrix is (numerically) zero
    for (int i = 0; i < n; ++i) v[i] = t2[i] / tnorm;
    if (std::abs(r - prev) <= 1e-13 * std::max(1.0, std::abs(r))) {
      if (++stable >= 3) return std::sqrt(std::max(r, 0.0));
    } else {
      stable = 0;
    }
    prev = r;
  }
  throw ConvergenceFailure("estimate_lambda2: power iteration cap reached");
}

std::string graph_to_string(const Graph& g) {
  std::string out = "n " + std::to_string(g.n) + "\n";
  for (auto [u, v] : g.edges)
    out += std::to_string(u) + " " + std::to_string(v) + "\n";
  return out;
}

Graph graph_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  int n;
  if (!(in >> tag >> n) || tag != "n")
    throw ParseError("graph: expected header 'n <count>'");
  std::vector<std::pair<int, int>> edges;
  int u, v;
  while (in >> u >> v) edges.emplace_back(u, v);
  return Graph::from_edges(n, std::move(edges));
}

void save_graph(const Graph& g, const std::string& path) {
  write_file_atomic(path, graph_to_string(g));
}

Graph load_graph(const std::string& path) {
  return graph_from_string(read_file(path));
}

}  // namespace vpem
