#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vpem/linalg.hpp"

namespace vpem {

// Undirected simple graph, nodes 0..n-1. Edges stored normalized (u < v),
// sorted, no duplicates.
struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;

  static Graph from_edges(int n, std::vector<std::pair<int, int>> edges);
  std::vector<std::vector<int>> adjacency() const;
  std::vector<int> degrees() const;
  double mean_degree() const;
};

bool is_connected(const Graph& g);

Graph gen_cycle(int n);
Graph gen_star(int n);  // node 0 is the center
// Uniform points in the unit square, edges within radius; radius escalates
// by 1.1x until connected.
Graph gen_random_geometric(int n, double radius, std::uint64_t seed);
// Preferential attachment seeded with an m_attach-clique, m_attach edges per
// new node.
Graph gen_scale_free(int n, int m_attach, std::uint64_t seed);

struct WeightMatrix {
  int n = 0;
  Matrix w;  // symmetric, rows sum to 1, sparsity matches the graph
  double spectral_gap_bound = 0.0;  // estimated |lambda_2|
};

// w_uv = 1/(1 + max(deg u, deg v)) on edges, diagonal fills the row to 1.
WeightMatrix metropolis_weights(const Graph& g);

// w = I - alpha*L; requires 0 < alpha < 2/lambda_max(L).
WeightMatrix laplacian_weights(const Graph& g, double alpha);

// Second-largest absolute eigenvalue via power iteration on the matrix
// deflated by the known eigenpair (1, 1/sqrt(n)1).
double estimate_lambda2(const WeightMatrix& w);

double laplacian_lambda_max(const Graph& g);

// Edge-list text format: header "n <count>", then one "u v" per line.
std::string graph_to_string(const Graph& g);
Graph graph_from_string(const std::string& text);
void save_graph(const Graph& g, const std::string& path);
Graph load_graph(const std::string& path);

}  // namespace vpem
