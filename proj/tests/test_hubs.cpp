#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

#include "doctest.h"
#include "vpem/errors.hpp"
#include "vpem/hubs.hpp"

using namespace vpem;

namespace {

// The nine-agent graph whose 1-hop clustering is pinned below.
Graph nine_agent_graph() {
  return Graph::from_edges(
      9, {{1, 0}, {1, 2}, {1, 3}, {1, 4}, {4, 8}, {5, 6}, {5, 7}, {4, 5}});
}

// BFS distance inside an induced subgraph.
int induced_distance(const Graph& g, const std::vector<int>& members, int from,
                     int to) {
  std::set<int> alive(members.begin(), members.end());
  std::vector<int> dist(g.n, -1);
  const auto adj = g.adjacency();
  std::deque<int> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[u])
      if (alive.count(v) && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }
  return dist[to];
}

}  // namespace

TEST_CASE("star with h=1 is a single hub rooted at the center") {
  const auto p = cluster_hubs(gen_star(5), 1, 0, TieBreak::lowest_id);
  REQUIRE(p.hubs.size() == 1);
  CHECK(p.hubs[0].root == 0);
  CHECK(p.hubs[0].members == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("cycle of five with h=1 splits three plus two") {
  const auto p = cluster_hubs(gen_cycle(5), 1, 0, TieBreak::lowest_id);
  REQUIRE(p.hubs.size() == 2);
  CHECK(p.hubs[0].members.size() == 3);
  CHECK(p.hubs[1].members.size() == 2);
}

TEST_CASE("nine-agent graph, 1-hop, deterministic ties") {
  const auto p = cluster_hubs(nine_agent_graph(), 1, 0, TieBreak::lowest_id);
  REQUIRE(p.hubs.size() == 3);
  CHECK(p.hubs[0].root == 1);
  CHECK(p.hubs[0].members == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(p.hubs[1].root == 5);
  CHECK(p.hubs[1].members == std::vector<int>{5, 6, 7});
  CHECK(p.hubs[2].root == 8);
  CHECK(p.hubs[2].members == std::vector<int>{8});
}

TEST_CASE("h=0 gives singletons") {
  const auto p = cluster_hubs(gen_cycle(6), 0, 0, TieBreak::lowest_id);
  REQUIRE(p.hubs.size() == 6);
  for (int b = 0; b < 6; ++b) {
    CHECK(p.hubs[b].root == b);
    CHECK(p.hubs[b].members == std::vector<int>{b});
  }
}

TEST_CASE("partition and radius properties on random graphs") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Graph g = gen_random_geometric(14, 0.35, seed);
    for (int h : {0, 1, 2}) {
      const auto p = cluster_hubs(g, h, seed);
      std::vector<int> owner(g.n, -1);
      for (std::size_t b = 0; b < p.hubs.size(); ++b)
        for (int v : p.hubs[b].members) {
          CHECK(owner[v] == -1);
          owner[v] = static_cast<int>(b);
        }
      for (int v = 0; v < g.n; ++v) CHECK(owner[v] >= 0);
      // residual graph at extraction time = everything not yet extracted
      std::vector<int> residual(g.n);
      std::iota(residual.begin(), residual.end(), 0);
      for (const auto& hub : p.hubs) {
        for (int v : hub.members) {
          const int dist = induced_distance(g, residual, hub.root, v);
          CHECK(dist >= 0);
          CHECK(dist <= h);
        }
        for (int v : hub.members)
          residual.erase(std::find(residual.begin(), residual.end(), v));
      }
    }
  }
}

TEST_CASE("greedy root maximizes the residual ball at every step") {
  const Graph g = gen_scale_free(12, 2, 4);
  const auto p = cluster_hubs(g, 1, 0, TieBreak::lowest_id);
  const auto adj = g.adjacency();
  std::vector<char> alive(g.n, 1);
  for (const auto& hub : p.hubs) {
    auto ball_size = [&](int src) {
      std::set<int> ball{src};
      for (int v : adj[src])
        if (alive[v]) ball.insert(v);
      return static_cast<int>(ball.size());
    };
    const int got = ball_size(hub.root);
    for (int v = 0; v < g.n; ++v)
      if (alive[v]) CHECK(ball_size(v) <= got);
    for (int v : hub.members) alive[v] = 0;
  }
}

TEST_CASE("seeded ties are deterministic per seed") {
  const Graph g = gen_cycle(8);
  const auto a = cluster_hubs(g, 1, 42);
  const auto b = cluster_hubs(g, 1, 42);
  REQUIRE(a.hubs.size() == b.hubs.size());
  for (std::size_t i = 0; i < a.hubs.size(); ++i) {
    CHECK(a.hubs[i].root == b.hubs[i].root);
    CHECK(a.hubs[i].members == b.hubs[i].members);
  }
}

TEST_CASE("feature blocks: h=0 unit dims") {
  const auto p = cluster_hubs(gen_cycle(4), 0, 0, TieBreak::lowest_id);
  const auto hl = assign_feature_blocks(p, {1, 1, 1, 1});
  CHECK(hl.layout.num_blocks() == 4);
  for (int b = 0; b < 4; ++b) {
    CHECK(hl.layout.blocks[b] == std::pair<int, int>{b, b + 1});
    CHECK(hl.feature_perm[b] == b);
  }
}

TEST_CASE("feature blocks: single hub covers everything") {
  const auto p = cluster_hubs(gen_star(5), 1, 0, TieBreak::lowest_id);
  const auto hl = assign_feature_blocks(p, {2, 1, 1, 1, 1});
  CHECK(hl.layout.num_blocks() == 1);
  CHECK(hl.layout.blocks[0] == std::pair<int, int>{0, 6});
}

TEST_CASE("feature blocks: nine-agent example with unit dims") {
  const auto p = cluster_hubs(nine_agent_graph(), 1, 0, TieBreak::lowest_id);
  const auto hl = assign_feature_blocks(p, std::vector<int>(9, 1));
  REQUIRE(hl.layout.num_blocks() == 3);
  CHECK(hl.layout.blocks[0].second - hl.layout.blocks[0].first == 5);
  CHECK(hl.layout.blocks[1].second - hl.layout.blocks[1].first == 3);
  CHECK(hl.layout.blocks[2].second - hl.layout.blocks[2].first == 1);
}

TEST_CASE("free covariance entries by hop count (measured, not asserted)") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Graph g = gen_random_geometric(12, 0.4, seed);
    long prev = -1;
    for (int h : {0, 1, 2}) {
      const auto p = cluster_hubs(g, h, seed, TieBreak::lowest_id);
      const auto hl = assign_feature_blocks(p, std::vector<int>(g.n, 1));
      long free_entries = 0;
      for (auto [lo, hi] : hl.layout.blocks)
        free_entries += static_cast<long>(hi - lo) * (hi - lo);
      if (prev >= 0 && free_entries < prev)
        MESSAGE("free covariance entries decreased from h-1 to h=", h,
                " on seed ", seed, ": ", prev, " -> ", free_entries);
      prev = free_entries;
    }
  }
}

TEST_CASE("hub table format") {
  const auto p = cluster_hubs(nine_agent_graph(), 1, 0, TieBreak::lowest_id);
  const auto hl = assign_feature_blocks(p, std::vector<int>(9, 1));
  const std::string table = hub_table(hl.partition);
  CHECK(table ==
        "hub 0 root 1 members 0 1 2 3 4 range 0..5\n"
        "hub 1 root 5 members 5 6 7 range 5..8\n"
        "hub 2 root 8 members 8 range 8..9\n");
}

TEST_CASE("disconnected graphs are rejected") {
  const Graph g = Graph::from_edges(4, {{0, 1}, {2, 3}});
  CHECK_THROWS_AS(cluster_hubs(g, 1, 0), NotConnected);
}
