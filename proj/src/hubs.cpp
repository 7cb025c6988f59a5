#include "vpem/hubs.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include "vpem/errors.hpp"
#include "vpem/rng.hpp"

namespace vpem {

std::vector<int> HubPartition::agent_order() const {
  std::vector<int> order;
  order.reserve(n);
  for (const auto& hub : hubs)
    order.insert(order.end(), hub.members.begin(), hub.members.end());
  return order;
}

namespace {

// Nodes within h hops of src, restricted to alive vertices.
std::vector<int> residual_ball(int src, int h,
                               const std::vector<std::vector<int>>& adj,
                               const std::vector<char>& alive) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<int> queue{src};
  dist[src] = 0;
  std::vector<int> ball{src};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (dist[u] == h) continue;
    for (int v : adj[u])
      if (alive[v] && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        ball.push_back(v);
        queue.push_back(v);
      }
  }
  std::sort(ball.begin(), ball.end());
  return ball;
}

}  // namespace

HubPartition cluster_hubs(const Graph& g, int h, std::uint64_t seed,
                          TieBreak ties) {
  if (h < 0) throw InvalidParameter("cluster_hubs: h must be >= 0");
  if (!is_connected(g)) throw NotConnected("cluster_hubs");
  const auto adj = g.adjacency();
  std::vector<char> alive(g.n, 1);
  int remaining = g.n;

  Rng rng = make_stream(seed, RngStream::ties);
  HubPartition part;
  part.n = g.n;
  part.h = h;
  while (remaining > 0) {
    int best_size = -1;
    std::vector<int> candidates;
    std::vector<std::vector<int>> balls(g.n);
    for (int v = 0; v < g.n; ++v) {
      if (!alive[v]) continue;
      balls[v] = residual_ball(v, h, adj, alive);
      const int sz = static_cast<int>(balls[v].size());
      if (sz > best_size) {
        best_size = sz;
        candidates.assign(1, v);
      } else if (sz == best_size) {
        candidates.push_back(v);
      }
    }
    const int root =
        (ties == TieBreak::lowest_id || candidates.size() == 1)
            ? candidates.front()
            : candidates[rng.uniform_int(static_cast<int>(candidates.size()))];
    Hub hub;
    hub.root = root;
    hub.members = balls[root];
    for (int v : hub.members) {
      alive[v] = 0;
      remaining--;
    }
    part.hubs.push_back(std::move(hub));
  }
  return part;
}

HubLayout assign_feature_blocks(const HubPartition& p,
                                const std::vector<int>& agent_dims) {
  if (static_cast<int>(agent_dims.size()) != p.n)
    throw DimensionMismatch("assign_feature_blocks: dims per agent");
  const int d = std::accumulate(agent_dims.begin(), agent_dims.end(), 0);
  std::vector<int> offset(p.n, 0);
  for (int a = 1; a < p.n; ++a) offset[a] = offset[a - 1] + agent_dims[a - 1];

  HubLayout out;
  out.partition = p;
  out.feature_perm.assign(d, -1);
  int next = 0;
  std::vector<int> hub_dims;
  for (auto& hub : out.partition.hubs) {
    const int start = next;
    for (int a : hub.members)
      for (int t = 0; t < agent_dims[a]; ++t)
        out.feature_perm[offset[a] + t] = next++;
    hub.block_range = {start, next};
    hub_dims.push_back(next - start);
  }
  if (next != d)
    throw DimensionMismatch("assign_feature_blocks: dims do not cover d");
  out.layout = BlockLayout::from_dims(hub_dims);
  return out;
}

std::string hub_table(const HubPartition& p) {
  std::string out;
  for (std::size_t b = 0; b < p.hubs.size(); ++b) {
    const Hub& hub = p.hubs[b];
    out += "hub " + std::to_string(b) + " root " + std::to_string(hub.root) +
           " members";
    for (int v : hub.members) out += " " + std::to_string(v);
    out += " range " + std::to_string(hub.block_range.first) + ".." +
           std::to_string(hub.block_range.second) + "\n";
  }
  return out;
}

}  // namespace vpem
