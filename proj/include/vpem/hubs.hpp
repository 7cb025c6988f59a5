#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpem/gmm.hpp"
#include "vpem/topology.hpp"

namespace vpem {

struct Hub {
  int root = -1;
  std::vector<int> members;  // sorted ascending, includes the root
  std::pair<int, int> block_range{0, 0};  // set by assign_feature_blocks
};

struct HubPartition {
  int n = 0;  // agent count
  int h = 0;
  std::vector<Hub> hubs;  // extraction order

  // Agents in hub extraction order, members ascending within a hub.
  std::vector<int> agent_order() const;
};

enum class TieBreak { seeded_random, lowest_id };

// Greedy extraction: repeatedly take the residual vertex whose h-hop ball in
// the residual graph is largest, remove the ball as a hub. h = 0 gives one
// singleton hub per agent.
HubPartition cluster_hubs(const Graph& g, int h, std::uint64_t seed,
                          TieBreak ties = TieBreak::seeded_random);

// Hub feature layout after reordering features hub-by-hub (members in
// ascending order inside a hub). perm maps original feature index to its
// reordered position.
struct HubLayout {
  HubPartition partition;  // with block_range filled in
  std::vector<int> feature_perm;
  BlockLayout layout;
};

HubLayout assign_feature_blocks(const HubPartition& p,
                                const std::vector<int>& agent_dims);

// One line per hub: "hub <b> root <r> members <list> range <lo>..<hi>"
std::string hub_table(const HubPartition& p);

}  // namespace vpem
