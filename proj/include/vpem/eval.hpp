#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vpem/gmm.hpp"

namespace vpem {

// argmax per row, ties to the lowest index
std::vector<int> hard_assign(const Responsibilities& resp);

struct AccuracyReport {
  double accuracy = 0.0;
  std::vector<int> permutation;  // cluster -> label under the maximizer
  std::vector<std::vector<long>> confusion;  // pred x true counts
};

// Best cluster-to-label bijection: exhaustive over permutations for k <= 8,
// assignment solver above.
AccuracyReport clustering_accuracy(std::span<const int> pred,
                                   std::span<const int> labels, int k);

// Exposed for the dual-route check; both must agree.
std::vector<int> best_match_exhaustive(
    const std::vector<std::vector<long>>& confusion);
std::vector<int> best_match_hungarian(
    const std::vector<std::vector<long>>& confusion);

struct KmeansResult {
  std::vector<int> assign;
  double inertia = 0.0;
  Matrix centers;
  std::vector<double> inertia_per_iteration;
};

// Lloyd iterations from kmeans++ seeding; best inertia over restarts; empty
// clusters reseeded from the farthest point.
KmeansResult kmeans_baseline(const Dataset& ds, int k, std::uint64_t seed,
                             int restarts, Exec exec = Exec::parallel);

}  // namespace vpem
