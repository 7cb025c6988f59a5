#pragma once

#include <span>
#include <vector>

#include "vpem/parallel.hpp"
#include "vpem/topology.hpp"

namespace vpem {

enum class ConsensusMode { iterative, exact_oracle };

struct ConsensusConfig {
  int rounds = 100;  // ignored by exact_oracle
  ConsensusMode mode = ConsensusMode::iterative;
};

// One averaging problem: S applications of z <- W z, or the exact mean in
// oracle mode.
std::vector<double> run_consensus(const WeightMatrix& w,
                                  std::span<const double> z0,
                                  const ConsensusConfig& cfg);

// Batched form: states is problems x agents, updated in place. All problems
// share the same S rounds; rows are independent, so the parallel mode is
// bitwise identical to the serial one.
void run_consensus_many(const WeightMatrix& w, Matrix& states,
                        const ConsensusConfig& cfg,
                        Exec exec = Exec::parallel);

// max_u |z_u - mean(z0)|
double consensus_error(std::span<const double> z, std::span<const double> z0);

}  // namespace vpem
