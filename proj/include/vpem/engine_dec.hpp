#pragma once

#include <cstdint>
#include <vector>

#include "vpem/consensus.hpp"
#include "vpem/engine_fl.hpp"
#include "vpem/gmm.hpp"
#include "vpem/hubs.hpp"

namespace vpem {

// State held by the root of one hub. Leaves keep nothing after the initial
// data transfer; they only relay consensus traffic.
struct RootState {
  int hub_id = 0;
  int root_agent = 0;
  std::vector<int> member_agents;
  int lo = 0, hi = 0;  // feature range in hub order
  Matrix hub_data;     // m x db
  Matrix mu_hub;       // k x db
  std::vector<SymMatrix> sigma_hub;   // k
  std::vector<double> pi_est;         // k, root-local estimate
  Matrix gamma_est;                   // m x k, root-local estimate
  std::vector<double> ll_per_example; // root-local running log-likelihood
};

struct RootStats {
  std::vector<double> w;
  Matrix s;
  std::vector<SymMatrix> t;
};

struct CommStats {
  long consensus_invocations = 0;
  int rounds_per_invocation = 0;
  long scalars_on_wire = 0;
  long leaf_root_transfers = 0;
  std::vector<long> invocations_per_iteration;
  std::vector<long> wire_per_iteration;
};

struct DecSim {
  int m = 0, d = 0, k = 0, n_agents = 0;
  long n_edges = 0;
  std::vector<RootState> roots;
  std::vector<int> hub_of_agent;
  std::vector<int> hub_size;
  WeightMatrix w;
  CommStats comm;
  std::vector<RootStats> stats;
  int iteration = 0;
  double reg_scale = kDefaultRegScale;
  Exec exec = Exec::parallel;
};

DecSim make_dec_sim(const Dataset& working, const HubLayout& hubs,
                    const WeightMatrix& w, const GmmParams& theta0,
                    double reg_scale, Exec exec);

// E-step over `rows` (empty = all): roots compute Q-terms, share them with
// their leaves, all agents average states initialized with N*Q/|H|, roots
// normalize locally. Returns each root's running log-likelihood estimate.
std::vector<double> dec_e_step(DecSim& sim, const ConsensusConfig& cfg,
                               const std::vector<int>& rows = {});

// Root-local parameter updates, no communication.
void dec_m_step(DecSim& sim);

struct DecIterRecord {
  double ll_mean = 0.0;
  double ll_max_disagreement = 0.0;
  long consensus_invocations = 0;
  int rounds = 0;
  long scalars_on_wire = 0;
};

struct DecOptions {
  InitSpec init;
  StopSpec stop;
  ConsensusConfig consensus;
  int batch = 0;
  double reg_scale = kDefaultRegScale;
  bool reseed_empty = false;
  Exec exec = Exec::parallel;
  TieBreak ties = TieBreak::seeded_random;
  std::uint64_t cluster_seed = 0;
  std::uint64_t batch_seed = 0;
};

struct DecResult {
  GmmParams params;  // assembled, hub feature order; pi averaged over roots
  std::vector<int> feature_perm;  // original index -> hub position
  HubLayout hubs;
  Responsibilities resp_mean;       // mean over roots (reporting)
  std::vector<Matrix> gamma_roots;  // per-root local estimates
  std::vector<double> root_ll_final;
  FitTrace trace;  // ll = mean of root estimates
  std::vector<DecIterRecord> iters;
  CommStats comm;
};

// The clustering/permutation a fit with these inputs will use; lets callers
// build explicit initial parameters in the right feature order.
HubLayout plan_decentralized(const Graph& g, int h,
                             const FeatureAssignment& assign,
                             std::uint64_t cluster_seed, TieBreak ties);

DecResult fit_decentralized(const Dataset& data, const Graph& g,
                            const FeatureAssignment& assign, int h, int k,
                            const DecOptions& opts);

}  // namespace vpem
