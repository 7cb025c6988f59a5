#pragma once

#include <cstdint>
#include <vector>

#include "vpem/gmm.hpp"
#include "vpem/topology.hpp"

namespace vpem {

// The only things that ever cross the wire in the federated engine. Client
// uploads carry scalar Q-terms, never raw features; tests assert this
// structurally on the transcript.
enum class FlMsgKind { client_q_terms, server_q_sums };

struct FlMessage {
  FlMsgKind kind;
  int iteration;
  int client;  // -1 for the server broadcast
  long scalars;
};

struct FlCommStats {
  long up_scalars = 0;
  long down_scalars = 0;
  std::vector<long> up_per_iteration;
  std::vector<long> down_per_iteration;
  std::vector<FlMessage> transcript;
};

struct ClientState {
  int agent_id = 0;
  int lo = 0, hi = 0;  // feature range in the working data
  Matrix local_data;   // m x (hi-lo)
  Matrix mu_local;     // k x (hi-lo)
  std::vector<SymMatrix> sigma_local;  // k
  std::vector<double> pi_local;        // k
  Matrix gamma_local;                  // m x k
};

// Running sufficient statistics for the incremental (batch) updates.
struct ClientStats {
  std::vector<double> w;       // k
  Matrix s;                    // k x dn, sum gamma*x
  std::vector<SymMatrix> t;    // k raw second moments, sum gamma*x*x^T
};

struct FlSim {
  int m = 0, d = 0, k = 0;
  std::vector<ClientState> clients;
  std::vector<ClientStats> stats;  // used only under batching
  std::vector<double> ll_per_example;  // common client view
  FlCommStats comm;
  int iteration = 0;
  double reg_scale = kDefaultRegScale;
  Exec exec = Exec::parallel;
};

// Builds the per-client state from theta0 sliced along the layout blocks
// (client i <-> block i).
FlSim make_fl_sim(const Dataset& working, const BlockLayout& layout,
                  const GmmParams& theta0, double reg_scale, Exec exec);

// E-step over the given rows (empty = all M): clients upload Q-terms, the
// server sums, clients normalize locally. Returns the running
// log-likelihood estimate.
double fl_e_step(FlSim& sim, const std::vector<int>& rows = {});

// Local parameter updates; no messages.
void fl_m_step(FlSim& sim);

GmmParams fl_assemble_params(const FlSim& sim);

struct FlOptions {
  InitSpec init;
  StopSpec stop;
  int batch = 0;  // 0 or m: full batch
  double reg_scale = kDefaultRegScale;
  bool reseed_empty = false;
  Exec exec = Exec::parallel;
  std::uint64_t batch_seed = 0;
};

struct FlResult {
  GmmParams params;             // working feature order
  Responsibilities resp;
  FitTrace trace;
  FlCommStats comm;
  std::vector<int> feature_perm;  // original index -> working position
};

// Star-graph VP-EM. The graph must be a star with node 0 as server and one
// node per assignment agent.
FlResult fit_fl(const Dataset& data, const Graph& star,
                const FeatureAssignment& assign, int k,
                const FlOptions& opts);

// Grouping permutation for an arbitrary assignment: features ordered by
// (agent, original index). Identity for contiguous assignments.
std::vector<int> grouping_permutation(const FeatureAssignment& assign);

Dataset permute_features(const Dataset& ds, const std::vector<int>& perm);

bool is_identity_permutation(const std::vector<int>& perm);

}  // namespace vpem
