#include <cmath>

#include "doctest.h"
#include "vpem/datagen.hpp"
#include "vpem/engine_dec.hpp"
#include "vpem/errors.hpp"

using namespace vpem;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.a.size(); ++i)
    worst = std::max(worst, std::abs(a.a[i] - b.a[i]));
  return worst;
}

// Federated run with one client per hub on the hub-ordered data; the
// decentralized engine with exact averaging must match it.
FlResult fl_on_hub_layout(const Dataset& ds, const Graph& g,
                          const FeatureAssignment& assign, int h, int k,
                          std::uint64_t init_seed) {
  const auto plan = plan_decentralized(g, h, assign, 0, TieBreak::lowest_id);
  const Dataset working = permute_features(ds, plan.feature_perm);
  const int nb = plan.layout.num_blocks();
  std::vector<int> agent_of_feature(ds.d);
  for (int b = 0; b < nb; ++b)
    for (int f = plan.layout.blocks[b].first; f < plan.layout.blocks[b].second;
         ++f)
      agent_of_feature[f] = b;
  const auto hub_assign =
      assign_features(ds.d, nb, AssignScheme::by_list, agent_of_feature);
  FlOptions opts;
  opts.init.seed = init_seed;
  return fit_fl(working, gen_star(nb + 1), hub_assign, k, opts);
}

DecOptions oracle_options(std::uint64_t init_seed) {
  DecOptions opts;
  opts.consensus = {0, ConsensusMode::exact_oracle};
  opts.init.seed = init_seed;
  opts.ties = TieBreak::lowest_id;
  return opts;
}

}  // namespace

TEST_CASE("consensus initialization scaling identity") {
  // hubs of size 3 and 1 on four agents holding constants a and b
  const Graph g = gen_star(4);  // agents {0,1,2} one hub, {3} alone
  const auto part = cluster_hubs(
      Graph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}}), 1, 0,
      TieBreak::lowest_id);
  (void)g;
  REQUIRE(part.hubs.size() == 1);  // star of 4: one hub covers everything
  // build the two-hub case directly instead
  const Graph path = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  const auto p2 = cluster_hubs(path, 1, 0, TieBreak::lowest_id);
  REQUIRE(p2.hubs.size() == 2);
  REQUIRE(p2.hubs[0].members.size() == 3);
  REQUIRE(p2.hubs[1].members.size() == 1);
  const double a = 3.75, b = -1.25;
  std::vector<double> z0(4);
  for (int u : p2.hubs[0].members) z0[u] = 4.0 * a / 3.0;
  for (int u : p2.hubs[1].members) z0[u] = 4.0 * b / 1.0;
  double mean = 0.0;
  for (double v : z0) mean += v;
  mean /= 4.0;
  CHECK(mean == doctest::Approx(a + b).epsilon(1e-12));
}

TEST_CASE("single hub equals the centralized dense fit") {
  const Dataset ds = sample_gmm(random_gmm(2, 5, 1, 4.0), 60, 2);
  const Graph g = gen_star(5);
  const auto assign = assign_features(5, 5, AssignScheme::even);
  InitSpec init;
  init.seed = 6;
  const auto central = fit_centralized(ds, 2, BlockLayout::dense(5), init, {});

  for (auto mode : {ConsensusMode::exact_oracle, ConsensusMode::iterative}) {
    DecOptions opts = oracle_options(6);
    opts.consensus = {100, mode};
    const auto dec = fit_decentralized(ds, g, assign, 1, 2, opts);
    REQUIRE(dec.hubs.partition.hubs.size() == 1);
    REQUIRE(dec.trace.ll.size() == central.trace.ll.size());
    for (std::size_t t = 0; t < dec.trace.ll.size(); ++t)
      CHECK(dec.trace.ll[t] ==
            doctest::Approx(central.trace.ll[t]).epsilon(1e-10));
  }
}

TEST_CASE("exact oracle matches federated on the hub layout") {
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const Dataset ds =
        sample_gmm(random_gmm(2, 10, 10 + seed, 4.0), 80, 20 + seed);
    const Graph g = gen_cycle(5);
    const auto assign = assign_features(10, 5, AssignScheme::even);
    for (int h : {0, 1}) {
      const auto fl = fl_on_hub_layout(ds, g, assign, h, 2, seed);
      const auto dec =
          fit_decentralized(ds, g, assign, h, 2, oracle_options(seed));
      REQUIRE(dec.trace.ll.size() == fl.trace.ll.size());
      for (std::size_t t = 0; t < dec.trace.ll.size(); ++t)
        CHECK(std::abs(dec.trace.ll[t] - fl.trace.ll[t]) < 1e-10);
      for (const auto& gamma : dec.gamma_roots)
        CHECK(max_abs_diff(gamma, fl.resp.gamma) < 1e-12);
      // all roots agree exactly under exact averaging
      for (std::size_t b = 1; b < dec.gamma_roots.size(); ++b)
        CHECK(max_abs_diff(dec.gamma_roots[b], dec.gamma_roots[0]) < 1e-12);
    }
  }
}

TEST_CASE("m-step stays root-local and matches the hub-layout oracle") {
  const Dataset ds = sample_gmm(random_gmm(2, 6, 30, 4.0), 50, 31);
  const Graph g = gen_cycle(6);
  const auto assign = assign_features(6, 6, AssignScheme::even);
  const auto plan = plan_decentralized(g, 1, assign, 0, TieBreak::lowest_id);
  const Dataset working = permute_features(ds, plan.feature_perm);
  const auto theta0 = init_params(working, 2, plan.layout, 5,
                                  InitStrategy::kmeanspp_means);
  const auto w = metropolis_weights(g);
  DecSim sim = make_dec_sim(working, plan, w, theta0, kDefaultRegScale,
                            Exec::serial);
  sim.n_edges = static_cast<long>(g.edges.size());
  dec_e_step(sim, {0, ConsensusMode::exact_oracle});
  dec_m_step(sim);
  for (std::size_t b = 1; b < sim.roots.size(); ++b)
    for (int j = 0; j < 2; ++j)
      CHECK(sim.roots[b].pi_est[j] ==
            doctest::Approx(sim.roots[0].pi_est[j]).epsilon(1e-12));
  // against the centralized kernels on the same working data
  const auto es = e_step(working, theta0, Exec::serial);
  for (std::size_t b = 0; b < sim.roots.size(); ++b)
    CHECK(max_abs_diff(sim.roots[b].gamma_est, es.resp.gamma) < 1e-12);
  const auto mtheta = m_step(working, es.resp, plan.layout);
  for (std::size_t b = 0; b < sim.roots.size(); ++b) {
    const auto& root = sim.roots[b];
    for (int j = 0; j < 2; ++j)
      for (int p = 0; p < root.hi - root.lo; ++p)
        CHECK(root.mu_hub(j, p) ==
              doctest::Approx(mtheta.mu(j, root.lo + p)).epsilon(1e-10));
  }
}

TEST_CASE("one-hot responsibilities give hub-block cluster moments") {
  const Dataset ds = sample_gmm(random_gmm(2, 4, 33, 8.0), 40, 34);
  const Graph g = gen_cycle(4);
  const auto assign = assign_features(4, 4, AssignScheme::even);
  const auto plan = plan_decentralized(g, 0, assign, 0, TieBreak::lowest_id);
  const Dataset working = permute_features(ds, plan.feature_perm);
  const auto theta0 = init_params(working, 2, plan.layout, 5,
                                  InitStrategy::kmeanspp_means);
  DecSim sim = make_dec_sim(working, plan, metropolis_weights(g), theta0,
                            kDefaultRegScale, Exec::serial);
  for (auto& root : sim.roots) {
    root.gamma_est = Matrix(40, 2);
    for (int i = 0; i < 40; ++i) root.gamma_est(i, ds.labels[i]) = 1.0;
  }
  dec_m_step(sim);
  // each root holds the per-cluster mean of its own feature
  for (const auto& root : sim.roots) {
    for (int j = 0; j < 2; ++j) {
      double mean = 0.0;
      long count = 0;
      for (int i = 0; i < 40; ++i)
        if (ds.labels[i] == j) {
          mean += root.hub_data(i, 0);
          count++;
        }
      mean /= count;
      CHECK(root.mu_hub(j, 0) == doctest::Approx(mean).epsilon(1e-10));
      CHECK(root.pi_est[j] ==
            doctest::Approx(static_cast<double>(count) / 40).epsilon(1e-12));
    }
  }
}

TEST_CASE("one hundred rounds approximate the oracle closely") {
  const Dataset ds = sample_gmm(random_gmm(2, 10, 40, 4.0), 100, 41);
  const Graph g = gen_random_geometric(10, 0.4, 1);
  const auto assign = assign_features(10, 10, AssignScheme::even);
  const auto oracle_fit =
      fit_decentralized(ds, g, assign, 1, 2, oracle_options(2));
  DecOptions iter_opts = oracle_options(2);
  iter_opts.consensus = {100, ConsensusMode::iterative};
  const auto iter_fit = fit_decentralized(ds, g, assign, 1, 2, iter_opts);
  const double a = iter_fit.trace.ll.back();
  const double b = oracle_fit.trace.ll.back();
  CHECK(std::abs(a - b) / std::abs(b) < 1e-3);
}

TEST_CASE("doubling the rounds at least halves the disagreement") {
  const Dataset ds = sample_gmm(random_gmm(2, 15, 50, 3.0), 40, 51);
  const Graph g = gen_random_geometric(15, 0.6, 2);
  const auto wm = metropolis_weights(g);
  REQUIRE(wm.spectral_gap_bound <= 1.0 / std::sqrt(2.0));
  const auto assign = assign_features(15, 15, AssignScheme::even);
  const auto plan = plan_decentralized(g, 0, assign, 0, TieBreak::lowest_id);
  const Dataset working = permute_features(ds, plan.feature_perm);
  const auto theta0 = init_params(working, 2, plan.layout, 5,
                                  InitStrategy::kmeanspp_means);
  DecSim sim = make_dec_sim(working, plan, wm, theta0, kDefaultRegScale,
                            Exec::serial);
  auto disagreement = [&](int rounds) {
    dec_e_step(sim, {rounds, ConsensusMode::iterative});
    double worst = 0.0;
    for (std::size_t b = 1; b < sim.roots.size(); ++b)
      worst = std::max(worst, max_abs_diff(sim.roots[b].gamma_est,
                                           sim.roots[0].gamma_est));
    return worst;
  };
  const double d4 = disagreement(4);
  const double d8 = disagreement(8);
  REQUIRE(d4 > 1e-12);  // above the floating-point floor
  CHECK(d8 <= 0.5 * d4);
}

TEST_CASE("stopping consumes no extra communication") {
  const Dataset ds = sample_gmm(random_gmm(2, 5, 60, 4.0), 50, 61);
  const Graph g = gen_cycle(5);
  const auto assign = assign_features(5, 5, AssignScheme::even);
  DecOptions opts = oracle_options(1);
  opts.consensus = {20, ConsensusMode::iterative};
  const auto dec = fit_decentralized(ds, g, assign, 0, 2, opts);
  const long iters = dec.trace.iterations;
  // all wire traffic is E-step traffic: consensus rounds plus the root-to-
  // leaf q-term shares (zero here: every hub is a singleton at h=0)
  const long invocations = 50L * 2 * iters;
  CHECK(dec.comm.consensus_invocations == invocations);
  CHECK(dec.comm.scalars_on_wire ==
        2L * static_cast<long>(g.edges.size()) * 20 * invocations);
  CHECK(dec.comm.leaf_root_transfers == 0);
}

TEST_CASE("leaf transfers and q shares are counted at h=1") {
  const Dataset ds = sample_gmm(random_gmm(2, 5, 62, 4.0), 30, 63);
  const Graph g = gen_star(5);
  const auto assign = assign_features(5, 5, AssignScheme::even);
  DecOptions opts = oracle_options(3);
  const auto dec = fit_decentralized(ds, g, assign, 1, 2, opts);
  REQUIRE(dec.hubs.partition.hubs.size() == 1);
  // four leaves each forwarded their single feature for every example
  CHECK(dec.comm.leaf_root_transfers == 4L * 30);
  // oracle mode has no consensus traffic, only the root-to-leaf shares
  CHECK(dec.comm.scalars_on_wire == 4L * 30 * 2 * dec.trace.iterations);
}

TEST_CASE("batched runs cut consensus invocations per iteration") {
  const Dataset ds = sample_gmm(random_gmm(2, 5, 70, 4.0), 100, 71);
  const Graph g = gen_cycle(5);
  const auto assign = assign_features(5, 5, AssignScheme::even);
  DecOptions opts = oracle_options(4);
  opts.batch = 20;
  StopSpec stop;
  stop.tol_abs = 0.0;
  stop.tol_rel = 0.0;
  stop.max_iters = 6;
  opts.stop = stop;
  const auto dec = fit_decentralized(ds, g, assign, 0, 2, opts);
  REQUIRE(dec.comm.invocations_per_iteration.size() == 6);
  CHECK(dec.comm.invocations_per_iteration[0] == 100L * 2);  // init pass
  for (std::size_t t = 1; t < 6; ++t)
    CHECK(dec.comm.invocations_per_iteration[t] == 20L * 2);
}

TEST_CASE("partition mismatch is rejected") {
  const Dataset ds = sample_gmm(random_gmm(2, 5, 80, 4.0), 30, 81);
  const Graph g = gen_cycle(4);
  const auto assign = assign_features(5, 5, AssignScheme::even);
  CHECK_THROWS_AS(fit_decentralized(ds, g, assign, 0, 2, {}),
                  PartitionMismatch);
}
