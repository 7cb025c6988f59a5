#include "vpem/engine_dec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "vpem/errors.hpp"
#include "vpem/rng.hpp"

namespace vpem {

DecSim make_dec_sim(const Dataset& working, const HubLayout& hubs,
                    const WeightMatrix& w, const GmmParams& theta0,
                    double reg_scale, Exec exec) {
  DecSim sim;
  sim.m = working.m;
  sim.d = working.d;
  sim.k = theta0.k;
  sim.n_agents = hubs.partition.n;
  sim.w = w;
  sim.reg_scale = reg_scale;
  sim.exec = exec;
  if (w.n != sim.n_agents)
    throw PartitionMismatch("dec: weight matrix does not match agent count");
  sim.hub_of_agent.assign(sim.n_agents, -1);
  const auto& part = hubs.partition;
  for (std::size_t b = 0; b < part.hubs.size(); ++b)
    for (int a : part.hubs[b].members)
      sim.hub_of_agent[a] = static_cast<int>(b);
  for (int a = 0; a < sim.n_agents; ++a)
    if (sim.hub_of_agent[a] < 0)
      throw PartitionMismatch("dec: agent " + std::to_string(a) +
                              " belongs to no hub");
  for (const auto& hub : part.hubs)
    sim.hub_size.push_back(static_cast<int>(hub.members.size()));

  sim.roots.resize(part.hubs.size());
  for (std::size_t b = 0; b < part.hubs.size(); ++b) {
    RootState& r = sim.roots[b];
    r.hub_id = static_cast<int>(b);
    r.root_agent = part.hubs[b].root;
    r.member_agents = part.hubs[b].members;
    r.lo = part.hubs[b].block_range.first;
    r.hi = part.hubs[b].block_range.second;
    const int db = r.hi - r.lo;
    r.hub_data = Matrix(working.m, db);
    for (int i = 0; i < working.m; ++i)
      std::memcpy(r.hub_data.row(i), working.x.row(i) + r.lo,
                  sizeof(double) * db);
    r.mu_hub = Matrix(sim.k, db);
    for (int j = 0; j < sim.k; ++j)
      std::memcpy(r.mu_hub.row(j), theta0.mu.row(j) + r.lo,
                  sizeof(double) * db);
    for (int j = 0; j < sim.k; ++j)
      r.sigma_hub.push_back(theta0.sigma[j][b]);
    r.pi_est = theta0.pi;
    r.gamma_est = Matrix(working.m, sim.k);
    r.ll_per_example.assign(working.m, 0.0);
  }
  return sim;
}

std::vector<double> dec_e_step(DecSim& sim, const ConsensusConfig& cfg,
                               const std::vector<int>& rows_in) {
  const int k = sim.k;
  std::vector<int> all_rows;
  const std::vector<int>* rows = &rows_in;
  if (rows_in.empty()) {
    all_rows.resize(sim.m);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    rows = &all_rows;
  }
  const int nr = static_cast<int>(rows->size());
  const int nb = static_cast<int>(sim.roots.size());

  // Per-hub Q terms, computed at the root.
  std::vector<Matrix> q(nb);
  for (int b = 0; b < nb; ++b) {
    RootState& root = sim.roots[b];
    const int db = root.hi - root.lo;
    std::vector<CholeskyFactor> fac;
    fac.reserve(k);
    for (int j = 0; j < k; ++j) {
      try {
        fac.push_back(cholesky(root.sigma_hub[j]));
      } catch (const NotPositiveDefinite& e) {
        throw NumericalFailure("dec_e_step: hub " + std::to_string(b) +
                               ", component " + std::to_string(j) + ": " +
                               e.what());
      }
    }
    q[b] = Matrix(nr, k);
    par_for(sim.exec, nr, [&](std::int64_t r) {
      const int i = (*rows)[r];
      const double* xrow = root.hub_data.row(i);
      double* out = q[b].row(static_cast<int>(r));
      for (int j = 0; j < k; ++j)
        out[j] = q_block(fac[j], xrow, root.mu_hub.row(j), 0, db);
    });
  }

  // Roots share Q with their leaves, then every agent joins the averaging
  // with state N*Q^b/|H_b|; the scaling makes the network mean equal the
  // hub sum.
  Matrix states(static_cast<long>(nr) * k, sim.n_agents);
  par_for(sim.exec, static_cast<std::int64_t>(nr) * k, [&](std::int64_t p) {
    const int r = static_cast<int>(p / k);
    const int j = static_cast<int>(p % k);
    double* srow = states.row(static_cast<int>(p));
    for (int b = 0; b < nb; ++b) {
      const double val =
          (static_cast<double>(sim.n_agents) * q[b](r, j)) / sim.hub_size[b];
      for (int a : sim.roots[b].member_agents) srow[a] = val;
    }
  });
  run_consensus_many(sim.w, states, cfg, sim.exec);

  // accounting
  const long invocations = static_cast<long>(nr) * k;
  long wire = 0;
  int rounds = 0;
  if (cfg.mode == ConsensusMode::iterative) {
    rounds = cfg.rounds;
    wire += 2L * sim.n_edges * cfg.rounds * invocations;
  }
  long leaf_sends = 0;
  for (int b = 0; b < nb; ++b) leaf_sends += sim.hub_size[b] - 1;
  wire += leaf_sends * invocations;  // root -> leaf Q-term shares
  sim.comm.consensus_invocations += invocations;
  sim.comm.rounds_per_invocation = rounds;
  sim.comm.scalars_on_wire += wire;
  if (static_cast<int>(sim.comm.invocations_per_iteration.size()) <=
      sim.iteration) {
    sim.comm.invocations_per_iteration.resize(sim.iteration + 1, 0);
    sim.comm.wire_per_iteration.resize(sim.iteration + 1, 0);
  }
  sim.comm.invocations_per_iteration[sim.iteration] += invocations;
  sim.comm.wire_per_iteration[sim.iteration] += wire;

  // Each root reads its own agent's estimate of the sum and normalizes with
  // its local weights. Everything below is root-local.
  std::vector<double> ll(nb, 0.0);
  for (int b = 0; b < nb; ++b) {
    RootState& root = sim.roots[b];
    std::vector<double> log_pi(k);
    for (int j = 0; j < k; ++j) log_pi[j] = std::log(root.pi_est[j]);
    par_for(sim.exec, nr, [&](std::int64_t r) {
      thread_local std::vector<double> qsum;
      qsum.resize(k);
      for (int j = 0; j < k; ++j)
        qsum[j] = states(static_cast<int>(r) * k + j, root.root_agent);
      const int i = (*rows)[r];
      double ll_m = 0.0;
      finalize_gamma_row(qsum.data(), log_pi.data(), k, sim.d,
                         root.gamma_est.row(i), &ll_m);
      root.ll_per_example[i] = ll_m;
    });
    double s = 0.0;
    for (int i = 0; i < sim.m; ++i) s += root.ll_per_example[i];
    ll[b] = s;
  }
  return ll;
}

void dec_m_step(DecSim& sim) {
  const double thresh = empty_component_threshold(sim.m);
  for (auto& root : sim.roots) {
    const auto w = gamma_col_sums(root.gamma_est);
    for (int j = 0; j < sim.k; ++j)
      if (w[j] < thresh)
        throw EmptyComponent("dec_m_step: hub " + std::to_string(root.hub_id) +
                             ", component " + std::to_string(j) +
                             " lost all responsibility mass");
    const int db = root.hi - root.lo;
    for (int j = 0; j < sim.k; ++j) {
      root.pi_est[j] = w[j] / sim.m;
      const double denom = static_cast<double>(sim.m) * root.pi_est[j];
      mstep_mu_range(root.hub_data, root.gamma_est, j, denom, 0, db,
                     root.mu_hub.row(j));
      SymMatrix s = mstep_sigma_range(root.hub_data, root.gamma_est, j, denom,
                                      root.mu_hub.row(j), 0, db);
      regularize_block(s, sim.reg_scale);
      root.sigma_hub[j] = std::move(s);
    }
  }
}

HubLayout plan_decentralized(const Graph& g, int h,
                             const FeatureAssignment& assign,
                             std::uint64_t cluster_seed, TieBreak ties) {
  if (assign.agents != g.n)
    throw PartitionMismatch("plan_decentralized: assignment has " +
                            std::to_string(assign.agents) +
                            " agents, graph has " + std::to_string(g.n));
  const HubPartition part = cluster_hubs(g, h, cluster_seed, ties);
  return assign_feature_blocks(part, assign.agent_dims());
}

namespace {

void dec_init_stats(DecSim& sim) {
  sim.stats.clear();
  sim.stats.resize(sim.roots.size());
  for (std::size_t b = 0; b < sim.roots.size(); ++b) {
    const RootState& root = sim.roots[b];
    const int db = root.hi - root.lo;
    RootStats& st = sim.stats[b];
    st.w = gamma_col_sums(root.gamma_est);
    st.s = Matrix(sim.k, db);
    st.t.assign(sim.k, SymMatrix(db));
    for (int i = 0; i < sim.m; ++i) {
      const double* xrow = root.hub_data.row(i);
      const double* grow = root.gamma_est.row(i);
      for (int j = 0; j < sim.k; ++j) {
        const double g = grow[j];
        double* srow = st.s.row(j);
        SymMatrix& t = st.t[j];
        for (int p = 0; p < db; ++p) srow[p] += g * xrow[p];
        for (int p = 0; p < db; ++p) {
          const double gx = g * xrow[p];
          double* trow = t.e.data() + static_cast<std::size_t>(p) * db;
          for (int qq = p; qq < db; ++qq) trow[qq] += gx * xrow[qq];
        }
      }
    }
    for (auto& t : st.t)
      for (int p = 0; p < db; ++p)
        for (int qq = p + 1; qq < db; ++qq) t.set(p, qq, t(p, qq));
  }
}

void dec_update_stats(DecSim& sim, const std::vector<int>& rows,
                      const std::vector<Matrix>& old_gamma) {
  for (std::size_t b = 0; b < sim.roots.size(); ++b) {
    const RootState& root = sim.roots[b];
    const int db = root.hi - root.lo;
    RootStats& st = sim.stats[b];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int i = rows[r];
      const double* xrow = root.hub_data.row(i);
      const double* gold = old_gamma[b].row(static_cast<int>(r));
      const double* gnew = root.gamma_est.row(i);
      for (int j = 0; j < sim.k; ++j) {
        st.w[j] -= gold[j];
        st.w[j] += gnew[j];
        double* srow = st.s.row(j);
        SymMatrix& t = st.t[j];
        for (int p = 0; p < db; ++p) {
          srow[p] -= gold[j] * xrow[p];
          srow[p] += gnew[j] * xrow[p];
        }
        for (int p = 0; p < db; ++p) {
          const double dx = (gnew[j] - gold[j]) * xrow[p];
          for (int qq = p; qq < db; ++qq) {
            const double v = t(p, qq) + dx * xrow[qq];
            t.set(p, qq, v);
          }
        }
      }
    }
  }
}

void dec_m_step_from_stats(DecSim& sim) {
  const double thresh = empty_component_threshold(sim.m);
  for (std::size_t b = 0; b < sim.roots.size(); ++b) {
    RootState& root = sim.roots[b];
    const RootStats& st = sim.stats[b];
    const int db = root.hi - root.lo;
    for (int j = 0; j < sim.k; ++j) {
      if (st.w[j] < thresh)
        throw EmptyComponent("dec_m_step: hub " + std::to_string(b) +
                             ", component " + std::to_string(j) +
                             " lost all responsibility mass");
      root.pi_est[j] = st.w[j] / sim.m;
      const double denom = static_cast<double>(sim.m) * root.pi_est[j];
      double* mu = root.mu_hub.row(j);
      for (int p = 0; p < db; ++p) mu[p] = st.s(j, p) / denom;
      SymMatrix s(db);
      for (int p = 0; p < db; ++p)
        for (int qq = p; qq < db; ++qq)
          s.set(p, qq, st.t[j](p, qq) / denom - mu[p] * mu[qq]);
      regularize_block(s, sim.reg_scale);
      root.sigma_hub[j] = std::move(s);
    }
  }
}

// Root-local reseeding: each root replaces its dead components from its own
// worst-fit example, hub covariance, uniform weight share.
void dec_reseed(DecSim& sim) {
  const double thresh = empty_component_threshold(sim.m);
  for (auto& root : sim.roots) {
    const auto w = gamma_col_sums(root.gamma_est);
    std::vector<int> dead;
    for (int j = 0; j < sim.k; ++j)
      if (w[j] < thresh) dead.push_back(j);
    if (dead.empty()) continue;
    const int db = root.hi - root.lo;
    std::vector<int> order(sim.m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b2) {
      return root.ll_per_example[a] < root.ll_per_example[b2];
    });
    SymMatrix cov = covariance_range(root.hub_data, 0, db);
    regularize_block(cov, sim.reg_scale);
    for (std::size_t t = 0; t < dead.size(); ++t) {
      const int j = dead[t];
      const int src = order[t % order.size()];
      std::memcpy(root.mu_hub.row(j), root.hub_data.row(src),
                  sizeof(double) * db);
      root.sigma_hub[j] = cov;
      root.pi_est[j] = 1.0 / sim.k;
    }
    double s = 0.0;
    for (double p : root.pi_est) s += p;
    for (double& p : root.pi_est) p /= s;
  }
}

}  // namespace

DecResult fit_decentralized(const Dataset& data, const Graph& g,
                            const FeatureAssignment& assign, int h, int k,
                            const DecOptions& opts) {
  if (assign.d() != data.d)
    throw PartitionMismatch("fit_decentralized: assignment covers " +
                            std::to_string(assign.d()) +
                            " features, data d=" + std::to_string(data.d));
  const int batch = opts.batch <= 0 ? data.m : opts.batch;
  if (batch < 1 || batch > data.m)
    throw InvalidBatch("fit_decentralized: batch size " +
                       std::to_string(opts.batch) + " outside [1, " +
                       std::to_string(data.m) + "]");

  const WeightMatrix w = metropolis_weights(g);  // NotConnected inside
  HubLayout hubs =
      plan_decentralized(g, h, assign, opts.cluster_seed, opts.ties);

  DecResult out;
  // total permutation: group features by agent, then reorder hub-by-hub
  const std::vector<int> group_perm = grouping_permutation(assign);
  out.feature_perm.resize(data.d);
  for (int j = 0; j < data.d; ++j)
    out.feature_perm[j] = hubs.feature_perm[group_perm[j]];
  const bool permuted = !is_identity_permutation(out.feature_perm);
  Dataset working_storage;
  const Dataset* working = &data;
  if (permuted) {
    working_storage = permute_features(data, out.feature_perm);
    working = &working_storage;
  }

  GmmParams theta0 = opts.init.explicit_params
                         ? *opts.init.explicit_params
                         : init_params(*working, k, hubs.layout,
                                       opts.init.seed, opts.init.strategy,
                                       opts.reg_scale);
  DecSim sim =
      make_dec_sim(*working, hubs, w, theta0, opts.reg_scale, opts.exec);
  sim.n_edges = static_cast<long>(g.edges.size());
  for (const auto& hub : hubs.partition.hubs) {
    long transfer = 0;
    for (int a : hub.members)
      if (a != hub.root) transfer += assign.agent_dims()[a];
    sim.comm.leaf_root_transfers += transfer * static_cast<long>(data.m);
  }

  FitTrace trace;
  std::vector<DecIterRecord> iters;
  std::vector<double> prev_ll;
  const int nb = static_cast<int>(sim.roots.size());
  const bool batching = batch < sim.m;
  Rng batch_rng = make_stream(opts.batch_seed, RngStream::batch);
  std::vector<int> schedule;
  std::size_t schedule_pos = 0;
  bool stats_ready = false;

  for (int t = 0; t < opts.stop.max_iters; ++t) {
    sim.iteration = t;
    std::vector<double> ll;
    std::vector<int> rows;
    if (!batching || !stats_ready) {
      ll = dec_e_step(sim, opts.consensus);
    } else {
      std::vector<char> in_chunk(sim.m, 0);
      while (static_cast<int>(rows.size()) < batch) {
        if (schedule_pos >= schedule.size()) {
          schedule.resize(sim.m);
          std::iota(schedule.begin(), schedule.end(), 0);
          for (int i = sim.m - 1; i > 0; --i)
            std::swap(schedule[i], schedule[batch_rng.uniform_int(i + 1)]);
          schedule_pos = 0;
        }
        const int row = schedule[schedule_pos++];
        if (!in_chunk[row]) {
          in_chunk[row] = 1;
          rows.push_back(row);
        }
      }
      std::vector<Matrix> old_gamma(nb);
      for (int b = 0; b < nb; ++b) {
        old_gamma[b] = Matrix(batch, sim.k);
        for (int r = 0; r < batch; ++r)
          std::memcpy(old_gamma[b].row(r), sim.roots[b].gamma_est.row(rows[r]),
                      sizeof(double) * sim.k);
      }
      ll = dec_e_step(sim, opts.consensus, rows);
      dec_update_stats(sim, rows, old_gamma);
    }

    double mean = 0.0, lo = ll[0], hi = ll[0];
    for (double v : ll) {
      mean += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    mean /= nb;
    trace.ll.push_back(mean);
    DecIterRecord rec;
    rec.ll_mean = mean;
    rec.ll_max_disagreement = hi - lo;
    rec.consensus_invocations = sim.comm.invocations_per_iteration[t];
    rec.rounds = sim.comm.rounds_per_invocation;
    rec.scalars_on_wire = sim.comm.wire_per_iteration[t];
    iters.push_back(rec);

    // Stopping consumes only root-local histories; nothing else moves.
    if (t > 0) {
      bool all = true;
      for (int b = 0; b < nb; ++b)
        if (!opts.stop.plateaued(prev_ll[b], ll[b])) {
          all = false;
          break;
        }
      if (all) {
        trace.converged = true;
        trace.stop_reason = StopReason::ll_plateau;
        break;
      }
    }
    prev_ll = ll;

    if (batching && !stats_ready) {
      dec_init_stats(sim);
      stats_ready = true;
    }

    bool any_dead = false;
    for (int b = 0; b < nb && !any_dead; ++b) {
      const auto wsum = batching ? sim.stats[b].w
                                 : gamma_col_sums(sim.roots[b].gamma_est);
      for (int j = 0; j < k; ++j)
        if (wsum[j] < empty_component_threshold(sim.m)) any_dead = true;
    }
    if (any_dead) {
      if (!opts.reseed_empty)
        throw EmptyComponent(
            "fit_decentralized: a component lost all responsibility mass");
      dec_reseed(sim);
      stats_ready = false;
      continue;
    }

    if (batching)
      dec_m_step_from_stats(sim);
    else
      dec_m_step(sim);
  }
  trace.iterations = static_cast<int>(trace.ll.size());
  if (!trace.converged) trace.stop_reason = StopReason::max_iters;

  // assemble for reporting: blocks from each root, pi averaged over roots
  GmmParams theta;
  theta.k = k;
  theta.layout = hubs.layout;
  theta.pi.assign(k, 0.0);
  for (const auto& root : sim.roots)
    for (int j = 0; j < k; ++j) theta.pi[j] += root.pi_est[j];
  double ps = 0.0;
  for (int j = 0; j < k; ++j) {
    theta.pi[j] /= nb;
    ps += theta.pi[j];
  }
  for (int j = 0; j < k; ++j) theta.pi[j] /= ps;
  theta.mu = Matrix(k, sim.d);
  theta.sigma.assign(k, {});
  for (const auto& root : sim.roots) {
    const int db = root.hi - root.lo;
    for (int j = 0; j < k; ++j)
      std::memcpy(theta.mu.row(j) + root.lo, root.mu_hub.row(j),
                  sizeof(double) * db);
  }
  for (int j = 0; j < k; ++j)
    for (const auto& root : sim.roots) theta.sigma[j].push_back(root.sigma_hub[j]);

  out.params = std::move(theta);
  out.hubs = std::move(hubs);
  out.resp_mean.gamma = Matrix(sim.m, k);
  for (const auto& root : sim.roots) {
    out.gamma_roots.push_back(root.gamma_est);
    for (int i = 0; i < sim.m; ++i) {
      const double* src = root.gamma_est.row(i);
      double* dst = out.resp_mean.gamma.row(i);
      for (int j = 0; j < k; ++j) dst[j] += src[j] / nb;
    }
    out.root_ll_final.push_back(
        std::accumulate(root.ll_per_example.begin(),
                        root.ll_per_example.end(), 0.0));
  }
  out.trace = std::move(trace);
  out.iters = std::move(iters);
  out.comm = std::move(sim.comm);
  return out;
}

}  // namespace vpem
