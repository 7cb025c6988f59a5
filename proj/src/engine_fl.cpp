#include "vpem/engine_fl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "vpem/errors.hpp"
#include "vpem/rng.hpp"

namespace vpem {

std::vector<int> grouping_permutation(const FeatureAssignment& assign) {
  const int d = assign.d();
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return assign.agent_of_feature[a] < assign.agent_of_feature[b];
  });
  std::vector<int> perm(d);
  for (int pos = 0; pos < d; ++pos) perm[order[pos]] = pos;
  return perm;
}

bool is_identity_permutation(const std::vector<int>& perm) {
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] != static_cast<int>(i)) return false;
  return true;
}

Dataset permute_features(const Dataset& ds, const std::vector<int>& perm) {
  Dataset out;
  out.m = ds.m;
  out.d = ds.d;
  out.labels = ds.labels;
  out.x = Matrix(ds.m, ds.d);
  for (int i = 0; i < ds.m; ++i) {
    const double* src = ds.x.row(i);
    double* dst = out.x.row(i);
    for (int j = 0; j < ds.d; ++j) dst[perm[j]] = src[j];
  }
  return out;
}

FlSim make_fl_sim(const Dataset& working, const BlockLayout& layout,
                  const GmmParams& theta0, double reg_scale, Exec exec) {
  layout.validate();
  if (layout.d != working.d)
    throw PartitionMismatch("fl: layout does not match data dimension");
  FlSim sim;
  sim.m = working.m;
  sim.d = working.d;
  sim.k = theta0.k;
  sim.reg_scale = reg_scale;
  sim.exec = exec;
  sim.ll_per_example.assign(working.m, 0.0);
  const int nb = layout.num_blocks();
  sim.clients.resize(nb);
  for (int n = 0; n < nb; ++n) {
    ClientState& c = sim.clients[n];
    c.agent_id = n;
    c.lo = layout.blocks[n].first;
    c.hi = layout.blocks[n].second;
    const int dn = c.hi - c.lo;
    c.local_data = Matrix(working.m, dn);
    for (int i = 0; i < working.m; ++i)
      std::memcpy(c.local_data.row(i), working.x.row(i) + c.lo,
                  sizeof(double) * dn);
    c.mu_local = Matrix(sim.k, dn);
    for (int j = 0; j < sim.k; ++j)
      std::memcpy(c.mu_local.row(j), theta0.mu.row(j) + c.lo,
                  sizeof(double) * dn);
    c.sigma_local.clear();
    for (int j = 0; j < sim.k; ++j) c.sigma_local.push_back(theta0.sigma[j][n]);
    c.pi_local = theta0.pi;
    c.gamma_local = Matrix(working.m, sim.k);
  }
  return sim;
}

double fl_e_step(FlSim& sim, const std::vector<int>& rows_in) {
  const int k = sim.k;
  std::vector<int> all_rows;
  const std::vector<int>* rows = &rows_in;
  if (rows_in.empty()) {
    all_rows.resize(sim.m);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    rows = &all_rows;
  }
  const int nr = static_cast<int>(rows->size());

  // server accumulator for the per-(m, k) sums
  Matrix qsum(nr, k);
  for (auto& client : sim.clients) {
    const int dn = client.hi - client.lo;
    std::vector<CholeskyFactor> fac;
    fac.reserve(k);
    for (int j = 0; j < k; ++j) {
      try {
        fac.push_back(cholesky(client.sigma_local[j]));
      } catch (const NotPositiveDefinite& e) {
        throw NumericalFailure("fl_e_step: client " +
                               std::to_string(client.agent_id) +
                               ", component " + std::to_string(j) + ": " +
                               e.what());
      }
    }
    // client -> server: one Q-term per (row, component)
    Matrix qn(nr, k);
    par_for(sim.exec, nr, [&](std::int64_t r) {
      const int i = (*rows)[r];
      const double* xrow = client.local_data.row(i);
      double* out = qn.row(static_cast<int>(r));
      for (int j = 0; j < k; ++j)
        out[j] = q_block(fac[j], xrow, client.mu_local.row(j), 0, dn);
    });
    const long scalars = static_cast<long>(nr) * k;
    sim.comm.transcript.push_back(
        {FlMsgKind::client_q_terms, sim.iteration, client.agent_id, scalars});
    sim.comm.up_scalars += scalars;
    if (static_cast<int>(sim.comm.up_per_iteration.size()) <= sim.iteration) {
      sim.comm.up_per_iteration.resize(sim.iteration + 1, 0);
      sim.comm.down_per_iteration.resize(sim.iteration + 1, 0);
    }
    sim.comm.up_per_iteration[sim.iteration] += scalars;
    for (int r = 0; r < nr; ++r) {
      const double* src = qn.row(r);
      double* dst = qsum.row(r);
      for (int j = 0; j < k; ++j) dst[j] += src[j];
    }
  }
  // server -> clients: broadcast of the summed terms, counted once
  {
    const long scalars = static_cast<long>(nr) * k;
    sim.comm.transcript.push_back(
        {FlMsgKind::server_q_sums, sim.iteration, -1, scalars});
    sim.comm.down_scalars += scalars;
    sim.comm.down_per_iteration[sim.iteration] += scalars;
  }

  // each client normalizes locally
  for (auto& client : sim.clients) {
    std::vector<double> log_pi(k);
    for (int j = 0; j < k; ++j) log_pi[j] = std::log(client.pi_local[j]);
    const bool record = client.agent_id == 0;
    par_for(sim.exec, nr, [&](std::int64_t r) {
      const int i = (*rows)[r];
      double ll_m = 0.0;
      finalize_gamma_row(qsum.row(static_cast<int>(r)), log_pi.data(), k,
                         sim.d, client.gamma_local.row(i), &ll_m);
      if (record) sim.ll_per_example[i] = ll_m;
    });
  }
  double ll = 0.0;
  for (int i = 0; i < sim.m; ++i) ll += sim.ll_per_example[i];
  return ll;
}

void fl_m_step(FlSim& sim) {
  const double thresh = empty_component_threshold(sim.m);
  for (auto& client : sim.clients) {
    const auto w = gamma_col_sums(client.gamma_local);
    for (int j = 0; j < sim.k; ++j)
      if (w[j] < thresh)
        throw EmptyComponent("fl_m_step: component " + std::to_string(j) +
                             " lost all responsibility mass");
    const int dn = client.hi - client.lo;
    for (int j = 0; j < sim.k; ++j) {
      client.pi_local[j] = w[j] / sim.m;
      const double denom = static_cast<double>(sim.m) * client.pi_local[j];
      mstep_mu_range(client.local_data, client.gamma_local, j, denom, 0, dn,
                     client.mu_local.row(j));
      SymMatrix s =
          mstep_sigma_range(client.local_data, client.gamma_local, j, denom,
                            client.mu_local.row(j), 0, dn);
      regularize_block(s, sim.reg_scale);
      client.sigma_local[j] = std::move(s);
    }
  }
}

GmmParams fl_assemble_params(const FlSim& sim) {
  GmmParams theta;
  theta.k = sim.k;
  std::vector<int> dims;
  for (const auto& c : sim.clients) dims.push_back(c.hi - c.lo);
  theta.layout = BlockLayout::from_dims(dims);
  theta.pi = sim.clients.front().pi_local;
  theta.mu = Matrix(sim.k, sim.d);
  theta.sigma.assign(sim.k, {});
  for (const auto& c : sim.clients) {
    const int dn = c.hi - c.lo;
    for (int j = 0; j < sim.k; ++j)
      std::memcpy(theta.mu.row(j) + c.lo, c.mu_local.row(j),
                  sizeof(double) * dn);
  }
  for (int j = 0; j < sim.k; ++j)
    for (const auto& c : sim.clients) theta.sigma[j].push_back(c.sigma_local[j]);
  return theta;
}

namespace {

void fl_distribute_params(FlSim& sim, const GmmParams& theta) {
  for (std::size_t n = 0; n < sim.clients.size(); ++n) {
    ClientState& c = sim.clients[n];
    const int dn = c.hi - c.lo;
    for (int j = 0; j < sim.k; ++j)
      std::memcpy(c.mu_local.row(j), theta.mu.row(j) + c.lo,
                  sizeof(double) * dn);
    for (int j = 0; j < sim.k; ++j) c.sigma_local[j] = theta.sigma[j][n];
    c.pi_local = theta.pi;
  }
}

void fl_init_stats(FlSim& sim) {
  sim.stats.clear();
  sim.stats.resize(sim.clients.size());
  for (std::size_t n = 0; n < sim.clients.size(); ++n) {
    const ClientState& c = sim.clients[n];
    const int dn = c.hi - c.lo;
    ClientStats& st = sim.stats[n];
    st.w = gamma_col_sums(c.gamma_local);
    st.s = Matrix(sim.k, dn);
    st.t.assign(sim.k, SymMatrix(dn));
    for (int i = 0; i < sim.m; ++i) {
      const double* xrow = c.local_data.row(i);
      const double* grow = c.gamma_local.row(i);
      for (int j = 0; j < sim.k; ++j) {
        const double g = grow[j];
        double* srow = st.s.row(j);
        SymMatrix& t = st.t[j];
        for (int p = 0; p < dn; ++p) srow[p] += g * xrow[p];
        for (int p = 0; p < dn; ++p) {
          const double gx = g * xrow[p];
          double* trow = t.e.data() + static_cast<std::size_t>(p) * dn;
          for (int q = p; q < dn; ++q) trow[q] += gx * xrow[q];
        }
      }
    }
    for (auto& t : st.t)
      for (int p = 0; p < dn; ++p)
        for (int q = p + 1; q < dn; ++q) t.set(p, q, t(p, q));
  }
}

// old_gamma holds the pre-update responsibility rows for `rows`, one row per
// batch element, in batch order.
void fl_update_stats(FlSim& sim, const std::vector<int>& rows,
                     const Matrix& old_gamma) {
  for (std::size_t n = 0; n < sim.clients.size(); ++n) {
    const ClientState& c = sim.clients[n];
    const int dn = c.hi - c.lo;
    ClientStats& st = sim.stats[n];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int i = rows[r];
      const double* xrow = c.local_data.row(i);
      const double* gold = old_gamma.row(static_cast<int>(r));
      const double* gnew = c.gamma_local.row(i);
      for (int j = 0; j < sim.k; ++j) {
        st.w[j] -= gold[j];
        st.w[j] += gnew[j];
        double* srow = st.s.row(j);
        SymMatrix& t = st.t[j];
        for (int p = 0; p < dn; ++p) {
          srow[p] -= gold[j] * xrow[p];
          srow[p] += gnew[j] * xrow[p];
        }
        for (int p = 0; p < dn; ++p) {
          const double dx = (gnew[j] - gold[j]) * xrow[p];
          for (int q = p; q < dn; ++q) {
            const double v = t(p, q) + dx * xrow[q];
            t.set(p, q, v);
          }
        }
      }
    }
  }
}

void fl_m_step_from_stats(FlSim& sim) {
  const double thresh = empty_component_threshold(sim.m);
  for (std::size_t n = 0; n < sim.clients.size(); ++n) {
    ClientState& c = sim.clients[n];
    const ClientStats& st = sim.stats[n];
    const int dn = c.hi - c.lo;
    for (int j = 0; j < sim.k; ++j) {
      if (st.w[j] < thresh)
        throw EmptyComponent("fl_m_step: component " + std::to_string(j) +
                             " lost all responsibility mass");
      c.pi_local[j] = st.w[j] / sim.m;
      const double denom = static_cast<double>(sim.m) * c.pi_local[j];
      double* mu = c.mu_local.row(j);
      for (int p = 0; p < dn; ++p) mu[p] = st.s(j, p) / denom;
      SymMatrix s(dn);
      for (int p = 0; p < dn; ++p)
        for (int q = p; q < dn; ++q)
          s.set(p, q, st.t[j](p, q) / denom - mu[p] * mu[q]);
      regularize_block(s, sim.reg_scale);
      c.sigma_local[j] = std::move(s);
    }
  }
}

}  // namespace

FlResult fit_fl(const Dataset& data, const Graph& star,
                const FeatureAssignment& assign, int k,
                const FlOptions& opts) {
  // star with node 0 as server, clients 1..N
  const int nclients = assign.agents;
  if (star.n != nclients + 1)
    throw PartitionMismatch("fit_fl: star graph has " +
                            std::to_string(star.n) + " nodes, expected " +
                            std::to_string(nclients + 1));
  {
    const auto deg = star.degrees();
    if (static_cast<int>(star.edges.size()) != nclients ||
        deg[0] != nclients)
      throw InvalidParameter("fit_fl: graph is not a server-centered star");
  }
  if (assign.d() != data.d)
    throw PartitionMismatch("fit_fl: assignment covers " +
                            std::to_string(assign.d()) + " features, data d=" +
                            std::to_string(data.d));
  const int batch = opts.batch <= 0 ? data.m : opts.batch;
  if (batch < 1 || batch > data.m)
    throw InvalidBatch("fit_fl: batch size " + std::to_string(opts.batch) +
                       " outside [1, " + std::to_string(data.m) + "]");

  FlResult out;
  out.feature_perm = grouping_permutation(assign);
  const bool permuted = !is_identity_permutation(out.feature_perm);
  Dataset working_storage;
  const Dataset* working = &data;
  if (permuted) {
    working_storage = permute_features(data, out.feature_perm);
    working = &working_storage;
  }
  const BlockLayout layout = BlockLayout::from_dims(assign.agent_dims());

  GmmParams theta0 = opts.init.explicit_params
                         ? *opts.init.explicit_params
                         : init_params(*working, k, layout, opts.init.seed,
                                       opts.init.strategy, opts.reg_scale);
  FlSim sim = make_fl_sim(*working, layout, theta0, opts.reg_scale, opts.exec);

  FitTrace trace;
  double prev = 0.0;
  const double thresh = empty_component_threshold(sim.m);
  const bool batching = batch < sim.m;
  Rng batch_rng = make_stream(opts.batch_seed, RngStream::batch);
  std::vector<int> schedule;
  std::size_t schedule_pos = 0;
  bool stats_ready = false;

  for (int t = 0; t < opts.stop.max_iters; ++t) {
    sim.iteration = t;
    double ll;
    std::vector<int> rows;
    if (!batching || !stats_ready) {
      ll = fl_e_step(sim);  // full pass; establishes gamma (and stats below)
    } else {
      // Chunks of exactly `batch` distinct rows drawn from a stream of
      // per-epoch permutations.
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
      Matrix old_gamma(batch, sim.k);
      for (int r = 0; r < batch; ++r)
        std::memcpy(old_gamma.row(r),
                    sim.clients.front().gamma_local.row(rows[r]),
                    sizeof(double) * sim.k);
      ll = fl_e_step(sim, rows);
      fl_update_stats(sim, rows, old_gamma);
    }
    trace.ll.push_back(ll);
    if (t > 0 && opts.stop.plateaued(prev, ll)) {
      trace.converged = true;
      trace.stop_reason = StopReason::ll_plateau;
      break;
    }
    prev = ll;

    if (batching && !stats_ready) {
      fl_init_stats(sim);
      stats_ready = true;
    }

    const auto w = batching ? sim.stats.front().w
                            : gamma_col_sums(sim.clients.front().gamma_local);
    std::vector<int> dead;
    for (int j = 0; j < k; ++j)
      if (w[j] < thresh) dead.push_back(j);
    if (!dead.empty()) {
      if (!opts.reseed_empty)
        throw EmptyComponent("fit_fl: component " +
                             std::to_string(dead.front()) +
                             " lost all responsibility mass");
      GmmParams theta = fl_assemble_params(sim);
      reseed_components(theta, dead, *working, sim.ll_per_example,
                        opts.reg_scale);
      fl_distribute_params(sim, theta);
      stats_ready = false;  // force a full refresh pass
      continue;
    }

    if (batching)
      fl_m_step_from_stats(sim);
    else
      fl_m_step(sim);
  }
  trace.iterations = static_cast<int>(trace.ll.size());
  if (!trace.converged) trace.stop_reason = StopReason::max_iters;

  out.params = fl_assemble_params(sim);
  out.resp.gamma = sim.clients.front().gamma_local;
  out.trace = std::move(trace);
  out.comm = std::move(sim.comm);
  return out;
}

}  // namespace vpem
