#include "vpem/consensus.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "vpem/errors.hpp"

namespace vpem {

void run_consensus_many(const WeightMatrix& w, Matrix& states,
                        const ConsensusConfig& cfg, Exec exec) {
  const int n = w.n;
  if (states.cols != n)
    throw DimensionMismatch("run_consensus: state width " +
                            std::to_string(states.cols) + " vs n " +
                            std::to_string(n));
  if (cfg.mode == ConsensusMode::exact_oracle) {
    par_for(exec, states.rows, [&](std::int64_t p) {
      double* row = states.row(static_cast<int>(p));
      double mean = 0.0;
      for (int u = 0; u < n; ++u) mean += row[u];
      mean /= n;
      for (int u = 0; u < n; ++u) row[u] = mean;
    });
    return;
  }
  if (cfg.rounds < 0)
    throw InvalidParameter("run_consensus: rounds must be >= 0");
  for (int s = 0; s < cfg.rounds; ++s) {
    par_for(exec, states.rows, [&](std::int64_t p) {
      thread_local std::vector<double> next;
      next.resize(n);
      double* row = states.row(static_cast<int>(p));
      for (int u = 0; u < n; ++u) {
        const double* wrow = w.w.row(u);
        double acc = 0.0;
        for (int v = 0; v < n; ++v) acc += wrow[v] * row[v];
        next[u] = acc;
      }
      std::memcpy(row, next.data(), sizeof(double) * n);
    });
  }
}

std::vector<double> run_consensus(const WeightMatrix& w,
                                  std::span<const double> z0,
                                  const ConsensusConfig& cfg) {
  if (static_cast<int>(z0.size()) != w.n)
    throw DimensionMismatch("run_consensus: vector length vs n");
  Matrix states(1, w.n);
  std::memcpy(states.row(0), z0.data(), sizeof(double) * w.n);
  run_consensus_many(w, states, cfg, Exec::serial);
  return std::vector<double>(states.row(0), states.row(0) + w.n);
}

double consensus_error(std::span<const double> z,
                       std::span<const double> z0) {
  if (z.size() != z0.size())
    throw DimensionMismatch("consensus_error: length mismatch");
  double mean = 0.0;
  for (double v : z0) mean += v;
  mean /= static_cast<double>(z0.size());
  double err = 0.0;
  for (double v : z) err = std::max(err, std::abs(v - mean));
  return err;
}

}  // namespace vpem
