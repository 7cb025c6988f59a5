// Serial vs OpenMP kernel comparison. Each kernel is timed in both modes on
// the same inputs and the outputs are checked for bitwise equality, which is
// the contract the engines rely on.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "vpem/consensus.hpp"
#include "vpem/datagen.hpp"
#include "vpem/eval.hpp"
#include "vpem/gmm.hpp"
#include "vpem/parallel.hpp"
#include "vpem/rng.hpp"

using namespace vpem;
using clock_type = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn) {
  const auto start = clock_type::now();
  fn();
  const auto stop = clock_type::now();
  return std::chrono::duration<double, std::milli>(stop - start).count();
}

void report(const char* name, double serial_ms, double parallel_ms,
            bool bit_equal) {
  std::printf("%-22s serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx   %s\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms,
              bit_equal ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", num_threads());

  {
    const GmmParams truth = random_gmm(5, 16, 1, 3.0);
    const Dataset ds = sample_gmm(truth, 20000, 2);
    EStepResult a, b;
    const double ts = time_ms([&] { a = e_step(ds, truth, Exec::serial); });
    const double tp = time_ms([&] { b = e_step(ds, truth, Exec::parallel); });
    report("e_step 20k x 16 x 5", ts, tp,
           a.ll == b.ll && a.resp.gamma.a == b.resp.gamma.a);
  }

  {
    const auto wm = metropolis_weights(gen_random_geometric(50, 0.25, 3));
    Matrix a(20000, 50);
    Rng rng(4);
    for (int p = 0; p < a.rows; ++p)
      for (int u = 0; u < a.cols; ++u) a(p, u) = rng.normal();
    Matrix b = a;
    const ConsensusConfig cfg{100, ConsensusMode::iterative};
    const double ts =
        time_ms([&] { run_consensus_many(wm, a, cfg, Exec::serial); });
    const double tp =
        time_ms([&] { run_consensus_many(wm, b, cfg, Exec::parallel); });
    report("consensus 20k x 50", ts, tp, a.a == b.a);
  }

  {
    const GmmParams truth = random_gmm(4, 8, 5, 3.0);
    const Dataset ds = sample_gmm(truth, 20000, 6);
    KmeansResult a, b;
    const double ts =
        time_ms([&] { a = kmeans_baseline(ds, 4, 7, 8, Exec::serial); });
    const double tp =
        time_ms([&] { b = kmeans_baseline(ds, 4, 7, 8, Exec::parallel); });
    report("kmeans 20k, 8 starts", ts, tp,
           a.inertia == b.inertia && a.assign == b.assign);
  }

  return 0;
}
