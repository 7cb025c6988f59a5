#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "vpem/dataset.hpp"
#include "vpem/linalg.hpp"
#include "vpem/parallel.hpp"

namespace vpem {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Contiguous, disjoint feature ranges covering [0, d). A single [0, d) range
// is the unconstrained dense case. Zero-width ranges are allowed (an agent
// or hub that observes no features).
struct BlockLayout {
  int d = 0;
  std::vector<std::pair<int, int>> blocks;  // half-open [lo, hi)

  static BlockLayout dense(int d) { return {d, {{0, d}}}; }
  static BlockLayout from_dims(const std::vector<int>& dims);

  int num_blocks() const { return static_cast<int>(blocks.size()); }
  void validate() const;  // throws DimensionMismatch
};

struct GmmParams {
  int k = 0;
  BlockLayout layout;
  std::vector<double> pi;                  // k, on the simplex
  Matrix mu;                               // k x d
  std::vector<std::vector<SymMatrix>> sigma;  // [k][block]

  void validate() const;
};

struct Responsibilities {
  Matrix gamma;  // m x k, rows on the simplex
};

enum class StopReason { ll_plateau, max_iters };

struct FitTrace {
  std::vector<double> ll;  // one entry per iteration
  int iterations = 0;
  bool converged = false;
  StopReason stop_reason = StopReason::max_iters;
};

struct StopSpec {
  double tol_abs = 1e-6;
  double tol_rel = 1e-8;
  int max_iters = 200;

  bool plateaued(double prev_ll, double ll) const {
    return (ll - prev_ll) < tol_abs + tol_rel * std::abs(ll);
  }
};

enum class InitStrategy { random_responsibility, kmeanspp_means };

struct InitSpec {
  InitStrategy strategy = InitStrategy::kmeanspp_means;
  std::uint64_t seed = 0;
  // When set, used verbatim (strategy/seed ignored).
  std::optional<GmmParams> explicit_params;
};

// ---------------------------------------------------------------------------
// Shared kernels. Every engine (centralized, federated, decentralized) goes
// through these so that equal inputs give bit-equal outputs across engines.
// ---------------------------------------------------------------------------

// Per-component, per-block Cholesky factors of sigma.
struct SigmaFactors {
  std::vector<std::vector<CholeskyFactor>> f;  // [k][block]
};

// Factors every block; NotPositiveDefinite is rethrown as NumericalFailure
// since by contract the caller already regularized.
SigmaFactors factor_params(const GmmParams& theta);

// log|S| + (x-mu)' S^-1 (x-mu) restricted to columns [lo, hi).
double q_block(const CholeskyFactor& f, const double* xrow, const double* murow,
               int lo, int hi);

// Given qsum[k] = sum of per-block q terms, writes the normalized gamma row
// and the example's log-likelihood contribution.
void finalize_gamma_row(const double* qsum, const double* log_pi, int k, int d,
                        double* gamma_row, double* ll_m);

// w[j] = sum_m gamma(m, j), fixed ascending order.
std::vector<double> gamma_col_sums(const Matrix& gamma);

// Components with column mass below this threshold are dead.
double empty_component_threshold(int m);

// mu[k][j] = (sum_m gamma(m,k) x(m,j)) / denom for j in [lo, hi);
// writes hi-lo values starting at out.
void mstep_mu_range(const Matrix& x, const Matrix& gamma, int k, double denom,
                    int lo, int hi, double* out);

// Scatter block over [lo, hi): (1/denom) sum_m gamma(m,k) (x-mu)(x-mu)^T.
// mu_slice holds hi-lo values aligned with the range.
SymMatrix mstep_sigma_range(const Matrix& x, const Matrix& gamma, int k,
                            double denom, const double* mu_slice, int lo,
                            int hi);

// Mean-centered biased covariance of columns [lo, hi).
SymMatrix covariance_range(const Matrix& x, int lo, int hi);

// eps = scale * mean diagonal; added in place, then factorability checked.
void regularize_block(SymMatrix& s, double scale);

inline constexpr double kDefaultRegScale = 1e-6;

// ---------------------------------------------------------------------------
// Centralized EM
// ---------------------------------------------------------------------------

double log_gaussian(std::span<const double> x, std::span<const double> mu,
                    const std::vector<CholeskyFactor>& blocks,
                    const BlockLayout& layout);

struct EStepResult {
  Responsibilities resp;
  double ll = 0.0;
  std::vector<double> ll_per_example;  // ll is their fixed-order sum
};

EStepResult e_step(const Dataset& data, const GmmParams& theta,
                   Exec exec = Exec::parallel);

GmmParams m_step(const Dataset& data, const Responsibilities& resp,
                 const BlockLayout& layout,
                 double reg_scale = kDefaultRegScale,
                 Exec exec = Exec::parallel);

GmmParams init_params(const Dataset& data, int k, const BlockLayout& layout,
                      std::uint64_t seed, InitStrategy strategy,
                      double reg_scale = kDefaultRegScale);

struct FitOptions {
  double reg_scale = kDefaultRegScale;
  bool reseed_empty = false;
  Exec exec = Exec::parallel;
};

struct FitResult {
  GmmParams params;
  Responsibilities resp;
  FitTrace trace;
};

FitResult fit_centralized(const Dataset& data, int k,
                          const BlockLayout& layout, const InitSpec& init,
                          const StopSpec& stop, const FitOptions& opts = {});

// Replaces dead components: mean at the worst-fit example, per-block global
// covariance, uniform share of weight. Used by all fit loops under
// reseed_empty.
void reseed_components(GmmParams& theta, const std::vector<int>& dead,
                       const Dataset& data,
                       const std::vector<double>& ll_per_example,
                       double reg_scale);

// Reorders GmmParams columns: perm maps original feature index to the
// position used by src. Result is in original order with dense layout;
// entries outside src blocks are zero.
GmmParams params_to_original_order(const GmmParams& src,
                                   const std::vector<int>& perm);

// Extracts params for a permuted layout from dense original-order params.
// perm maps original feature index to target position. Entries of sigma
// outside the target blocks are dropped.
GmmParams params_from_original_order(const GmmParams& dense_orig,
                                     const std::vector<int>& perm,
                                     const BlockLayout& layout);

}  // namespace vpem
