#pragma once

#include <cstdint>

#include "vpem/gmm.hpp"

namespace vpem {

// Random dense-covariance mixture: weights Dirichlet(1), means placed in a
// box grown until the minimum pairwise distance reaches separation times the
// mean component radius, sigma = A A^T + I.
GmmParams random_gmm(int k, int d, std::uint64_t seed, double separation);

// Ancestral sampling; labels record the generating component.
Dataset sample_gmm(const GmmParams& theta_true, int m, std::uint64_t seed);

}  // namespace vpem
