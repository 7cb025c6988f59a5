#pragma once

#include <cstdint>
#include <random>

namespace vpem {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Portable deterministic RNG: mt19937_64 (bit-exact by the standard) plus
// explicit scalar transforms. std::*_distribution is implementation-defined,
// so none of those are used anywhere in the repository.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // (0, 1]; safe under log()
  double uniform_pos() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Box-Muller with cached spare.
  double normal();

  // [0, n), unbiased via rejection
  int uniform_int(int n);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Named streams keep unrelated draws decoupled: reordering dataset sampling
// must not perturb init or tie-breaking.
enum class RngStream : std::uint64_t {
  init = 1,
  sampling = 2,
  ties = 3,
  graph = 4,
  batch = 5,
  restart = 6,
};

inline Rng make_stream(std::uint64_t seed, RngStream s, std::uint64_t idx = 0) {
  return Rng(mix64(seed ^ mix64(static_cast<std::uint64_t>(s) + mix64(idx))));
}

}  // namespace vpem
