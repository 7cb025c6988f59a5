#include "vpem/rng.hpp"

#include <cmath>
#include <numbers>

namespace vpem {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

int Rng::uniform_int(int n) {
  const auto un = static_cast<std::uint64_t>(n);
  const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
  for (;;) {
    const std::uint64_t x = gen_();
    if (x < bound) return static_cast<int>(x % un);
  }
}

}  // namespace vpem
