#include "rmn/rng.hpp"

#include <stdexcept>

namespace rmn {

double Rng::uniform_open(double lo, double hi) {
  for (;;) {
    const double u = uniform();
    if (u == 0.0) continue;
    const double v = lo + (hi - lo) * u;
    if (v > lo && v < hi) return v;
  }
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below: zero bound");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x < limit) return x % bound;
  }
}

}  // namespace rmn
