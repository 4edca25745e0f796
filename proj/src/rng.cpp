#include "forge/rng.hpp"

#include <cmath>
#include <limits>

#include "forge/errors.hpp"

namespace forge {

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw RangeError("Rng::below: n must be positive");
  const std::uint64_t span = static_cast<std::uint64_t>(n);
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t v = gen_();
  while (v >= limit) v = gen_();
  return static_cast<std::size_t>(v % span);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  constexpr double kTau = 6.283185307179586476925286766559;
  double u1 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTau * u2);
  have_spare_ = true;
  return r * std::cos(kTau * u2);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace forge
