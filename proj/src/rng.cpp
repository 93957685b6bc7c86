#include "setcast/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace setcast {

namespace {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t Rng::hash_name(std::string_view name) {
  // FNV-1a.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t Rng::next_u64() {
  std::uint64_t x = splitmix64(seed_);
  x = splitmix64(x ^ stream_);
  x = splitmix64(x ^ counter_);
  ++counter_;
  return x;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be > 0");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::gaussian() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

long Rng::poisson(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("Rng::poisson: lambda must be >= 0");
  if (lambda == 0.0) return 0;
  // Knuth's product method, chunked so exp(-lambda) never underflows.
  long total = 0;
  double remaining = lambda;
  while (remaining > 0.0) {
    const double chunk = remaining > 30.0 ? 30.0 : remaining;
    remaining -= chunk;
    const double limit = std::exp(-chunk);
    double p = 1.0;
    long k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    total += k - 1;
  }
  return total;
}

}  // namespace setcast
