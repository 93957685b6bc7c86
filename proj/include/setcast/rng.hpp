#ifndef SETCAST_RNG_HPP_
#define SETCAST_RNG_HPP_

#include <cstdint>
#include <string>
#include <string_view>

namespace setcast {

// Counter-based generator: each draw is a hash of (seed, stream, counter).
// Adding a new named stream never perturbs draws on existing streams, and
// the full state is three integers, so it serializes trivially.
class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), counter_(0) {}
  Rng(std::uint64_t seed, std::string_view stream_name)
      : Rng(seed, hash_name(stream_name)) {}

  static std::uint64_t hash_name(std::string_view name);

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  // Uniform integer on [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  // Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double gaussian();
  long poisson(double lambda);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
};

}  // namespace setcast

#endif  // SETCAST_RNG_HPP_
