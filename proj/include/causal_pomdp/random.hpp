#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace causal_pomdp {

/// Deterministic random source. Uses the fully specified mt19937_64 engine
/// and its own conversions so streams are identical across platforms.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  /// Index drawn from an unnormalized nonnegative weight vector.
  int categorical(std::span<const double> weights);

private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t tag_hash(std::string_view tag);

/// Derives a sub-seed from a master seed and a path of integer keys.
/// Independent of evaluation order, so parallel runs reproduce serial ones.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

} // namespace causal_pomdp
