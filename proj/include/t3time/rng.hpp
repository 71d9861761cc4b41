#pragma once

#include <cstdint>
#include <string_view>

namespace t3time {

/// Counter-based generator: output i is a pure function of (key, i).
/// Streams derived with split() are independent of how many values the
/// parent has already produced, so adding a draw in one component never
/// shifts the randomness seen by another.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x9E3779B97F4A7C15ULL)) {}

  std::uint64_t next_u64() { return mix(key_ + mix(counter_++)); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Standard normal via Box-Muller.
  double normal();

  CounterRng split(std::uint64_t stream) const { return CounterRng(key_, mix(stream + 0xD1B54A32D192ED03ULL)); }
  CounterRng split(std::string_view tag) const { return split(hash(tag)); }

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t hash(std::string_view s);

 private:
  CounterRng(std::uint64_t parent, std::uint64_t stream) : key_(mix(parent ^ stream)) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace t3time
