#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace uhrsim {

// Seed of the substream identified by (global_seed, label). Stable across
// platforms: FNV-1a over the label, mixed with the global seed by splitmix64.
std::uint64_t derive_stream_seed(std::uint64_t global_seed, std::string_view label);

/// Independent random substream. All transforms on top of the raw 64-bit
/// engine output are implemented here (not via <random> distributions, whose
/// algorithms are implementation-defined) so draws replay bit-identically.
class RngStream {
 public:
  RngStream(std::uint64_t global_seed, std::string_view label);

  const std::string& label() const { return label_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01();
  /// Uniform integer on [lo, hi] (inclusive), unbiased.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  double exponential(double mean);
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::string label_;
  std::mt19937_64 engine_;
};

}  // namespace uhrsim
