#include "uhrsim/rng.hpp"

#include <cmath>

namespace uhrsim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t global_seed, std::string_view label) {
  return splitmix64(splitmix64(global_seed) ^ fnv1a64(label));
}

RngStream::RngStream(std::uint64_t global_seed, std::string_view label)
    : label_(label), engine_(derive_stream_seed(global_seed, label)) {}

double RngStream::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_int(std::uint64_t lo, std::uint64_t hi) {
  const std::uint64_t span = hi - lo;
  if (span == ~0ULL) {
    return engine_();
  }
  const std::uint64_t range = span + 1;
  // Rejection sampling on the largest multiple of range.
  const std::uint64_t limit = ~0ULL - (~0ULL % range);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + x % range;
}

double RngStream::exponential(double mean) {
  // 1 - u lies in (0, 1], so the log is finite.
  return -mean * std::log(1.0 - uniform01());
}

}  // namespace uhrsim
