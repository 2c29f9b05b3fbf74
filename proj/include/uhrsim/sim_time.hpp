#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>

namespace uhrsim {

/// Simulation time (and duration) in integer nanoseconds.
class SimTime {
 public:
  constexpr SimTime() = default;
  constexpr explicit SimTime(std::int64_t ns) : ns_(ns) {}

  static constexpr SimTime from_ns(std::int64_t ns) { return SimTime{ns}; }
  static SimTime from_us(double us) { return SimTime{std::llround(us * 1e3)}; }
  static SimTime from_ms(double ms) { return SimTime{std::llround(ms * 1e6)}; }
  static SimTime from_s(double s) { return SimTime{std::llround(s * 1e9)}; }
  static constexpr SimTime max() { return SimTime{std::numeric_limits<std::int64_t>::max()}; }

  constexpr std::int64_t ns() const { return ns_; }
  constexpr double us() const { return static_cast<double>(ns_) / 1e3; }
  constexpr double ms() const { return static_cast<double>(ns_) / 1e6; }
  constexpr double s() const { return static_cast<double>(ns_) / 1e9; }

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime& operator+=(SimTime o) { ns_ += o.ns_; return *this; }
  constexpr SimTime& operator-=(SimTime o) { ns_ -= o.ns_; return *this; }
  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.ns_ + b.ns_}; }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.ns_ - b.ns_}; }
  friend constexpr SimTime operator*(SimTime a, std::int64_t k) { return SimTime{a.ns_ * k}; }
  friend constexpr SimTime operator*(std::int64_t k, SimTime a) { return SimTime{a.ns_ * k}; }
  friend constexpr std::int64_t operator/(SimTime a, SimTime b) { return a.ns_ / b.ns_; }

  friend std::ostream& operator<<(std::ostream& os, SimTime t) { return os << t.ns_ << "ns"; }

 private:
  std::int64_t ns_ = 0;
};

constexpr SimTime nanoseconds(std::int64_t v) { return SimTime{v}; }
constexpr SimTime microseconds(std::int64_t v) { return SimTime{v * 1000}; }
constexpr SimTime milliseconds(std::int64_t v) { return SimTime{v * 1000000}; }
constexpr SimTime seconds(std::int64_t v) { return SimTime{v * 1000000000}; }

}  // namespace uhrsim
