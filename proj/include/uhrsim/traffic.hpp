#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "uhrsim/rng.hpp"
#include "uhrsim/sim_time.hpp"

namespace uhrsim {

enum class TrafficModel : std::uint8_t { OnOff, Poisson, Cbr };
enum class TrafficClass : std::uint8_t { BestEffort, TimeSensitive };

struct FlowSpec {
  std::uint32_t id = 0;
  int src = -1;
  int dst = -1;
  TrafficModel model = TrafficModel::OnOff;
  SimTime mean_on = microseconds(4150);
  SimTime mean_off = microseconds(4150);
  double rate_on_bps = 4e9;  // On-phase rate (OnOff), mean rate (Poisson), rate (CBR)
  int packet_bytes = 1500;
  TrafficClass cls = TrafficClass::BestEffort;
  SimTime start;  // no arrivals before this instant
};

/// Throws std::invalid_argument on non-positive rates or sizes.
void validate_flow(const FlowSpec& spec);

struct Packet {
  SimTime arrival;
  std::uint64_t seq = 0;
  std::uint32_t flow = 0;
  std::int32_t dst = -1;
  std::uint32_t bytes = 0;
  std::uint8_t retries = 0;
  TrafficClass cls = TrafficClass::BestEffort;
};

struct TrafficEvent {
  enum class Kind : std::uint8_t { Arrival, PhaseChange };
  SimTime at;
  Kind kind = Kind::Arrival;
  bool on = false;         // phase entered (PhaseChange)
  std::uint64_t seq = 0;   // packet sequence number (Arrival)
};

/// Arrival process of one flow. Events come out in time order.
class TrafficSource {
 public:
  TrafficSource(FlowSpec spec, RngStream rng);

  const FlowSpec& spec() const { return spec_; }

  TrafficEvent next_event();

  /// Time of the next arrival, consuming any phase changes before it.
  SimTime peek_arrival();
  /// Consumes the arrival returned by peek_arrival().
  Packet pop_arrival();

  std::uint64_t generated() const { return next_seq_; }
  bool on() const { return on_; }

 private:
  SimTime draw_phase(bool on);
  void schedule_next_arrival();

  FlowSpec spec_;
  RngStream rng_;
  double spacing_ns_ = 0.0;
  bool on_ = true;
  SimTime phase_end_ = SimTime::max();
  SimTime phase_start_;
  std::uint64_t in_phase_ = 0;     // arrivals emitted in the current On phase
  double poisson_clock_ns_ = 0.0;
  SimTime next_arrival_;
  std::optional<SimTime> peeked_;
  std::uint64_t next_seq_ = 0;
};

double offered_load_bps(std::uint64_t packets, int packet_bytes, SimTime horizon);

/// Generated-bit rate of a standalone source over [0, horizon].
double measure_offered_load(const FlowSpec& spec, std::uint64_t seed, SimTime horizon);

}  // namespace uhrsim
