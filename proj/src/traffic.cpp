#include "uhrsim/traffic.hpp"

#include <cmath>
#include <stdexcept>

namespace uhrsim {

void validate_flow(const FlowSpec& spec) {
  if (!(spec.rate_on_bps > 0.0)) throw std::invalid_argument("flow rate must be positive");
  if (spec.packet_bytes <= 0) throw std::invalid_argument("flow packet size must be positive");
  if (spec.model == TrafficModel::OnOff &&
      (spec.mean_on.ns() <= 0 || spec.mean_off.ns() < 0)) {
    throw std::invalid_argument("on/off flow needs a positive mean On period");
  }
}

TrafficSource::TrafficSource(FlowSpec spec, RngStream rng) : spec_(spec), rng_(std::move(rng)) {
  validate_flow(spec_);
  spacing_ns_ = spec_.packet_bytes * 8.0 * 1e9 / spec_.rate_on_bps;
  phase_start_ = spec_.start;
  switch (spec_.model) {
    case TrafficModel::OnOff: {
      const double p_on = static_cast<double>(spec_.mean_on.ns()) /
                          static_cast<double>(spec_.mean_on.ns() + spec_.mean_off.ns());
      on_ = rng_.bernoulli(p_on);
      phase_end_ = phase_start_ + draw_phase(on_);
      next_arrival_ = phase_start_;
      break;
    }
    case TrafficModel::Poisson:
      poisson_clock_ns_ = static_cast<double>(spec_.start.ns()) + rng_.exponential(spacing_ns_);
      next_arrival_ = SimTime{std::llround(poisson_clock_ns_)};
      break;
    case TrafficModel::Cbr:
      next_arrival_ = spec_.start;
      break;
  }
}

SimTime TrafficSource::draw_phase(bool on) {
  const double mean = static_cast<double>((on ? spec_.mean_on : spec_.mean_off).ns());
  return SimTime{std::llround(rng_.exponential(mean))};
}

void TrafficSource::schedule_next_arrival() {
  switch (spec_.model) {
    case TrafficModel::OnOff:
    case TrafficModel::Cbr:
      next_arrival_ = phase_start_ + SimTime{std::llround(static_cast<double>(in_phase_) * spacing_ns_)};
      break;
    case TrafficModel::Poisson:
      poisson_clock_ns_ += rng_.exponential(spacing_ns_);
      next_arrival_ = SimTime{std::llround(poisson_clock_ns_)};
      break;
  }
}

TrafficEvent TrafficSource::next_event() {
  if (peeked_ || spec_.model != TrafficModel::OnOff || (on_ && next_arrival_ < phase_end_)) {
    TrafficEvent ev;
    ev.kind = TrafficEvent::Kind::Arrival;
    ev.at = next_arrival_;
    ev.seq = next_seq_++;
    peeked_.reset();
    ++in_phase_;
    schedule_next_arrival();
    return ev;
  }
  on_ = !on_;
  phase_start_ = phase_end_;
  phase_end_ = phase_start_ + draw_phase(on_);
  in_phase_ = 0;
  next_arrival_ = phase_start_;
  TrafficEvent ev;
  ev.kind = TrafficEvent::Kind::PhaseChange;
  ev.at = phase_start_;
  ev.on = on_;
  return ev;
}

SimTime TrafficSource::peek_arrival() {
  if (!peeked_) {
    if (spec_.model == TrafficModel::OnOff) {
      while (!(on_ && next_arrival_ < phase_end_)) next_event();
    }
    peeked_ = next_arrival_;
  }
  return *peeked_;
}

Packet TrafficSource::pop_arrival() {
  peek_arrival();
  const TrafficEvent ev = next_event();
  Packet p;
  p.arrival = ev.at;
  p.seq = ev.seq;
  p.flow = spec_.id;
  p.dst = spec_.dst;
  p.bytes = static_cast<std::uint32_t>(spec_.packet_bytes);
  p.cls = spec_.cls;
  return p;
}

double offered_load_bps(std::uint64_t packets, int packet_bytes, SimTime horizon) {
  if (horizon.ns() <= 0) throw std::invalid_argument("offered_load_bps: empty horizon");
  return static_cast<double>(packets) * packet_bytes * 8.0 / horizon.s();
}

double measure_offered_load(const FlowSpec& spec, std::uint64_t seed, SimTime horizon) {
  TrafficSource src(spec, RngStream(seed, "traffic.measure"));
  std::uint64_t n = 0;
  while (src.peek_arrival() <= horizon) {
    src.pop_arrival();
    ++n;
  }
  return offered_load_bps(n, spec.packet_bytes, horizon);
}

}  // namespace uhrsim
