#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uhrsim/phy.hpp"
#include "uhrsim/rng.hpp"
#include "uhrsim/shared_queue.hpp"
#include "uhrsim/sim_time.hpp"

namespace uhrsim {

struct EdcaParams {
  SimTime slot = microseconds(9);
  SimTime sifs = microseconds(16);
  SimTime difs = microseconds(34);
  int cw_min = 15;
  int cw_max = 1023;
  int retry_limit = 7;
  SimTime block_ack = microseconds(32);
};

struct TxopLimits {
  SimTime txop_limit = microseconds(5484);
  int max_ampdu = 1024;
  SimTime preemption_reserve;  // headroom kept free for an inserted urgent PPDU
  SimTime overhead;            // fixed airtime at TXOP start (CBF sounding)
};

/// Backoff state machine of one device on one link. Idle slots are counted
/// on the grid that starts DIFS after the medium went idle, so devices that
/// observed the same idle instant share slot boundaries (and can collide).
class ChannelAccess {
 public:
  explicit ChannelAccess(const EdcaParams& params)
      : params_(params), cw_(params.cw_min) {}

  int cw() const { return cw_; }
  int backoff() const { return backoff_; }
  bool backoff_drawn() const { return backoff_ >= 0; }

  /// Draws a fresh counter uniformly on [0, cw] if none is pending.
  void ensure_backoff(RngStream& rng);
  void set_backoff(int slots) { backoff_ = slots; }

  /// Grant instant if the medium stays idle from idle_since onwards.
  SimTime grant_time(SimTime now, SimTime idle_since);
  /// Medium became busy at busy_at: consume the idle slots that fully elapsed.
  void freeze(SimTime busy_at);

  void on_grant() { backoff_ = -1; }
  /// Grant not used (nothing to send); a new counter is drawn next time.
  void on_release() { backoff_ = -1; }
  /// TXOP finished; any delivered MPDU counts as success.
  void on_result(bool delivered_any);

 private:
  EdcaParams params_;
  int cw_;
  int backoff_ = -1;
  SimTime countdown_start_;
  bool counting_ = false;
};

struct RtwtSp {
  int owner = -1;
  SimTime start;
  SimTime duration;
  SimTime period;
  std::vector<std::uint32_t> member_flows;
  std::vector<int> links;  // empty: every link

  bool covers(int link) const;
  bool is_member(std::uint32_t flow) const;
};

struct SpOccurrence {
  std::size_t sp = 0;
  SimTime start;
  SimTime end;
};

/// R-TWT service periods with their quiet intervals.
class RtwtCalendar {
 public:
  /// Throws std::invalid_argument on duration >= period or on overlap with an
  /// already scheduled SP sharing a link.
  void schedule(const RtwtSp& sp);

  const std::vector<RtwtSp>& sps() const { return sps_; }
  bool empty() const { return sps_.empty(); }

  std::optional<SpOccurrence> active_at(SimTime t, int link) const;
  /// Earliest occurrence on the link starting at or after t.
  std::optional<SpOccurrence> next_at_or_after(SimTime t, int link) const;
  SimTime next_start(SimTime t, int link) const;

 private:
  std::vector<RtwtSp> sps_;
};

struct TxopPlan {
  int link = -1;
  int device = -1;
  int dst = -1;
  McsEntry mcs;
  double rate_bps = 0.0;
  std::vector<Packet> mpdus;
  SimTime ppdu_airtime;     // preamble + payload symbols
  SimTime planned_airtime;  // overhead + PPDU + SIFS + BlockAck
  SimTime hard_end = SimTime::max();
  bool sp_member = false;   // carries member traffic inside its owner's SP
};

enum class PlanStatus { Ok, EmptyQueue, BlockedByServicePeriod };

struct PlanResult {
  PlanStatus status = PlanStatus::EmptyQueue;
  TxopPlan plan;
  SimTime blocked_until;  // BlockedByServicePeriod: end of the SP in the way
};

struct TxopEnv {
  int device = -1;
  int streams = 1;
  const PhyConfig* phy = nullptr;
  const EdcaParams* edca = nullptr;
  SimTime budget_end = SimTime::max();            // e.g. end of a coordinated slot
  std::function<bool(int dst)> receivable;         // empty: every destination
  std::function<McsEntry(int dst)> mcs_for;        // empty: the mcs argument
};

/// Dequeues up to min(max_ampdu, TXOP fit, SP fit) MPDUs for one receiver.
/// Non-member airtime never crosses the next SP start on the link.
PlanResult build_txop(SharedQueue& queue, int link, const McsEntry& mcs, SimTime now,
                      const TxopLimits& limits, const RtwtCalendar& calendar, const TxopEnv& env);

struct OngoingPpdu {
  SimTime start;                 // preamble start
  SimTime end;                   // end of the last data symbol
  SimTime preamble;
  SimTime symbol;
  double bits_per_symbol = 0.0;
  std::vector<std::uint32_t> mpdu_bytes;
  bool best_effort = true;
  SimTime txop_end;              // end of the BlockAck closing the TXOP
};

enum class PreemptionKind { Truncated, AfterBlockAck, Rejected };

struct PreemptionOutcome {
  PreemptionKind kind = PreemptionKind::Rejected;
  SimTime cut_at;              // end of the interrupted PPDU (Truncated)
  SimTime urgent_start;        // preamble start of the urgent PPDU
  SimTime insertion_latency;   // arrival -> urgent data start
  int delivered_before_cut = 0;
  int requeued = 0;
  std::string reason;
};

/// TXOP-holder preemption: the ongoing best-effort PPDU stops at the next
/// OFDM symbol boundary and the urgent PPDU follows immediately. MPDUs not
/// completely sent before the cut go back to the queue.
PreemptionOutcome preempt(bool enabled, bool caller_is_holder, const OngoingPpdu& ongoing,
                          SimTime urgent_arrival, SimTime sifs);

}  // namespace uhrsim
