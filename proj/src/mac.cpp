#include "uhrsim/mac.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace uhrsim {

void ChannelAccess::ensure_backoff(RngStream& rng) {
  if (backoff_ < 0) backoff_ = static_cast<int>(rng.uniform_int(0, static_cast<std::uint64_t>(cw_)));
}

SimTime ChannelAccess::grant_time(SimTime now, SimTime idle_since) {
  SimTime start = idle_since + params_.difs;
  if (now > start) {
    const std::int64_t slot = params_.slot.ns();
    const std::int64_t k = ((now - start).ns() + slot - 1) / slot;
    start += params_.slot * k;
  }
  countdown_start_ = start;
  counting_ = true;
  return start + params_.slot * std::max(backoff_, 0);
}

void ChannelAccess::freeze(SimTime busy_at) {
  if (counting_ && busy_at > countdown_start_ && backoff_ > 0) {
    const std::int64_t elapsed = (busy_at - countdown_start_) / params_.slot;
    backoff_ -= static_cast<int>(std::min<std::int64_t>(elapsed, backoff_));
  }
  counting_ = false;
}

void ChannelAccess::on_result(bool delivered_any) {
  cw_ = delivered_any ? params_.cw_min : std::min(2 * cw_ + 1, params_.cw_max);
  backoff_ = -1;
  counting_ = false;
}

bool RtwtSp::covers(int link) const {
  return links.empty() || std::find(links.begin(), links.end(), link) != links.end();
}

bool RtwtSp::is_member(std::uint32_t flow) const {
  return std::find(member_flows.begin(), member_flows.end(), flow) != member_flows.end();
}

namespace {

bool share_link(const RtwtSp& a, const RtwtSp& b) {
  if (a.links.empty() || b.links.empty()) return true;
  for (int l : a.links) {
    if (b.covers(l)) return true;
  }
  return false;
}

// Latest occurrence of sp starting strictly before t, if any.
std::optional<SimTime> last_start_before(const RtwtSp& sp, SimTime t) {
  if (t <= sp.start) return std::nullopt;
  const std::int64_t k = (t - sp.start - nanoseconds(1)) / sp.period;
  return sp.start + sp.period * k;
}

bool periodic_overlap(const RtwtSp& a, const RtwtSp& b) {
  // Scan occurrences of a over a window covering many periods of both series.
  const SimTime window_end =
      std::max(a.start, b.start) + std::max(a.period, b.period) * 1000;
  for (SimTime s = a.start; s < window_end; s += a.period) {
    const SimTime e = s + a.duration;
    if (auto bs = last_start_before(b, e); bs && *bs + b.duration > s) return true;
  }
  return false;
}

}  // namespace

void RtwtCalendar::schedule(const RtwtSp& sp) {
  if (sp.duration.ns() <= 0) throw std::invalid_argument("R-TWT SP duration must be positive");
  if (sp.duration >= sp.period) throw std::invalid_argument("R-TWT SP duration must be below its period");
  if (sp.start.ns() < 0) throw std::invalid_argument("R-TWT SP start must be non-negative");
  for (const auto& other : sps_) {
    if (share_link(sp, other) && periodic_overlap(sp, other)) {
      throw std::invalid_argument("R-TWT SP overlaps an existing SP" +
                                  std::string(other.owner == sp.owner ? " of the same AP" : ""));
    }
  }
  sps_.push_back(sp);
}

std::optional<SpOccurrence> RtwtCalendar::active_at(SimTime t, int link) const {
  for (std::size_t i = 0; i < sps_.size(); ++i) {
    const auto& sp = sps_[i];
    if (!sp.covers(link) || t < sp.start) continue;
    const SimTime s = sp.start + sp.period * ((t - sp.start) / sp.period);
    if (t < s + sp.duration) return SpOccurrence{i, s, s + sp.duration};
  }
  return std::nullopt;
}

std::optional<SpOccurrence> RtwtCalendar::next_at_or_after(SimTime t, int link) const {
  std::optional<SpOccurrence> best;
  for (std::size_t i = 0; i < sps_.size(); ++i) {
    const auto& sp = sps_[i];
    if (!sp.covers(link)) continue;
    SimTime s = sp.start;
    if (t > s) {
      const std::int64_t p = sp.period.ns();
      s += sp.period * (((t - s).ns() + p - 1) / p);
    }
    if (!best || s < best->start) best = SpOccurrence{i, s, s + sp.duration};
  }
  return best;
}

SimTime RtwtCalendar::next_start(SimTime t, int link) const {
  auto o = next_at_or_after(t, link);
  return o ? o->start : SimTime::max();
}

PlanResult build_txop(SharedQueue& queue, int link, const McsEntry& mcs, SimTime now,
                      const TxopLimits& limits, const RtwtCalendar& calendar, const TxopEnv& env) {
  const PhyConfig& phy = *env.phy;
  const EdcaParams& edca = *env.edca;
  PlanResult result;

  const RtwtSp* sp_def = nullptr;
  SimTime hard_end = env.budget_end;
  bool calendar_binds = false;
  SimTime calendar_block_end;
  SimTime sp_end;
  if (auto sp = calendar.active_at(now, link)) {
    sp_def = &calendar.sps()[sp->sp];
    sp_end = sp->end;
    if (sp_def->owner != env.device) {
      result.status = PlanStatus::BlockedByServicePeriod;
      result.blocked_until = sp->end;
      return result;
    }
    hard_end = std::min(hard_end, sp->end);
  } else if (auto next = calendar.next_at_or_after(now, link); next && next->start < hard_end) {
    hard_end = next->start;
    calendar_binds = true;
    calendar_block_end = next->end;
  }

  auto eligible = [&](const Packet& p) { return sp_def == nullptr || sp_def->is_member(p.flow); };
  const Packet* head = queue.find_first([&](const Packet& p) {
    return eligible(p) && (!env.receivable || env.receivable(p.dst));
  });
  if (head == nullptr) {
    if (sp_def != nullptr && !queue.empty()) {
      // Only non-member traffic left: the owner stays quiet until the SP ends.
      result.status = PlanStatus::BlockedByServicePeriod;
      result.blocked_until = sp_end;
      return result;
    }
    result.status = PlanStatus::EmptyQueue;
    return result;
  }
  const int dst = head->dst;
  const double head_bits = head->bytes * 8.0;
  const McsEntry sel = env.mcs_for ? env.mcs_for(dst) : mcs;

  const double rate = phy_rate_bps(sel, phy, env.streams);
  const double bps = bits_per_ofdm_symbol(rate, phy);
  const SimTime fixed = limits.overhead + edca.sifs + edca.block_ack + phy.preamble +
                        limits.preemption_reserve;
  auto max_bits_until = [&](SimTime end_cap) {
    if (end_cap == SimTime::max()) return std::numeric_limits<double>::infinity();
    const SimTime avail = end_cap - now - fixed;
    if (avail.ns() < 0) return -1.0;
    return static_cast<double>(avail / phy.symbol) * bps + 1e-6;
  };
  const SimTime txop_cap = now + limits.txop_limit;
  const double bits_hard = max_bits_until(hard_end);
  const double bits_txop = std::min(max_bits_until(txop_cap), bits_hard);

  if (bits_hard < head_bits) {
    if (calendar_binds) {
      result.status = PlanStatus::BlockedByServicePeriod;
      result.blocked_until = calendar_block_end;
    } else {
      result.status = PlanStatus::EmptyQueue;
    }
    return result;
  }

  TxopPlan& plan = result.plan;
  plan.mpdus = queue.take(static_cast<std::size_t>(limits.max_ampdu), bits_txop, true,
                          [&](const Packet& p) { return eligible(p) && p.dst == dst; });
  double bits = 0.0;
  for (const auto& p : plan.mpdus) bits += p.bytes * 8.0;
  plan.link = link;
  plan.device = env.device;
  plan.dst = dst;
  plan.mcs = sel;
  plan.rate_bps = rate;
  plan.ppdu_airtime = ppdu_airtime_bits(bits, rate, phy);
  plan.planned_airtime = limits.overhead + plan.ppdu_airtime + edca.sifs + edca.block_ack;
  plan.hard_end = std::min(txop_cap, hard_end);
  plan.sp_member = sp_def != nullptr;
  result.status = PlanStatus::Ok;
  return result;
}

PreemptionOutcome preempt(bool enabled, bool caller_is_holder, const OngoingPpdu& ongoing,
                          SimTime urgent_arrival, SimTime sifs) {
  PreemptionOutcome out;
  const int n = static_cast<int>(ongoing.mpdu_bytes.size());
  if (!enabled) {
    out.reason = "preemption disabled";
    return out;
  }
  if (!caller_is_holder) {
    out.reason = "caller does not hold the TXOP";
    return out;
  }
  if (!ongoing.best_effort) {
    out.reason = "ongoing PPDU is not best-effort";
    return out;
  }
  if (urgent_arrival >= ongoing.txop_end) {
    out.reason = "TXOP already finished";
    return out;
  }

  const SimTime data_start = ongoing.start + ongoing.preamble;
  if (urgent_arrival >= ongoing.end) {
    // SIFS/BlockAck gap: nothing left to interrupt.
    out.kind = PreemptionKind::AfterBlockAck;
    out.cut_at = ongoing.end;
    out.urgent_start = ongoing.txop_end + sifs;
    out.insertion_latency = out.urgent_start + ongoing.preamble - urgent_arrival;
    out.delivered_before_cut = n;
    return out;
  }

  out.kind = PreemptionKind::Truncated;
  std::int64_t symbols_sent = 0;
  if (urgent_arrival < data_start) {
    // Still in the preamble: drop the PPDU right away.
    out.cut_at = std::max(urgent_arrival, ongoing.start);
  } else {
    const std::int64_t sym = ongoing.symbol.ns();
    symbols_sent = ((urgent_arrival - data_start).ns() + sym - 1) / sym;
    out.cut_at = data_start + ongoing.symbol * symbols_sent;
  }
  const double bits_sent = static_cast<double>(symbols_sent) * ongoing.bits_per_symbol + 1e-6;
  double cum = 0.0;
  int delivered = 0;
  for (auto b : ongoing.mpdu_bytes) {
    cum += b * 8.0;
    if (cum > bits_sent) break;
    ++delivered;
  }
  out.delivered_before_cut = delivered;
  out.requeued = n - delivered;
  out.urgent_start = out.cut_at;
  out.insertion_latency = out.cut_at - urgent_arrival + ongoing.preamble;
  return out;
}

}  // namespace uhrsim
