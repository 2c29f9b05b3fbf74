#include "uhrsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include "uhrsim/event_queue.hpp"
#include "uhrsim/mac.hpp"
#include "uhrsim/mlo.hpp"
#include "uhrsim/rng.hpp"
#include "uhrsim/shared_queue.hpp"
#include "uhrsim/traffic.hpp"

namespace uhrsim {

namespace {

SimTime from_us(double us) { return nanoseconds(std::llround(us * 1000.0)); }

struct LinkState {
  LinkState(const EdcaParams& e, RngStream b, RngStream p)
      : access(e), backoff_rng(std::move(b)), per_rng(std::move(p)) {}

  ChannelAccess access;
  RngStream backoff_rng;
  RngStream per_rng;
  EventHandle grant;
  SimTime grant_at;
  bool grant_protected = false;
  int busy = 0;       // neighbors currently on the air
  int obss_busy = 0;  // ... of them from other BSSs
  SimTime busy_since;
  SimTime idle_since;
  EventHandle resume;
  int tx = -1;
  int group = -1;
  bool deferring = false;
  bool obss_deferring = false;
  SimTime defer_start;
  SimTime obss_defer_start;
  SimTime deferral;
  SimTime obss_deferral;
  SimTime preempt_reserve;
  double urgent_bits = 0.0;
};

struct Device {
  std::string name;
  bool ap = false;
  Position pos;
  int antennas = 1;
  int streams = 1;
  int bss = -1;
  MldConfig mld;
  SharedQueue queue;
  std::vector<int> lazy;   // flows materialized on demand
  std::vector<int> eager;  // flows with one event per arrival
  bool sources = false;
  std::vector<LinkState> links;
  std::vector<LinkActivity> activity;
  EventHandle wake;
  SimTime wake_at;
};

struct Flow {
  FlowConfig cfg;
  int src = -1;
  int dst = -1;
  bool eager = false;
  TrafficSource source;
  FlowCounters counters;
  DelayAccumulator delays;
};

struct Part {
  std::vector<Packet> mpdus;
  McsEntry mcs;
  double rate = 0.0;
  int dst = -1;
  SimTime ppdu_start;
  SimTime ppdu_end;
};

struct Overlap {
  int device = -1;
  int subchannel = -1;
};

struct Tx {
  int id = -1;
  int device = -1;
  int link = -1;
  std::vector<Part> parts;
  std::size_t evaluated = 0;
  SimTime start;
  SimTime end;
  SimTime ppdu_lo;
  SimTime ppdu_hi;
  int group = -1;
  int subchannel = -1;
  const PhyConfig* phy = nullptr;
  std::vector<Overlap> overlaps;
  std::size_t audit_id = 0;
  bool sp_member = false;
  bool contention = false;
  bool preempted = false;
  bool after_ba = false;
  int urgent_dst = -1;
  EventHandle end_event;
  TxOutcome out;
};

struct Group {
  int id = -1;
  int link = -1;
  CoordScheme scheme = CoordScheme::None;
  SimTime start;
  std::vector<CtdmaSlot> slots;
  std::size_t next = 0;
  int winner = -1;
  int live = 0;
};

}  // namespace

struct Network::Impl : EventHandler {
  ScenarioConfig cfg;
  RunOptions opts;
  PhyConfig phy;
  EdcaParams edca;
  SimTime horizon;
  int nlinks = 0;
  std::vector<Device> dev;
  std::vector<Flow> flows;
  ContentionDomain domain;
  CoordinationSet coord;
  std::vector<PhyConfig> sub_phy;  // C-OFDMA portion per member rank
  RtwtCalendar calendar;
  std::vector<std::vector<std::vector<int>>> nbr;  // [link][device]
  std::vector<std::vector<int>> on_air;            // [link] tx ids
  std::unordered_map<int, Tx> txs;
  std::unordered_map<int, Group> groups;
  int next_tx = 0;
  int next_group = 0;
  mutable std::map<std::tuple<int, int, int, int>, std::optional<McsEntry>> mcs_cache;
  mutable std::map<std::tuple<int, int, int, int>, double> sinr_cache;
  Engine engine;
  AirtimeAuditor auditor{1, {}};
  std::map<int, std::uint64_t> mcs_txops;
  std::uint64_t preemptions = 0;
  SimTime max_latency;
  bool ran = false;

  Impl(const ScenarioConfig& c, RunOptions o);

  SimTime now() const { return engine.now(); }

  // --- setup helpers --------------------------------------------------------
  double pl(int a, int b) const {
    return path_loss_db(dev[a].pos, dev[b].pos, phy.freq_ghz);
  }

  double sinr_for(int tx, int rx, int link, const PhyConfig& p, bool ofdma) const {
    auto key = std::make_tuple(tx, rx, link, ofdma ? p.bandwidth_mhz : -p.bandwidth_mhz);
    if (auto it = sinr_cache.find(key); it != sinr_cache.end()) return it->second;
    const double signal = p.tx_power_dbm - pl(tx, rx);
    std::vector<Interferer> ints;
    for (int k = 0; k < static_cast<int>(dev.size()); ++k) {
      if (k == tx || k == rx || !dev[k].sources || domain.edge(link, tx, k)) continue;
      if (ofdma && coord.contains(k)) continue;
      ints.push_back({p.tx_power_dbm - pl(k, rx), domain.suppression_db(link, k, rx)});
    }
    const double s =
        sinr_db(signal, ints, noise_floor_dbm(p.bandwidth_mhz, p.noise_figure_db, p.noise_density_dbm_hz));
    sinr_cache[key] = s;
    return s;
  }

  std::optional<McsEntry> mcs_opt(int tx, int rx, int link, const PhyConfig& p, bool ofdma) const {
    auto key = std::make_tuple(tx, rx, link, ofdma ? p.bandwidth_mhz : -p.bandwidth_mhz);
    if (auto it = mcs_cache.find(key); it != mcs_cache.end()) return it->second;
    auto m = select_mcs(sinr_for(tx, rx, link, p, ofdma), cfg.mcs);
    mcs_cache[key] = m;
    return m;
  }

  McsEntry mcs_for(int tx, int rx, int link, const PhyConfig& p, bool ofdma) const {
    auto m = mcs_opt(tx, rx, link, p, ofdma);
    if (!m) throw std::logic_error("no usable MCS from " + dev[tx].name + " to " + dev[rx].name);
    return *m;
  }

  TxopLimits limits_for(int d, int l) const {
    TxopLimits lim;
    lim.txop_limit = from_us(cfg.txop_limit_us);
    lim.max_ampdu = cfg.max_ampdu;
    lim.preemption_reserve = dev[d].links[l].preempt_reserve;
    if (coord.scheme == CoordScheme::Cbf && coord.contains(d)) lim.overhead = coord.sounding;
    return lim;
  }

  TxopEnv env_for(int d, int l, const PhyConfig* p, bool ofdma) const {
    TxopEnv env;
    env.device = d;
    env.streams = dev[d].streams;
    env.phy = p;
    env.edca = &edca;
    env.mcs_for = [this, d, l, p, ofdma](int dst) { return mcs_for(d, dst, l, *p, ofdma); };
    return env;
  }

  // --- traffic -------------------------------------------------------------
  void admit(Flow& f, const Packet& p) {
    ++f.counters.generated;
    if (!dev[f.src].queue.push(p)) ++f.counters.dropped_buffer;
  }

  void advance(int d) { advance_to(d, now()); }

  void advance_to(int d, SimTime t) {
    Device& D = dev[d];
    if (D.lazy.empty()) return;
    if (D.lazy.size() == 1) {
      Flow& f = flows[D.lazy.front()];
      while (f.source.peek_arrival() <= t) admit(f, f.source.pop_arrival());
      return;
    }
    for (;;) {
      Flow* best = nullptr;
      SimTime best_t = SimTime::max();
      for (int fi : D.lazy) {
        const SimTime a = flows[fi].source.peek_arrival();
        if (a < best_t) {
          best_t = a;
          best = &flows[fi];
        }
      }
      if (best == nullptr || best_t > t) return;
      admit(*best, best->source.pop_arrival());
    }
  }

  bool backlogged(int d) {
    if (!dev[d].sources) return false;
    advance(d);
    return !dev[d].queue.empty();
  }

  void ensure_wake(int d) {
    Device& D = dev[d];
    if (D.lazy.empty()) return;
    SimTime t = SimTime::max();
    for (int fi : D.lazy) t = std::min(t, flows[fi].source.peek_arrival());
    if (t == SimTime::max() || t > horizon) return;
    t = std::max(t, now());
    if (D.wake.valid()) {
      if (D.wake_at <= t) return;
      engine.cancel(D.wake);
    }
    D.wake = engine.schedule_at(t, EventKind::Wake, d);
    D.wake_at = t;
  }

  // --- contention ----------------------------------------------------------
  bool link_eligible(int d, int l) const {
    const Device& D = dev[d];
    const auto el = eligible_links(D.mld, D.activity, now());
    return std::find(el.begin(), el.end(), l) != el.end();
  }

  void drop_grant(int d, int l) {
    LinkState& ls = dev[d].links[l];
    if (!ls.grant.valid()) return;
    engine.cancel(ls.grant);
    ls.grant = {};
    if (ls.grant_at > now() && !ls.grant_protected) ls.access.freeze(now());
    ls.grant_protected = false;
  }

  void try_contend(int d, int l) {
    Device& D = dev[d];
    if (!D.sources) return;
    LinkState& ls = D.links[l];
    if (ls.tx >= 0 || ls.group >= 0 || ls.grant.valid()) return;
    if (D.activity[l].hold_until > now()) return;
    if (!link_eligible(d, l)) return;
    advance(d);
    if (D.queue.empty()) {
      ensure_wake(d);
      return;
    }
    if (ls.busy > 0) return;
    ls.access.ensure_backoff(ls.backoff_rng);
    const SimTime t = ls.access.grant_time(now(), ls.idle_since);
    ls.grant = engine.schedule_at(t, EventKind::AccessGrant, d, l, 0);
    ls.grant_at = t;
    ls.grant_protected = false;
  }

  void protected_grant(int d, int l, SimTime at) {
    LinkState& ls = dev[d].links[l];
    if (ls.tx >= 0 || ls.group >= 0) return;
    if (ls.grant.valid() && ls.grant_protected) return;
    drop_grant(d, l);
    ls.grant = engine.schedule_at(at, EventKind::AccessGrant, d, l, 1);
    ls.grant_at = at;
    ls.grant_protected = true;
  }

  void hold(int d, int l, SimTime until) {
    Device& D = dev[d];
    LinkState& ls = D.links[l];
    drop_grant(d, l);
    D.activity[l].hold_until = std::max(D.activity[l].hold_until, until);
    if (ls.resume.valid()) engine.cancel(ls.resume);
    ls.resume = engine.schedule_at(D.activity[l].hold_until, EventKind::Resume, d, l);
  }

  void sense_start(int l, int txdev) {
    for (int n : nbr[l][txdev]) {
      LinkState& ns = dev[n].links[l];
      const bool obss = dev[n].bss != dev[txdev].bss;
      const bool first = ns.busy == 0;
      const bool obss_first = obss && ns.obss_busy == 0;
      ++ns.busy;
      if (obss) ++ns.obss_busy;
      if (!first && !obss_first) continue;
      const bool back = backlogged(n);
      if (first) {
        ns.busy_since = now();
        if (ns.grant.valid() && !ns.grant_protected && ns.grant_at > now()) drop_grant(n, l);
        if (back) {
          ns.deferring = true;
          ns.defer_start = now();
        }
      }
      if (obss_first && back) {
        ns.obss_deferring = true;
        ns.obss_defer_start = now();
      }
    }
  }

  void sense_end(int l, int txdev) {
    for (int n : nbr[l][txdev]) {
      LinkState& ns = dev[n].links[l];
      if (dev[n].bss != dev[txdev].bss && --ns.obss_busy == 0 && ns.obss_deferring) {
        ns.obss_deferral += now() - ns.obss_defer_start;
        ns.obss_deferring = false;
      }
      if (--ns.busy == 0) {
        ns.idle_since = now();
        if (ns.deferring) {
          ns.deferral += now() - ns.defer_start;
          ns.deferring = false;
        }
        try_contend(n, l);
      }
    }
  }

  // --- transmissions ---------------------------------------------------------
  void add_overlaps(Tx& tx, SimTime lo, SimTime hi) {
    for (int oid : on_air[tx.link]) {
      if (oid == tx.id) continue;
      Tx& o = txs.at(oid);
      if (o.ppdu_hi > lo && hi > o.ppdu_lo) {
        auto has = [](const std::vector<Overlap>& v, int d) {
          return std::any_of(v.begin(), v.end(), [&](const Overlap& x) { return x.device == d; });
        };
        if (!has(o.overlaps, tx.device)) o.overlaps.push_back({tx.device, tx.subchannel});
        if (!has(tx.overlaps, o.device)) tx.overlaps.push_back({o.device, o.subchannel});
      }
    }
  }

  void start_tx(int d, int l, TxopPlan&& plan, int group, int subchannel, const PhyConfig* p,
                bool contention) {
    Device& D = dev[d];
    LinkState& ls = D.links[l];
    const TxopLimits lim = limits_for(d, l);
    Tx tx;
    tx.id = next_tx++;
    tx.device = d;
    tx.link = l;
    tx.start = now();
    tx.end = now() + plan.planned_airtime;
    tx.group = group;
    tx.subchannel = subchannel;
    tx.phy = p;
    tx.sp_member = plan.sp_member;
    tx.contention = contention;
    Part part;
    part.mcs = plan.mcs;
    part.rate = plan.rate_bps;
    part.dst = plan.dst;
    part.ppdu_start = now() + lim.overhead;
    part.ppdu_end = part.ppdu_start + plan.ppdu_airtime;
    part.mpdus = std::move(plan.mpdus);
    tx.ppdu_lo = part.ppdu_start;
    tx.ppdu_hi = part.ppdu_end;
    const int n = static_cast<int>(part.mpdus.size());
    tx.parts.push_back(std::move(part));
    tx.out.device = d;
    tx.out.link = l;
    tx.out.dst = plan.dst;
    tx.out.start = now();
    tx.out.mcs = plan.mcs.index;
    tx.out.group = group;
    tx.out.subchannel = subchannel;
    tx.out.sp_member = plan.sp_member;
    tx.out.sinr_db = std::numeric_limits<double>::infinity();
    ++mcs_txops[plan.mcs.index];

    drop_grant(d, l);
    ls.tx = tx.id;
    D.activity[l].transmitting = true;
    D.activity[l].tx_start = now();
    D.activity[l].tx_end = tx.end;
    if (D.mld.single_radio()) {
      for (int o = 0; o < nlinks; ++o) {
        if (o != l) drop_grant(d, o);
      }
    }

    BusyInterval iv;
    iv.link = l;
    iv.device = d;
    iv.start = now();
    iv.end = std::min(tx.end, horizon);
    iv.group = group;
    iv.subchannel = subchannel;
    iv.mpdus = n;
    iv.sp_member = tx.sp_member;
    tx.audit_id = auditor.open(iv);

    const int id = tx.id;
    tx.end_event = engine.schedule_at(tx.end, EventKind::TxEnd, d, l, id);
    auto& stored = txs.emplace(id, std::move(tx)).first->second;
    add_overlaps(stored, stored.ppdu_lo, stored.ppdu_hi);
    on_air[l].push_back(id);
    sense_start(l, d);
  }

  double actual_sinr(Tx& tx, const Part& part) {
    const PhyConfig& p = *tx.phy;
    const double signal = p.tx_power_dbm - pl(tx.device, part.dst);
    std::vector<Interferer> ints;
    for (const auto& o : tx.overlaps) {
      if (tx.subchannel >= 0 && o.subchannel >= 0 && tx.subchannel != o.subchannel) continue;
      if (o.device == part.dst) continue;
      const double supp = domain.suppression_db(tx.link, o.device, part.dst);
      ints.push_back({p.tx_power_dbm - pl(o.device, part.dst), supp});
      if (std::find(tx.out.interferers.begin(), tx.out.interferers.end(), o.device) == tx.out.interferers.end()) {
        tx.out.interferers.push_back(o.device);
        tx.out.suppression_db.push_back(supp);
      }
    }
    return sinr_db(signal, ints, noise_floor_dbm(p.bandwidth_mhz, p.noise_figure_db, p.noise_density_dbm_hz));
  }

  void deliver(const Packet& p) {
    Flow& f = flows[p.flow];
    ++f.counters.delivered;
    f.delays.record(now() - p.arrival);
  }

  void evaluate_parts(Tx& tx) {
    Device& D = dev[tx.device];
    LinkState& ls = D.links[tx.link];
    for (; tx.evaluated < tx.parts.size(); ++tx.evaluated) {
      Part& part = tx.parts[tx.evaluated];
      const double sinr = actual_sinr(tx, part);
      tx.out.sinr_db = std::min(tx.out.sinr_db, sinr);
      const bool sinr_fail = sinr < part.mcs.min_sinr_db;
      tx.out.sinr_failure = tx.out.sinr_failure || sinr_fail;
      std::vector<Packet> retry;
      std::size_t gone = 0;
      for (Packet& p : part.mpdus) {
        ++tx.out.mpdus;
        const bool failed = sinr_fail || mpdu_error_trial(tx.phy->per, ls.per_rng);
        if (!failed) {
          deliver(p);
          ++tx.out.delivered;
          ++gone;
          continue;
        }
        ++tx.out.failed;
        ++p.retries;
        if (p.retries > cfg.retry_limit) {
          ++flows[p.flow].counters.dropped_retry;
          ++gone;
        } else {
          retry.push_back(p);
        }
      }
      D.queue.release(gone);
      D.queue.requeue_front(retry);
      part.mpdus.clear();
    }
  }

  /// Builds the urgent PPDU of a preempted TXOP starting at `at`.
  bool add_urgent_part(Tx& tx, SimTime at) {
    Device& D = dev[tx.device];
    const LinkState& ls = D.links[tx.link];
    const int dst = tx.urgent_dst;
    auto urgent = D.queue.take(static_cast<std::size_t>(cfg.max_ampdu), ls.urgent_bits, true,
                               [&](const Packet& p) { return p.cls == TrafficClass::TimeSensitive && p.dst == dst; });
    if (urgent.empty()) return false;
    Part part;
    part.mcs = mcs_for(tx.device, dst, tx.link, *tx.phy, false);
    part.rate = phy_rate_bps(part.mcs, *tx.phy, D.streams);
    part.dst = dst;
    double bits = 0.0;
    for (const auto& p : urgent) bits += p.bytes * 8.0;
    part.ppdu_start = at;
    part.ppdu_end = at + ppdu_airtime_bits(bits, part.rate, *tx.phy);
    part.mpdus = std::move(urgent);
    tx.ppdu_hi = std::max(tx.ppdu_hi, part.ppdu_end);
    const SimTime lo = part.ppdu_start;
    const SimTime hi = part.ppdu_end;
    tx.parts.push_back(std::move(part));
    add_overlaps(tx, lo, hi);
    return true;
  }

  void extend_tx(Tx& tx, SimTime new_end) {
    engine.cancel(tx.end_event);
    tx.end = new_end;
    dev[tx.device].activity[tx.link].tx_end = new_end;
    tx.end_event = engine.schedule_at(new_end, EventKind::TxEnd, tx.device, tx.link, tx.id);
  }

  void open_continuation(Tx& tx, SimTime from) {
    BusyInterval iv;
    iv.link = tx.link;
    iv.device = tx.device;
    iv.start = from;
    iv.end = std::min(tx.end, horizon);
    iv.mpdus = static_cast<int>(tx.parts.back().mpdus.size());
    iv.txop_start = tx.start;
    tx.audit_id = auditor.open(iv);
  }

  void try_preempt(int d, const Packet& urgent) {
    Device& D = dev[d];
    for (int l = 0; l < nlinks; ++l) {
      LinkState& ls = D.links[l];
      if (ls.tx < 0) continue;
      Tx& tx = txs.at(ls.tx);
      if (tx.preempted || tx.group >= 0 || tx.sp_member || tx.parts.size() != 1) continue;
      const Part& part = tx.parts.front();
      OngoingPpdu o;
      o.start = part.ppdu_start;
      o.end = part.ppdu_end;
      o.preamble = tx.phy->preamble;
      o.symbol = tx.phy->symbol;
      o.bits_per_symbol = bits_per_ofdm_symbol(part.rate, *tx.phy);
      o.best_effort = true;
      for (const auto& p : part.mpdus) {
        o.mpdu_bytes.push_back(p.bytes);
        if (p.cls != TrafficClass::BestEffort) o.best_effort = false;
      }
      o.txop_end = tx.end;
      const PreemptionOutcome out = preempt(true, true, o, now(), edca.sifs);
      if (out.kind == PreemptionKind::Rejected) continue;
      tx.preempted = true;
      tx.out.preempted = true;
      tx.urgent_dst = urgent.dst;
      ++preemptions;
      if (out.kind == PreemptionKind::Truncated) {
        max_latency = std::max(max_latency, out.insertion_latency);
        engine.schedule_at(out.cut_at, EventKind::Preempt, d, l, tx.id);
      } else {
        tx.after_ba = true;
      }
      if (opts.on_preempt) opts.on_preempt({d, l, out.kind, now(), out.insertion_latency});
      return;
    }
  }

  void on_preempt_cut(int id) {
    auto it = txs.find(id);
    if (it == txs.end()) return;
    Tx& tx = it->second;
    Device& D = dev[tx.device];
    advance(tx.device);
    Part& be = tx.parts.front();
    // MPDUs whose last bit was not sent before the cut go back untouched.
    const SimTime data_start = be.ppdu_start + tx.phy->preamble;
    const std::int64_t symbols = now() > data_start ? (now() - data_start) / tx.phy->symbol : 0;
    const double sent_bits = static_cast<double>(symbols) * bits_per_ofdm_symbol(be.rate, *tx.phy) + 1e-6;
    double cum = 0.0;
    std::size_t keep = 0;
    for (const auto& p : be.mpdus) {
      cum += p.bytes * 8.0;
      if (cum > sent_bits) break;
      ++keep;
    }
    std::vector<Packet> interrupted(be.mpdus.begin() + static_cast<std::ptrdiff_t>(keep), be.mpdus.end());
    be.mpdus.resize(keep);
    be.ppdu_end = now();
    D.queue.requeue_front(interrupted);
    tx.out.interrupted += static_cast<int>(interrupted.size());

    auditor.amend_end(tx.audit_id, now());
    if (!add_urgent_part(tx, now())) {
      extend_tx(tx, now() + edca.sifs + edca.block_ack);
    } else {
      extend_tx(tx, tx.parts.back().ppdu_end + edca.sifs + edca.block_ack);
    }
    open_continuation(tx, now());
  }

  void on_tx_end(int id) {
    auto it = txs.find(id);
    if (it == txs.end()) return;
    Tx& tx = it->second;
    advance(tx.device);
    evaluate_parts(tx);
    if (tx.after_ba) {
      tx.after_ba = false;
      if (add_urgent_part(tx, now() + edca.sifs)) {
        extend_tx(tx, tx.parts.back().ppdu_end + edca.sifs + edca.block_ack);
        open_continuation(tx, now());
        return;
      }
    }
    finish_tx(tx);
  }

  void finish_tx(Tx& tx) {
    const int d = tx.device;
    const int l = tx.link;
    Device& D = dev[d];
    LinkState& ls = D.links[l];
    auto& air = on_air[l];
    air.erase(std::remove(air.begin(), air.end(), tx.id), air.end());
    ls.tx = -1;
    D.activity[l].transmitting = false;
    tx.out.end = now();
    if (opts.on_tx) opts.on_tx(tx.out);
    if (tx.contention) ls.access.on_result(tx.out.delivered > 0);
    const int group = tx.group;
    const bool contention = tx.contention;
    txs.erase(tx.id);

    sense_end(l, d);
    if (ls.busy == 0) ls.idle_since = now();
    if (group >= 0) group_tx_done(group, d, contention);

    if (auto sp = calendar.active_at(now(), l); sp && calendar.sps()[sp->sp].owner == d) {
      protected_grant(d, l, now() + edca.sifs);
    }
    if (D.mld.single_radio()) {
      for (int o = 0; o < nlinks; ++o) {
        if (o == l) continue;
        if (D.mld.switch_delay.ns() > 0) hold(d, o, now() + D.mld.switch_delay);
      }
    }
    for (int o = 0; o < nlinks; ++o) try_contend(d, o);
    ensure_wake(d);
  }

  // --- grants ----------------------------------------------------------------
  void on_grant(int d, int l, bool prot) {
    Device& D = dev[d];
    LinkState& ls = D.links[l];
    ls.grant = {};
    ls.grant_protected = false;
    if (ls.tx >= 0 || ls.group >= 0) return;
    if (!prot) {
      if (ls.busy > 0 && ls.busy_since < now()) return;
      if (D.activity[l].hold_until > now()) return;
      const GrantCheck g = check_grant(D.mld, l, D.activity, now(), edca.slot);
      if (!g.allowed) {
        ls.access.set_backoff(0);
        hold(d, l, g.defer_until);
        return;
      }
    }
    advance(d);
    if (!prot) ls.access.on_grant();
    if (!prot && coord.contains(d) &&
        (coord.scheme == CoordScheme::Ctdma || coord.scheme == CoordScheme::Cofdma)) {
      if (start_group(d, l)) return;
    }
    const PlanResult r = on_grant_plan(d, l, &phy, false, SimTime::max(), limits_for(d, l));
    switch (r.status) {
      case PlanStatus::EmptyQueue:
        ensure_wake(d);
        return;
      case PlanStatus::BlockedByServicePeriod:
        hold(d, l, r.blocked_until);
        return;
      case PlanStatus::Ok:
        break;
    }
    TxopPlan plan = r.plan;
    start_tx(d, l, std::move(plan), -1, -1, &phy, !prot);
  }

  PlanResult on_grant_plan(int d, int l, const PhyConfig* p, bool ofdma, SimTime budget_end, TxopLimits lim) {
    TxopEnv env = env_for(d, l, p, ofdma);
    env.budget_end = budget_end;
    const McsEntry fallback = cfg.mcs.front();
    return uhrsim::on_grant(dev[d].queue, l, fallback, now(), lim, calendar, env);
  }

  // --- coordinated TXOPs -------------------------------------------------------
  bool start_group(int winner, int l) {
    for (int m : coord.members) {
      if (dev[m].links[l].tx >= 0 || dev[m].links[l].group >= 0) return false;
    }
    Group g;
    g.id = next_group++;
    g.link = l;
    g.scheme = coord.scheme;
    g.start = now();
    g.winner = winner;
    for (int m : coord.members) {
      drop_grant(m, l);
      dev[m].links[l].group = g.id;
    }
    const int gid = g.id;
    groups.emplace(gid, std::move(g));
    Group& G = groups.at(gid);
    if (G.scheme == CoordScheme::Ctdma) {
      G.slots = ctdma_slots(from_us(cfg.txop_limit_us), coord.members, edca.sifs);
      run_slot(gid);
      return true;
    }
    for (std::size_t i = 0; i < coord.members.size(); ++i) {
      const int m = coord.members[i];
      advance(m);
      TxopLimits lim = limits_for(m, l);
      const PlanResult r = on_grant_plan(m, l, &sub_phy[i], true, SimTime::max(), lim);
      if (r.status != PlanStatus::Ok) continue;
      TxopPlan plan = r.plan;
      ++G.live;
      start_tx(m, l, std::move(plan), gid, static_cast<int>(i), &sub_phy[i], m == winner);
    }
    if (groups.at(gid).live == 0) end_group(gid);
    return true;
  }

  void run_slot(int gid) {
    Group& G = groups.at(gid);
    const int l = G.link;
    while (G.next < G.slots.size()) {
      const CtdmaSlot slot = G.slots[G.next++];
      const SimTime nominal_end = G.start + slot.offset + slot.duration;
      if (nominal_end <= now()) continue;
      const int m = slot.member;
      advance(m);
      TxopLimits lim = limits_for(m, l);
      lim.txop_limit = nominal_end - now();
      const PlanResult r = on_grant_plan(m, l, &phy, false, nominal_end, lim);
      if (r.status != PlanStatus::Ok) continue;
      TxopPlan plan = r.plan;
      G.live = 1;
      start_tx(m, l, std::move(plan), gid, -1, &phy, m == G.winner);
      return;
    }
    end_group(gid);
  }

  void group_tx_done(int gid, int, bool) {
    auto it = groups.find(gid);
    if (it == groups.end()) return;
    Group& G = it->second;
    --G.live;
    if (G.live > 0) return;
    if (G.scheme == CoordScheme::Ctdma && G.next < G.slots.size()) {
      engine.schedule_at(now() + edca.sifs, EventKind::SlotStart, -1, G.link, gid);
      return;
    }
    end_group(gid);
  }

  void end_group(int gid) {
    Group G = groups.at(gid);
    groups.erase(gid);
    for (int m : coord.members) {
      dev[m].links[G.link].group = -1;
      try_contend(m, G.link);
      ensure_wake(m);
    }
  }

  // --- R-TWT ---------------------------------------------------------------
  void on_sp_start(int sp_index, int l) {
    const RtwtSp& sp = calendar.sps()[static_cast<std::size_t>(sp_index)];
    engine.schedule_at(now() + sp.period, EventKind::SpStart, sp.owner, l, sp_index);
    protected_grant(sp.owner, l, now());
  }

  void on_arrival(int fi) {
    Flow& f = flows[fi];
    const int d = f.src;
    advance(d);
    const Packet p = f.source.pop_arrival();
    admit(f, p);
    engine.schedule_at(std::max(f.source.peek_arrival(), now()), EventKind::Arrival, fi);
    if (p.cls == TrafficClass::TimeSensitive && cfg.preemption) try_preempt(d, p);
    for (int l = 0; l < nlinks; ++l) {
      if (auto sp = calendar.active_at(now(), l)) {
        const RtwtSp& def = calendar.sps()[sp->sp];
        if (def.owner == d && def.is_member(p.flow)) protected_grant(d, l, now());
      }
      try_contend(d, l);
    }
    ensure_wake(d);
  }

  void on_event(const Event& e, Engine&) override {
    switch (e.kind) {
      case EventKind::Arrival:
        on_arrival(e.target);
        break;
      case EventKind::Wake: {
        Device& D = dev[e.target];
        D.wake = {};
        advance(e.target);
        for (int l = 0; l < nlinks; ++l) try_contend(e.target, l);
        break;
      }
      case EventKind::AccessGrant:
        on_grant(e.target, e.link, e.payload == 1);
        break;
      case EventKind::TxEnd:
        on_tx_end(static_cast<int>(e.payload));
        break;
      case EventKind::SlotStart:
        if (groups.count(static_cast<int>(e.payload))) run_slot(static_cast<int>(e.payload));
        break;
      case EventKind::SpStart:
        on_sp_start(static_cast<int>(e.payload), e.link);
        break;
      case EventKind::Resume:
        dev[e.target].links[e.link].resume = {};
        try_contend(e.target, e.link);
        break;
      case EventKind::Preempt:
        on_preempt_cut(static_cast<int>(e.payload));
        break;
      case EventKind::SpEnd:
      case EventKind::User:
        break;
    }
  }

  RunResults finish();
};

Network::Impl::Impl(const ScenarioConfig& c, RunOptions o) : cfg(c), opts(std::move(o)) {
  validate_scenario(cfg);
  horizon = nanoseconds(std::llround(cfg.duration_s * 1e9));
  nlinks = cfg.link_count;
  phy.freq_ghz = cfg.freq_ghz;
  phy.bandwidth_mhz = cfg.bandwidth_mhz;
  phy.data_subcarriers = data_subcarriers_for(cfg.bandwidth_mhz);
  phy.symbol = from_us(cfg.symbol_us);
  phy.preamble = from_us(cfg.preamble_us);
  phy.noise_figure_db = cfg.noise_figure_db;
  phy.noise_density_dbm_hz = cfg.noise_density_dbm_hz;
  phy.tx_power_dbm = cfg.tx_power_dbm;
  phy.per = cfg.per;
  edca.slot = from_us(cfg.slot_us);
  edca.sifs = from_us(cfg.sifs_us);
  edca.difs = from_us(cfg.difs_us);
  edca.cw_min = cfg.cw_min;
  edca.cw_max = cfg.cw_max;
  edca.retry_limit = cfg.retry_limit;
  edca.block_ack = from_us(cfg.block_ack_us);

  std::map<std::string, int> index;
  auto make_device = [&](const std::string& name, bool ap, Position pos, int antennas, int streams) {
    Device D;
    D.name = name;
    D.ap = ap;
    D.pos = pos;
    D.antennas = antennas;
    D.streams = streams;
    D.queue = SharedQueue(static_cast<std::size_t>(cfg.buffer_packets), cfg.preemption);
    D.mld.mode = cfg.mode_of(name);
    for (int l = 0; l < nlinks; ++l) D.mld.links.push_back(l);
    D.mld.radios = D.mld.single_radio() ? 1 : nlinks;
    D.mld.switch_delay = from_us(cfg.switch_delay_us);
    for (int l = 0; l < nlinks; ++l) {
      const std::string sfx = name + ".l" + std::to_string(l);
      D.links.emplace_back(edca, RngStream(cfg.seed, "backoff." + sfx), RngStream(cfg.seed, "per." + sfx));
    }
    D.activity.resize(static_cast<std::size_t>(nlinks));
    index[name] = static_cast<int>(dev.size());
    dev.push_back(std::move(D));
  };
  for (const auto& ap : cfg.aps) make_device(ap.name, true, ap.pos, ap.antennas, ap.streams);
  for (const auto& s : cfg.stas) make_device(s.name, false, s.pos, s.antennas, 1);
  for (std::size_t i = 0; i < cfg.aps.size(); ++i) dev[i].bss = static_cast<int>(i);
  for (std::size_t i = 0; i < cfg.stas.size(); ++i) dev[cfg.aps.size() + i].bss = index.at(cfg.stas[i].ap);
  const int n = static_cast<int>(dev.size());
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (distance_m(dev[a].pos, dev[b].pos) <= 0.0) {
        throw ConfigError("devices " + dev[a].name + " and " + dev[b].name + " are co-located");
      }
    }
  }

  // Carrier sense: every pair hearing each other above the CCA threshold.
  ContentionDomain base(nlinks, n);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (phy.tx_power_dbm - pl(a, b) >= cfg.cca_dbm) {
        for (int l = 0; l < nlinks; ++l) base.set_edge(l, a, b, true);
      }
    }
  }

  // Flows.
  std::map<std::string, int> flow_index;
  std::set<std::string> rtwt_members;
  for (const auto& r : cfg.rtwt) rtwt_members.insert(r.flows.begin(), r.flows.end());
  for (std::size_t i = 0; i < cfg.flows.size(); ++i) {
    const auto& fc = cfg.flows[i];
    FlowSpec spec;
    spec.id = static_cast<std::uint32_t>(i);
    spec.src = index.at(fc.src);
    spec.dst = index.at(fc.dst);
    spec.model = fc.model;
    spec.mean_on = from_us(fc.mean_on_ms * 1000.0);
    spec.mean_off = from_us(fc.mean_off_ms * 1000.0);
    spec.rate_on_bps = fc.rate_mbps * 1e6;
    spec.packet_bytes = fc.packet_bytes;
    spec.cls = fc.cls;
    spec.start = from_us(fc.start_ms * 1000.0);
    try {
      Flow f{fc, spec.src, spec.dst, false, TrafficSource(spec, RngStream(cfg.seed, "traffic." + fc.name)), {},
             DelayAccumulator(opts.exact_cap)};
      f.eager = fc.cls == TrafficClass::TimeSensitive || rtwt_members.count(fc.name) > 0;
      flows.push_back(std::move(f));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("flow " + fc.name + ": " + e.what());
    }
    flow_index[fc.name] = static_cast<int>(i);
    Device& S = dev[spec.src];
    S.sources = true;
    (flows.back().eager ? S.eager : S.lazy).push_back(static_cast<int>(i));
  }

  // Coordination.
  coord.scheme = cfg.scheme;
  domain = base;
  if (cfg.scheme != CoordScheme::None) {
    std::vector<int> members;
    if (cfg.members.empty()) {
      for (std::size_t i = 0; i < cfg.aps.size(); ++i) members.push_back(static_cast<int>(i));
    } else {
      for (const auto& m : cfg.members) members.push_back(index.at(m));
    }
    std::vector<CoordCandidate> cands;
    for (int m : members) {
      CoordCandidate cc;
      cc.device = m;
      cc.name = dev[m].name;
      cc.antennas = dev[m].antennas;
      cc.streams = dev[m].streams;
      for (int s = 0; s < n; ++s) {
        if (!dev[s].ap && dev[s].bss != m &&
            std::find(members.begin(), members.end(), dev[s].bss) != members.end()) {
          cc.null_directions += dev[s].antennas;
        }
      }
      cands.push_back(cc);
    }
    CoordParams params;
    params.nulling_db = cfg.nulling_db.value_or(0.0);
    params.sounding = from_us(cfg.sounding_us);
    coord = form_set(cands, cfg.scheme, params);
    std::vector<int> bss(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) bss[d] = dev[d].bss;
    domain = rewrite_contention(base, coord, bss);
    if (coord.scheme == CoordScheme::Cofdma) {
      for (int w : cofdma_split(cfg.bandwidth_mhz, static_cast<int>(coord.members.size()))) {
        sub_phy.push_back(phy.with_bandwidth(w));
      }
    }
  }

  // R-TWT calendar.
  for (const auto& r : cfg.rtwt) {
    RtwtSp sp;
    sp.owner = index.at(r.owner);
    sp.start = from_us(r.start_us);
    sp.duration = from_us(r.duration_us);
    sp.period = from_us(r.period_us);
    for (const auto& f : r.flows) sp.member_flows.push_back(static_cast<std::uint32_t>(flow_index.at(f)));
    sp.links = r.links;
    try {
      calendar.schedule(sp);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("R-TWT: ") + e.what());
    }
  }

  nbr.assign(static_cast<std::size_t>(nlinks), {});
  for (int l = 0; l < nlinks; ++l) {
    for (int d = 0; d < n; ++d) nbr[l].push_back(domain.neighbors(l, d));
  }
  on_air.assign(static_cast<std::size_t>(nlinks), {});

  // Every flow must be decodable at its receiver on every link.
  for (const auto& f : flows) {
    for (int l = 0; l < nlinks; ++l) {
      if (!mcs_opt(f.src, f.dst, l, phy, false)) {
        throw ConfigError("flow " + f.cfg.name + ": SINR " + format_number(sinr_for(f.src, f.dst, l, phy, false)) +
                          " dB is below the lowest MCS threshold");
      }
      if (coord.scheme == CoordScheme::Cofdma && coord.contains(f.src)) {
        const PhyConfig& p = sub_phy[static_cast<std::size_t>(coord.rank(f.src))];
        if (!mcs_opt(f.src, f.dst, l, p, true)) throw ConfigError("flow " + f.cfg.name + ": subchannel SINR too low");
      }
    }
  }

  // Headroom kept in every TXOP for an urgent insertion.
  if (cfg.preemption) {
    for (int d = 0; d < n; ++d) {
      int max_bytes = 0;
      std::vector<int> dsts;
      for (const auto& f : flows) {
        if (f.src == d && f.cfg.cls == TrafficClass::TimeSensitive) {
          max_bytes = std::max(max_bytes, f.cfg.packet_bytes);
          dsts.push_back(f.dst);
        }
      }
      if (max_bytes == 0) continue;
      for (int l = 0; l < nlinks; ++l) {
        double worst = std::numeric_limits<double>::infinity();
        for (int r : dsts) worst = std::min(worst, phy_rate_bps(mcs_for(d, r, l, phy, false), phy, dev[d].streams));
        LinkState& ls = dev[d].links[l];
        ls.urgent_bits = max_bytes * 8.0;
        ls.preempt_reserve = phy.preamble + phy.symbol * payload_symbols(ls.urgent_bits, worst, phy) +
                             edca.sifs * 2 + edca.block_ack;
      }
    }
  }

  AuditRules rules;
  rules.contend = [this](int l, int a, int b) { return domain.edge(l, a, b); };
  rules.single_radio = [this](int d) { return dev[d].mld.single_radio(); };
  rules.calendar = &calendar;
  rules.txop_limit = from_us(cfg.txop_limit_us);
  rules.max_ampdu = cfg.max_ampdu;
  auditor = AirtimeAuditor(nlinks, std::move(rules));
}

RunResults Network::Impl::finish() {
  auditor.finish();
  RunResults r;
  r.scenario = cfg.name;
  r.seed = cfg.seed;
  r.duration = horizon;
  r.events = engine.processed();
  for (int d = 0; d < static_cast<int>(dev.size()); ++d) advance_to(d, horizon);

  std::vector<std::uint64_t> queued(flows.size(), 0), inflight(flows.size(), 0);
  for (const auto& D : dev) D.queue.for_each([&](const Packet& p) { ++queued[p.flow]; });
  for (const auto& [id, tx] : txs) {
    for (std::size_t i = tx.evaluated; i < tx.parts.size(); ++i) {
      for (const auto& p : tx.parts[i].mpdus) ++inflight[p.flow];
    }
  }
  DelayAccumulator all(opts.exact_cap);
  for (std::size_t i = 0; i < flows.size(); ++i) {
    Flow& f = flows[i];
    FlowResult fr;
    fr.name = f.cfg.name;
    fr.src = f.cfg.src;
    fr.dst = f.cfg.dst;
    fr.counters = f.counters;
    fr.queued_end = queued[i];
    fr.inflight_end = inflight[i];
    all.merge(f.delays);
    fr.delays = std::move(f.delays);
    r.flows.push_back(std::move(fr));
  }
  r.all = std::move(all);
  for (int l = 0; l < nlinks; ++l) {
    r.link_utilization.push_back(static_cast<double>(auditor.busy_time(l).ns()) / static_cast<double>(horizon.ns()));
  }
  r.mcs_txops = mcs_txops;
  for (auto& D : dev) {
    if (!D.sources) continue;
    for (int l = 0; l < nlinks; ++l) {
      LinkState& ls = D.links[l];
      SimTime def = ls.deferral + (ls.deferring ? horizon - ls.defer_start : SimTime{});
      SimTime obss = ls.obss_deferral + (ls.obss_deferring ? horizon - ls.obss_defer_start : SimTime{});
      r.blocking.push_back({D.name, l, def.s() / horizon.s(), obss.s() / horizon.s()});
    }
  }
  r.audit_intervals = auditor.intervals();
  r.audit_violations = auditor.violation_count();
  r.audit_samples = auditor.first_violations();
  r.concurrent_overlaps = auditor.concurrent_overlaps();
  r.collisions = auditor.collisions();
  r.preemptions = preemptions;
  r.max_insertion_latency = max_latency;
  return r;
}

Network::Network(const ScenarioConfig& cfg, RunOptions opts) : impl_(std::make_unique<Impl>(cfg, std::move(opts))) {}

Network::~Network() = default;

RunResults Network::run() {
  Impl& m = *impl_;
  if (m.ran) throw std::logic_error("Network::run called twice");
  m.ran = true;
  m.engine.set_trace(m.opts.trace);
  for (int d = 0; d < static_cast<int>(m.dev.size()); ++d) m.ensure_wake(d);
  for (int fi = 0; fi < static_cast<int>(m.flows.size()); ++fi) {
    if (m.flows[fi].eager) m.engine.schedule_at(m.flows[fi].source.peek_arrival(), EventKind::Arrival, fi);
  }
  for (std::size_t i = 0; i < m.calendar.sps().size(); ++i) {
    const RtwtSp& sp = m.calendar.sps()[i];
    for (int l = 0; l < m.nlinks; ++l) {
      if (sp.covers(l)) m.engine.schedule_at(sp.start, EventKind::SpStart, sp.owner, l, static_cast<std::int64_t>(i));
    }
  }
  m.engine.run_until(m.horizon, m);
  return m.finish();
}

int Network::device_index(std::string_view name) const {
  for (std::size_t i = 0; i < impl_->dev.size(); ++i) {
    if (impl_->dev[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const ContentionDomain& Network::domain() const { return impl_->domain; }
const CoordinationSet& Network::coordination() const { return impl_->coord; }

double Network::static_sinr_db(int tx, int rx, int link) const {
  return impl_->sinr_for(tx, rx, link, impl_->phy, false);
}

std::optional<McsEntry> Network::static_mcs(int tx, int rx, int link) const {
  return impl_->mcs_opt(tx, rx, link, impl_->phy, false);
}

}  // namespace uhrsim
