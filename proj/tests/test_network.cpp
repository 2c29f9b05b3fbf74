#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "uhrsim/errors.hpp"
#include "uhrsim/network.hpp"
#include "uhrsim/phy.hpp"

using namespace uhrsim;

namespace {

ScenarioConfig short_run(const char* name, double seconds_, std::uint64_t seed = 1) {
  auto c = preset(name);
  c.duration_s = seconds_;
  c.seed = seed;
  return c;
}

void check_clean(const RunResults& r) {
  CHECK(r.audit_violations == 0);
  for (const auto& row : r.conservation()) CHECK_MESSAGE(row.imbalance() == 0, row.flow);
  CHECK(r.audit_intervals > 0);
}

}  // namespace

TEST_CASE("standalone MLO run is conserved and audit-clean") {
  std::vector<TxOutcome> txs;
  RunOptions o;
  o.on_tx = [&](const TxOutcome& t) { txs.push_back(t); };
  Network net(short_run("case-study-mlo", 5), o);
  const auto r = net.run();
  check_clean(r);
  REQUIRE(r.flows.size() == 2);
  for (const auto& f : r.flows) {
    CHECK(f.counters.generated > 100000);
    CHECK(f.counters.delivered > 0.9 * static_cast<double>(f.counters.generated));
  }
  CHECK(r.dominant_mcs() == 13);
  CHECK(r.collisions > 0);
  REQUIRE(!txs.empty());
  for (const auto& t : txs) {
    CHECK(t.end - t.start <= microseconds(5484));
    CHECK(t.mpdus <= 1024);
    CHECK(t.delivered + t.failed + t.interrupted == t.mpdus);
    if (t.interferers.empty()) CHECK(t.mcs == 13);
  }
}

TEST_CASE("isolated link adaptation matches the link budget") {
  Network net(short_run("case-study-mlo", 1));
  const int ap1 = net.device_index("ap1");
  const int sta1 = net.device_index("sta1");
  const int ap2 = net.device_index("ap2");
  const int sta2 = net.device_index("sta2");
  CHECK(net.static_sinr_db(ap1, sta1, 0) == doctest::Approx(48.99).epsilon(0.002));
  CHECK(net.static_mcs(ap2, sta2, 1)->index == 13);
  // Both BSSs contend with each other on every link.
  CHECK(net.domain().edge(0, ap1, ap2));
  CHECK(net.domain().edge(1, sta1, ap2));
}

TEST_CASE("CBF runs both BSSs concurrently with registered suppression") {
  std::map<int, int> mcs_count;
  int concurrent = 0;
  RunOptions o;
  o.on_tx = [&](const TxOutcome& t) {
    ++mcs_count[t.mcs];
    if (!t.interferers.empty()) {
      ++concurrent;
      for (double s : t.suppression_db) CHECK(s == 30.0);
    }
  };
  Network net(short_run("case-study-cbf", 5), o);
  CHECK_FALSE(net.domain().edge(0, net.device_index("ap1"), net.device_index("ap2")));
  CHECK(net.domain().suppression_db(0, net.device_index("ap2"), net.device_index("sta1")) == 30.0);
  const auto r = net.run();
  check_clean(r);
  CHECK(concurrent > 0);
  CHECK(r.concurrent_overlaps > 0);
  CHECK(r.collisions == 0);
  CHECK(r.dominant_mcs() == 13);
}

TEST_CASE("nulling depth orders SINR and MCS") {
  double prev_sinr = -1e9;
  int prev_mcs = -1;
  for (double n : {0.0, 10.0, 20.0, 30.0, 40.0}) {
    auto c = short_run("case-study-cbf", 1);
    c.nulling_db = n;
    Network net(c);
    const int ap1 = net.device_index("ap1");
    const int sta1 = net.device_index("sta1");
    const double s = net.static_sinr_db(ap1, sta1, 0);
    const auto m = net.static_mcs(ap1, sta1, 0);
    CHECK(s > prev_sinr);
    REQUIRE(m);
    CHECK(m->index >= prev_mcs);
    prev_sinr = s;
    prev_mcs = m->index;
  }
  auto c = short_run("case-study-cbf", 1);
  c.nulling_db = 10;
  CHECK(Network(c).static_mcs(0, 2, 0)->index == 4);
  c.nulling_db = 20;
  CHECK(Network(c).static_mcs(0, 2, 0)->index == 9);
}

TEST_CASE("single-radio EMLSR never transmits on two links at once") {
  auto c = short_run("case-study-mlo", 3);
  c.default_mode = MloMode::Emlsr;
  c.switch_delay_us = 64;
  std::map<int, std::vector<std::pair<SimTime, SimTime>>> by_dev;
  RunOptions o;
  o.on_tx = [&](const TxOutcome& t) { by_dev[t.device].push_back({t.start, t.end}); };
  const auto r = Network(c, o).run();
  check_clean(r);
  for (auto& [d, v] : by_dev) {
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i].first >= v[i - 1].second);
  }
}

TEST_CASE("MLSR uses only its first link") {
  auto c = short_run("case-study-mlo", 2);
  c.default_mode = MloMode::Mlsr;
  bool other = false;
  RunOptions o;
  o.on_tx = [&](const TxOutcome& t) { other = other || t.link != 0; };
  check_clean(Network(c, o).run());
  CHECK_FALSE(other);
}

TEST_CASE("coordinated TDMA and OFDMA runs") {
  for (auto s : {CoordScheme::Ctdma, CoordScheme::Cofdma}) {
    auto c = short_run("case-study-mlo", 3);
    c.scheme = s;
    int grouped = 0, subch = 0;
    RunOptions o;
    o.on_tx = [&](const TxOutcome& t) {
      if (t.group >= 0) ++grouped;
      if (t.subchannel >= 0) ++subch;
      CHECK(t.end - t.start <= microseconds(5484));
    };
    const auto r = Network(c, o).run();
    check_clean(r);
    CHECK(grouped > 0);
    if (s == CoordScheme::Cofdma) {
      CHECK(subch > 0);
      CHECK(r.concurrent_overlaps > 0);
    } else {
      CHECK(r.concurrent_overlaps == 0);
    }
    CHECK(r.collisions == 0);
  }
}

TEST_CASE("R-TWT service periods carry member traffic only") {
  auto c = short_run("case-study-mlo", 3);
  c.flows[0].model = TrafficModel::Cbr;
  c.flows[0].rate_mbps = 12;
  c.flows[0].cls = TrafficClass::TimeSensitive;
  c.rtwt.push_back({"ap1", 0, 1000, 10000, {"f1"}, {}});
  int member_tx = 0;
  RunOptions o;
  o.on_tx = [&](const TxOutcome& t) {
    const auto phase = t.start.ns() % 10000000;
    const bool in_sp = phase < 1000000;
    if (t.sp_member) {
      ++member_tx;
      CHECK(t.device == 0);
      CHECK(t.end.ns() % 10000000 <= 1000000);
    } else if (in_sp) {
      FAIL("non-member transmission started inside the SP");
    }
  };
  const auto r = Network(c, o).run();
  check_clean(r);
  CHECK(member_tx > 0);
  CHECK(r.flows[0].delays.quantile(0.99).value < milliseconds(10));
}

TEST_CASE("preemption inserts urgent traffic within 57.6 us") {
  auto c = short_run("case-study-mlo", 3);
  c.preemption = true;
  FlowConfig ts;
  ts.name = "ts1";
  ts.src = "ap1";
  ts.dst = "sta1";
  ts.model = TrafficModel::Poisson;
  ts.rate_mbps = 6;
  ts.packet_bytes = 200;
  ts.cls = TrafficClass::TimeSensitive;
  c.flows.push_back(ts);
  std::vector<PreemptionRecord> recs;
  RunOptions o;
  o.on_preempt = [&](const PreemptionRecord& p) { recs.push_back(p); };
  const auto r = Network(c, o).run();
  check_clean(r);
  int cut = 0, after_ba = 0;
  for (const auto& p : recs) {
    if (p.kind == PreemptionKind::Truncated) {
      ++cut;
      CHECK(p.insertion_latency <= nanoseconds(57600));
    } else if (p.kind == PreemptionKind::AfterBlockAck) {
      // Arrived in the SIFS/BlockAck gap: remaining gap + SIFS + preamble.
      ++after_ba;
      CHECK(p.insertion_latency <= microseconds(16 + 32 + 16 + 44));
    }
  }
  CHECK(cut > 0);
  CHECK(r.preemptions == static_cast<std::uint64_t>(cut + after_ba));
  CHECK(r.max_insertion_latency <= nanoseconds(57600));
}

TEST_CASE("traces are reproducible") {
  auto trace_of = [](std::uint64_t seed) {
    std::ostringstream os;
    RunOptions o;
    o.trace = &os;
    Network(short_run("case-study-cbf", 0.2, seed), o).run();
    return os.str();
  };
  const auto a = trace_of(4);
  CHECK(!a.empty());
  CHECK(a == trace_of(4));
  CHECK(a != trace_of(5));
}

TEST_CASE("infeasible setups are configuration errors") {
  auto c = short_run("case-study-cbf", 1);
  c.aps[1].antennas = 2;
  CHECK_THROWS_AS(Network{c}, ConfigError);
  c = short_run("case-study-mlo", 1);
  c.stas[0].pos = Position{5, 5000};
  CHECK_THROWS_AS(Network{c}, ConfigError);
}
