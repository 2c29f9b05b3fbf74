#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "uhrsim/rng.hpp"
#include "uhrsim/stats.hpp"

using namespace uhrsim;

namespace {

// Order-statistic oracle: rank ceil(q n), 1-based.
std::int64_t sorted_quantile(std::vector<std::int64_t> v, double q) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::max<std::size_t>(rank, 1);
  return v[rank - 1];
}

AuditRules all_contend() {
  AuditRules r;
  r.contend = [](int, int, int) { return true; };
  r.single_radio = [](int d) { return d == 7; };
  return r;
}

BusyInterval iv(int link, int dev, std::int64_t start_us, std::int64_t end_us, int mpdus = 10) {
  BusyInterval b;
  b.link = link;
  b.device = dev;
  b.start = microseconds(start_us);
  b.end = microseconds(end_us);
  b.mpdus = mpdus;
  return b;
}

}  // namespace

TEST_CASE("histogram edges are geometric integers") {
  const auto& e = LogHistogram::edges();
  REQUIRE(e.size() == LogHistogram::kLogBins + 1);
  CHECK(e.front() == 1000);
  CHECK(e.back() >= 100000000000LL);
  for (std::size_t k = 1; k < e.size(); ++k) {
    CHECK(e[k] > e[k - 1]);
    CHECK(static_cast<double>(e[k]) == doctest::Approx(std::ceil(1000.0 * std::pow(1.008, k))).epsilon(1e-12));
  }
}

TEST_CASE("bin_of agrees with a linear scan") {
  const auto& e = LogHistogram::edges();
  auto scan = [&](std::int64_t ns) {
    if (ns < e.front()) return LogHistogram::kUnderflow;
    for (std::size_t k = 1; k < e.size(); ++k)
      if (ns < e[k]) return static_cast<int>(k);
    return LogHistogram::kOverflow;
  };
  RngStream rng(3, "test.bins");
  for (int i = 0; i < 20000; ++i) {
    const auto ns = static_cast<std::int64_t>(std::exp(rng.uniform01() * 27.0));
    CHECK(LogHistogram::bin_of(ns) == scan(ns));
  }
  for (std::size_t k = 0; k < e.size(); ++k) {
    CHECK(LogHistogram::bin_of(e[k]) == scan(e[k]));
    CHECK(LogHistogram::bin_of(e[k] - 1) == scan(e[k] - 1));
  }
  CHECK(LogHistogram::bin_of(0) == LogHistogram::kUnderflow);
  CHECK(LogHistogram::upper_edge(LogHistogram::kOverflow) == -1);
}

TEST_CASE("exact quantiles equal the sort oracle") {
  RngStream rng(5, "test.exact");
  DelayAccumulator acc;
  std::vector<std::int64_t> xs;
  for (int i = 0; i < 50000; ++i) {
    const auto ns = static_cast<std::int64_t>(rng.exponential(2e6));
    xs.push_back(ns);
    acc.record(nanoseconds(ns));
  }
  for (double q : {0.01, 0.5, 0.9, 0.99, 0.999}) {
    const auto r = acc.quantile(q);
    CHECK(r.exact);
    CHECK(r.value.ns() == sorted_quantile(xs, q));
  }
}

TEST_CASE("histogram quantiles within 1% of the sort oracle") {
  RngStream rng(6, "test.hist");
  DelayAccumulator acc(100);  // forces histogram mode
  std::vector<std::int64_t> xs;
  for (int i = 0; i < 300000; ++i) {
    // Mixture spanning microseconds to a second.
    const double u = rng.uniform01();
    const double ns = u < 0.7 ? rng.exponential(5e5) + 2000 : rng.exponential(3e7) + 2000;
    xs.push_back(static_cast<std::int64_t>(ns));
    acc.record(nanoseconds(xs.back()));
  }
  CHECK_FALSE(acc.exact_available());
  for (double q : {0.1, 0.5, 0.9, 0.99, 0.999, 0.9999}) {
    const auto r = acc.quantile(q);
    CHECK_FALSE(r.exact);
    const double ref = static_cast<double>(sorted_quantile(xs, q));
    CHECK(std::fabs(static_cast<double>(r.value.ns()) - ref) <= 0.01 * ref);
    CHECK(r.value.ns() >= static_cast<std::int64_t>(ref));  // upper edge never underestimates
  }
}

TEST_CASE("tail quantile flags too few samples") {
  CHECK(min_samples_for(0.999999) == 1000000);
  CHECK(min_samples_for(0.99) == 100);
  CHECK(min_samples_for(0.5) == 2);
  DelayAccumulator acc;
  for (int i = 0; i < 999999; ++i) acc.record(microseconds(1 + i % 100));
  CHECK_FALSE(acc.quantile(0.999999).sufficient);
  acc.record(microseconds(5));
  CHECK(acc.quantile(0.999999).sufficient);
  CHECK(quantile_rank(0.999999, 1000000) == 999999);
  CHECK(quantile_rank(0.5, 3) == 2);
  CHECK_THROWS_AS(acc.quantile(1.0), std::invalid_argument);
  CHECK_THROWS_AS(acc.quantile(0.0), std::invalid_argument);
}

TEST_CASE("merging matches recording into one accumulator") {
  RngStream rng(7, "test.merge");
  DelayAccumulator a, b, all;
  for (int i = 0; i < 20000; ++i) {
    const auto d = nanoseconds(static_cast<std::int64_t>(rng.exponential(1e6)));
    (i % 3 ? a : b).record(d);
    all.record(d);
  }
  DelayAccumulator m;
  m.merge(a);
  m.merge(b);
  CHECK(m.count() == all.count());
  CHECK(m.max() == all.max());
  CHECK(m.mean_us() == doctest::Approx(all.mean_us()));
  for (double q : {0.5, 0.99, 0.9999}) CHECK(m.quantile(q).value == all.quantile(q).value);
  CHECK(m.histogram().counts() == all.histogram().counts());
}

TEST_CASE("negative delays are rejected") {
  DelayAccumulator acc;
  CHECK_THROWS_AS(acc.record(nanoseconds(-1)), std::invalid_argument);
}

TEST_CASE("CCDF decreases from one to zero") {
  DelayAccumulator acc;
  for (int i = 1; i <= 1000; ++i) acc.record(microseconds(i));
  const auto c = acc.ccdf();
  REQUIRE(!c.empty());
  for (std::size_t i = 1; i < c.size(); ++i) {
    CHECK(c[i].delay_us > c[i - 1].delay_us);
    CHECK(c[i].ccdf <= c[i - 1].ccdf);
  }
  CHECK(c.back().ccdf == 0.0);
  CHECK(c.front().ccdf < 1.0);
  const std::string csv = format_ccdf(acc);
  CHECK(csv.rfind("delay_us,ccdf\n", 0) == 0);
}

TEST_CASE("conservation identity") {
  ConservationRow ok{"f1", {100, 80, 5, 1}, 10, 4};
  CHECK(ok.imbalance() == 0);
  CHECK_NOTHROW(check_conservation({ok}));
  ConservationRow bad{"f2", {100, 80, 5, 1}, 10, 3};
  CHECK(bad.imbalance() == 1);
  try {
    check_conservation({ok, bad});
    FAIL("expected AuditFailure");
  } catch (const AuditFailure& e) {
    CHECK(std::string(e.what()).find("f2") != std::string::npos);
  }
}

TEST_CASE("auditor accepts serial airtime and counts equal-start collisions") {
  AirtimeAuditor a(2, all_contend());
  a.open(iv(0, 0, 0, 100));
  a.open(iv(0, 1, 100, 200));
  a.open(iv(0, 2, 300, 400));
  a.open(iv(0, 3, 300, 350));
  a.open(iv(1, 0, 300, 350));  // another link
  a.finish();
  CHECK(a.violation_count() == 0);
  CHECK(a.collisions() == 1);
  CHECK(a.intervals() == 5);
  CHECK(a.busy_time(0) == microseconds(300));
  CHECK(a.busy_time(1) == microseconds(50));
}

TEST_CASE("auditor flags every rule") {
  AuditRules r = all_contend();
  RtwtCalendar cal;
  RtwtSp sp;
  sp.owner = 5;
  sp.start = microseconds(10000);
  sp.duration = microseconds(1000);
  sp.period = microseconds(100000);
  cal.schedule(sp);
  r.calendar = &cal;
  AirtimeAuditor a(1, r);
  a.open(iv(0, 0, 0, 100));
  a.open(iv(0, 1, 50, 150));        // mutual exclusion
  a.open(iv(0, 1, 200, 300));
  a.open(iv(0, 1, 250, 260));       // self overlap
  a.open(iv(0, 2, 400, 6000));      // txop limit
  a.open(iv(0, -1, 7000, 7001));    // untagged
  a.open(iv(0, 3, 8000, 8010, 2000));  // aggregation
  a.open(iv(0, 4, 9990, 10010));    // crosses the SP start
  auto member = iv(0, 5, 10100, 10200);
  member.sp_member = true;
  a.open(member);                   // allowed
  auto g1 = iv(0, 6, 20000, 21000);
  g1.group = 1;
  auto g2 = iv(0, 8, 20500, 21000);
  g2.group = 1;
  a.open(g1);
  a.open(g2);                       // same group, whole channel
  const auto& k = a.violations_by_kind();
  CHECK(k.at("mutual-exclusion") == 1);
  CHECK(k.at("self-overlap") == 1);
  CHECK(k.at("txop-limit") == 1);
  CHECK(k.at("untagged") == 1);
  CHECK(k.at("aggregation") == 1);
  CHECK(k.at("rtwt-nonmember") == 1);
  CHECK(k.at("coordinated-overlap") == 1);
  CHECK(a.violation_count() == 7);
  CHECK(!a.first_violations().empty());
}

TEST_CASE("auditor single-radio and subchannel rules") {
  AirtimeAuditor a(2, all_contend());
  a.open(iv(0, 7, 0, 100));
  a.open(iv(1, 7, 50, 80));   // device 7 is single-radio
  a.open(iv(1, 9, 200, 300));
  auto s0 = iv(0, 1, 400, 500);
  s0.group = 2;
  s0.subchannel = 0;
  auto s1 = iv(0, 2, 400, 500);
  s1.group = 2;
  s1.subchannel = 1;
  a.open(s0);
  a.open(s1);
  CHECK(a.violations_by_kind().at("single-radio") == 1);
  CHECK(a.violation_count() == 1);
  CHECK(a.concurrent_overlaps() == 1);
}

TEST_CASE("tail of a preempted TXOP keeps its collision status") {
  AirtimeAuditor a(1, all_contend());
  a.open(iv(0, 0, 0, 2000));
  const auto id = a.open(iv(0, 1, 0, 3000));
  a.amend_end(id, microseconds(500));
  auto tail = iv(0, 1, 500, 620);
  tail.txop_start = SimTime{};
  a.open(tail);
  CHECK(a.violation_count() == 0);
  CHECK(a.collisions() == 2);
  auto late = iv(0, 2, 700, 800);
  late.txop_start = microseconds(600);
  a.open(late);
  CHECK(a.violations_by_kind().at("mutual-exclusion") == 1);
  auto long_tail = iv(0, 3, 5000, 5600);
  long_tail.txop_start = SimTime{};
  a.open(long_tail);
  CHECK(a.violations_by_kind().at("txop-limit") == 1);
}

TEST_CASE("non-contending overlap is concurrent reuse") {
  AuditRules r;
  r.contend = [](int, int a, int b) { return a / 2 == b / 2; };  // {0,1} and {2,3} hear each other
  AirtimeAuditor a(1, r);
  a.open(iv(0, 0, 0, 100));
  a.open(iv(0, 2, 10, 90));
  CHECK(a.violation_count() == 0);
  CHECK(a.concurrent_overlaps() == 1);
}

TEST_CASE("amended intervals stop conflicting") {
  AirtimeAuditor a(1, all_contend());
  const auto id = a.open(iv(0, 0, 0, 1000));
  a.amend_end(id, microseconds(300));
  a.open(iv(0, 1, 400, 500));
  a.finish();
  CHECK(a.violation_count() == 0);
  CHECK(a.busy_time(0) == microseconds(400));
  CHECK_THROWS_AS(a.open(iv(0, 1, 10, 20)), std::logic_error);
}

TEST_CASE("summary and CCDF files") {
  RunResults r;
  r.scenario = "demo";
  r.seed = 3;
  r.duration = seconds(1);
  FlowResult f;
  f.name = "f1";
  f.src = "ap1";
  f.dst = "sta1";
  for (int i = 1; i <= 100; ++i) f.delays.record(microseconds(i));
  f.counters.generated = 100;
  f.counters.delivered = 100;
  r.all.merge(f.delays);
  r.flows.push_back(f);
  r.link_utilization = {0.5};
  r.mcs_txops = {{13, 7}, {9, 7}, {4, 1}};
  CHECK(r.dominant_mcs() == 9);
  const std::string s = format_summary(r);
  CHECK(s.find("flow=f1 delivered=100 p50_us=50.000 p99_us=99.000 p999999_us=100.000 p999999_sufficient=0") !=
        std::string::npos);
  CHECK(s.find("link=0 utilization=0.500000") != std::string::npos);
  CHECK(s.find("mcs=13 txops=7") != std::string::npos);
  const auto dir = std::filesystem::temp_directory_path() / "uhrsim_stats_test";
  std::filesystem::remove_all(dir);
  export_results(r, dir);
  CHECK(std::filesystem::exists(dir / "summary.txt"));
  std::ifstream in(dir / "ccdf_f1.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "delay_us,ccdf");
  std::filesystem::remove_all(dir);
}
