#include <vector>

#include "doctest.h"
#include "uhrsim/coordination.hpp"
#include "uhrsim/errors.hpp"
#include "uhrsim/phy.hpp"

using namespace uhrsim;

namespace {

CoordCandidate ap(int id, int antennas = 4, int streams = 2, int nulls = 2) {
  CoordCandidate c;
  c.device = id;
  c.name = "ap" + std::to_string(id + 1);
  c.antennas = antennas;
  c.streams = streams;
  c.null_directions = nulls;
  return c;
}

CoordParams params(double nulling) {
  CoordParams p;
  p.nulling_db = nulling;
  return p;
}

// Devices: 0 ap1, 1 ap2, 2 sta1, 3 sta2, 4 ap3, 5 sta3. Everyone hears everyone.
ContentionDomain full(int links) {
  ContentionDomain d(links, 6);
  for (int l = 0; l < links; ++l)
    for (int a = 0; a < 6; ++a)
      for (int b = a + 1; b < 6; ++b) d.set_edge(l, a, b, true);
  return d;
}

const std::vector<int> kBss{0, 1, 0, 1, 4, 4};

}  // namespace

TEST_CASE("null budget truth table") {
  CHECK(null_budget_check(4, 2, 2));
  CHECK_FALSE(null_budget_check(4, 2, 3));
  CHECK(null_budget_check(16, 8, 8));
  CHECK_FALSE(null_budget_check(2, 2, 1));
  CHECK(null_budget_check(2, 2, 0));
  CHECK(null_budget_check(0, 0, 0));
  CHECK_FALSE(null_budget_check(0, 1, 0));
  for (int a = 0; a <= 16; ++a)
    for (int s = 0; s <= 16; ++s)
      for (int n = 0; n <= 16; ++n) CHECK(null_budget_check(a, s, n) == (a >= s + n));
}

TEST_CASE("case-study CBF set is valid") {
  const auto set = form_set({ap(1), ap(0)}, CoordScheme::Cbf, params(30));
  CHECK(set.members == std::vector<int>{0, 1});
  CHECK(set.nulling_db == 30.0);
  CHECK(set.contains(1));
  CHECK_FALSE(set.contains(2));
  CHECK(set.rank(1) == 1);
  CHECK(set.rank(7) == -1);
}

TEST_CASE("set formation errors") {
  CHECK_THROWS_AS(form_set({ap(0)}, CoordScheme::Ctdma, params(0)), ConfigError);
  try {
    form_set({ap(0), ap(1, 2, 2, 2)}, CoordScheme::Cbf, params(20));
    FAIL("expected a budget error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ap2") != std::string::npos);
  }
  CHECK_NOTHROW(form_set({ap(0), ap(1, 2, 2, 2)}, CoordScheme::Ctdma, params(0)));
  CHECK_THROWS_AS(form_set({ap(0), ap(1)}, CoordScheme::Cbf, params(-1)), ConfigError);
  auto foreign = ap(1);
  foreign.same_domain = false;
  CHECK_THROWS_AS(form_set({ap(0), foreign}, CoordScheme::Cofdma, params(0)), ConfigError);
}

TEST_CASE("CBF rewrite drops cross-BSS edges and registers suppression") {
  const auto base = full(2);
  const auto set = form_set({ap(0), ap(1)}, CoordScheme::Cbf, params(30));
  const auto out = rewrite_contention(base, set, kBss);
  for (int l = 0; l < 2; ++l) {
    CHECK_FALSE(out.edge(l, 0, 1));
    CHECK_FALSE(out.edge(l, 0, 3));
    CHECK_FALSE(out.edge(l, 2, 1));
    CHECK(out.edge(l, 0, 2));  // own BSS
    CHECK(out.edge(l, 1, 3));
    CHECK(out.suppression_db(l, 1, 2) == 30.0);
    CHECK(out.suppression_db(l, 0, 3) == 30.0);
    CHECK(out.suppression_db(l, 0, 2) == 0.0);
    // The uncoordinated third BSS is untouched.
    for (int d = 0; d < 4; ++d) {
      CHECK(out.edge(l, 4, d));
      CHECK(out.edge(l, 5, d));
      CHECK(out.suppression_db(l, 4, d) == 0.0);
    }
  }
  // Symmetric.
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) CHECK(out.edge(0, a, b) == out.edge(0, b, a));
}

TEST_CASE("other schemes leave the domain unchanged") {
  const auto base = full(2);
  for (auto s : {CoordScheme::Ctdma, CoordScheme::Cofdma}) {
    const auto set = form_set({ap(0), ap(1)}, s, params(0));
    CHECK(rewrite_contention(base, set, kBss) == base);
  }
  CHECK(rewrite_contention(base, CoordinationSet{}, kBss) == base);
}

TEST_CASE("contention domain bookkeeping") {
  ContentionDomain d(1, 3);
  d.set_edge(0, 0, 2, true);
  CHECK(d.edge(0, 2, 0));
  CHECK(d.neighbors(0, 0) == std::vector<int>{2});
  CHECK(d.neighbors(0, 1).empty());
  CHECK_THROWS(d.set_suppression(0, 0, 1, -3.0));
  CHECK_THROWS(d.edge(1, 0, 0));
}

TEST_CASE("C-TDMA slot arithmetic") {
  const auto two = ctdma_slots(microseconds(5484), {0, 1}, microseconds(16));
  REQUIRE(two.size() == 2);
  CHECK(two[0].duration == microseconds(2734));
  CHECK(two[1].duration == microseconds(2734));
  CHECK(two[0].offset == SimTime{});
  CHECK(two[1].offset == microseconds(2750));
  CHECK(two[1].offset + two[1].duration == microseconds(5484));

  const auto three = ctdma_slots(microseconds(5484), {4, 0, 1}, microseconds(16));
  REQUIRE(three.size() == 3);
  CHECK(three[0].duration.us() == doctest::Approx(1817.3).epsilon(1e-4));
  CHECK(three[0].member == 4);
  for (std::size_t i = 1; i < three.size(); ++i) {
    CHECK(three[i].offset == three[i - 1].offset + three[i - 1].duration + microseconds(16));
  }
  CHECK(three.back().offset + three.back().duration <= microseconds(5484));
  CHECK_THROWS_AS(ctdma_slots(microseconds(5484), {0}, microseconds(16)), std::invalid_argument);
}

TEST_CASE("C-OFDMA split") {
  CHECK(cofdma_split(160, 2) == std::vector<int>{80, 80});
  CHECK(cofdma_split(320, 2) == std::vector<int>{160, 160});
  CHECK(cofdma_split(160, 4) == std::vector<int>{40, 40, 40, 40});
  CHECK_THROWS_AS(cofdma_split(160, 3), ConfigError);
  CHECK_THROWS_AS(cofdma_split(20, 2), ConfigError);
  CHECK(data_subcarriers_for(cofdma_split(160, 2)[0]) == 980);
}

TEST_CASE("scheme names round-trip") {
  for (auto s : {CoordScheme::None, CoordScheme::Ctdma, CoordScheme::Cofdma, CoordScheme::Cbf}) {
    CHECK(parse_coord_scheme(to_string(s)) == s);
  }
  CHECK_FALSE(parse_coord_scheme("jt"));
}
