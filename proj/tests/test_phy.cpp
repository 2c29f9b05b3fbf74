#include <cmath>
#include <vector>

#include "doctest.h"
#include "uhrsim/phy.hpp"

using namespace uhrsim;

namespace {

const Position kAp1{5, 10}, kAp2{10, 10}, kSta1{5, 12.5}, kSta2{10, 12.5};

// Hand-evaluated link budget of the case-study geometry.
double ref_pl(double d) {
  double pl = 40.05 + 20 * std::log10(6.0 / 2.4) + 20 * std::log10(std::min(d, 5.0));
  if (d > 5.0) pl += 35 * std::log10(d / 5.0);
  return pl;
}

double ref_sinr(double nulling_db, bool interferer) {
  const double noise_mw = std::pow(10.0, (-174.0 + 10 * std::log10(160e6) + 7.0) / 10.0);
  const double sig = 20.0 - ref_pl(2.5);
  double i_mw = 0.0;
  if (interferer) i_mw = std::pow(10.0, (20.0 - ref_pl(std::sqrt(25.0 + 6.25)) - nulling_db) / 10.0);
  return sig - 10 * std::log10(noise_mw + i_mw);
}

double case_sinr(double nulling_db, bool interferer) {
  std::vector<Interferer> ints;
  if (interferer) ints.push_back({20.0 - path_loss_db(kAp2, kSta1, 6.0), nulling_db});
  return sinr_db(20.0 - path_loss_db(kAp1, kSta1, 6.0), ints, noise_floor_dbm(160, 7.0));
}

}  // namespace

TEST_CASE("path loss of the case-study geometry") {
  CHECK(path_loss_db(kAp1, kSta1, 6.0) == doctest::Approx(ref_pl(2.5)).epsilon(1e-12));
  CHECK(path_loss_db(kAp1, kSta1, 6.0) == doctest::Approx(55.97).epsilon(1e-4));
  CHECK(path_loss_db(kAp1, kAp2, 6.0) == doctest::Approx(61.99).epsilon(1e-4));
  CHECK(path_loss_db(kAp2, kSta1, 6.0) == doctest::Approx(63.68).epsilon(1e-4));
  CHECK(path_loss_db(kAp2, kSta1, 6.0) == path_loss_db(kSta1, kAp2, 6.0));
}

TEST_CASE("path loss rejects co-located devices and bad frequencies") {
  CHECK_THROWS_AS(path_loss_db(kAp1, kAp1, 6.0), std::invalid_argument);
  CHECK_THROWS_AS(path_loss_db(kAp1, kAp2, 0.0), std::invalid_argument);
}

TEST_CASE("path loss grows with distance") {
  double prev = 0.0;
  for (double d = 0.5; d < 60.0; d += 0.5) {
    const double pl = path_loss_db({0, 0}, {d, 0}, 6.0);
    CHECK(pl > prev);
    prev = pl;
  }
}

TEST_CASE("noise floor over 160 MHz") {
  CHECK(noise_floor_dbm(160, 7.0) == doctest::Approx(-84.959).epsilon(1e-4));
  CHECK(noise_floor_dbm(80, 7.0) == doctest::Approx(noise_floor_dbm(160, 7.0) - 10 * std::log10(2.0)));
}

TEST_CASE("case-study SINR operating points") {
  CHECK(case_sinr(0, false) == doctest::Approx(ref_sinr(0, false)).epsilon(1e-12));
  CHECK(std::fabs(case_sinr(0, false) - 48.99) < 0.1);
  CHECK(std::fabs(case_sinr(30, true) - 37.4) < 0.1);
  CHECK(std::fabs(case_sinr(20, true) - 27.7) < 0.1);
  CHECK(std::fabs(case_sinr(10, true) - 17.7) < 0.1);
  for (double n : {10.0, 20.0, 30.0}) CHECK(case_sinr(n, true) == doctest::Approx(ref_sinr(n, true)).epsilon(1e-12));
  // Un-nulled collision.
  CHECK(case_sinr(0, true) == doctest::Approx(ref_sinr(0, true)).epsilon(1e-12));
  CHECK(std::fabs(case_sinr(0, true) - 7.7) < 0.1);
}

TEST_CASE("operating points map to MCS 13/13/9/4") {
  const auto t = default_mcs_table();
  CHECK(select_mcs(case_sinr(0, false), t)->index == 13);
  CHECK(select_mcs(case_sinr(30, true), t)->index == 13);
  CHECK(select_mcs(case_sinr(20, true), t)->index == 9);
  CHECK(select_mcs(case_sinr(10, true), t)->index == 4);
  CHECK(select_mcs(case_sinr(0, true), t)->index == 1);
  const McsEntry m4 = *select_mcs(case_sinr(10, true), t);
  CHECK(m4.bits_per_symbol == 4);
  CHECK(m4.rate == CodingRate{3, 4});
  const McsEntry m13 = *select_mcs(case_sinr(30, true), t);
  CHECK(m13.bits_per_symbol == 12);
  CHECK(m13.rate == CodingRate{5, 6});
}

TEST_CASE("select_mcs edges") {
  const auto t = default_mcs_table();
  CHECK_FALSE(select_mcs(1.99, t));
  CHECK(select_mcs(2.0, t)->index == 0);
  CHECK(select_mcs(36.99, t)->index == 12);
  CHECK(select_mcs(37.0, t)->index == 13);
  CHECK(select_mcs(1000.0, t)->index == 13);
}

TEST_CASE("select_mcs is monotone in SINR under random inputs") {
  RngStream rng(21, "test.mcs");
  const auto t = default_mcs_table();
  for (int i = 0; i < 20000; ++i) {
    const double a = -10.0 + 60.0 * rng.uniform01();
    const double b = a + 10.0 * rng.uniform01();
    const auto ma = select_mcs(a, t);
    const auto mb = select_mcs(b, t);
    if (ma) {
      REQUIRE(mb);
      CHECK(mb->index >= ma->index);
      CHECK(ma->min_sinr_db <= a);
    }
    if (mb && mb->index + 1 < static_cast<int>(t.size())) CHECK(t[mb->index + 1].min_sinr_db > b);
  }
}

TEST_CASE("sinr_db is monotone in suppression under random inputs") {
  RngStream rng(22, "test.sinr");
  for (int i = 0; i < 20000; ++i) {
    std::vector<Interferer> ints;
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 3));
    for (int k = 0; k < n; ++k) ints.push_back({-90.0 + 60.0 * rng.uniform01(), 40.0 * rng.uniform01()});
    const double sig = -80.0 + 60.0 * rng.uniform01();
    const double noise = -95.0 + 15.0 * rng.uniform01();
    const double base = sinr_db(sig, ints, noise);
    auto more = ints;
    more[rng.uniform_int(0, static_cast<std::uint64_t>(n - 1))].suppression_db += 0.01 + 10.0 * rng.uniform01();
    CHECK(sinr_db(sig, more, noise) > base);
    CHECK(base <= sig - noise + 1e-9);
  }
  std::vector<Interferer> neg{{-50.0, -1.0}};
  CHECK_THROWS_AS(sinr_db(-40.0, neg, -90.0), std::invalid_argument);
}

TEST_CASE("PHY rates to four significant figures") {
  const PhyConfig p;
  const auto t = default_mcs_table();
  CHECK(std::round(phy_rate_bps(t[13], p, 2) / 1e4) / 100 == doctest::Approx(2882.35));
  CHECK(std::round(phy_rate_bps(t[4], p, 2) / 1e4) / 100 == doctest::Approx(864.71));
  CHECK(std::round(phy_rate_bps(t[0], p, 1) / 1e4) / 100 == doctest::Approx(72.06));
  CHECK_THROWS_AS(phy_rate_bps(t[0], p, 0), std::invalid_argument);
}

TEST_CASE("PPDU airtime rounds payload up to whole symbols") {
  const PhyConfig p;
  const double r13 = phy_rate_bps(default_mcs_table()[13], p, 2);
  // 1024 x 12000 bits over 39200 bits per symbol: 313.47 -> 314 symbols.
  CHECK(payload_symbols(1024 * 12000.0, r13, p) == 314);
  CHECK(ppdu_airtime(1024, 1500, r13, p) == nanoseconds(44000 + 314 * 13600));
  CHECK(ppdu_airtime(1, 4900, r13, p) == nanoseconds(44000 + 13600));  // exactly one symbol
  CHECK(ppdu_airtime(1, 4901, r13, p) == nanoseconds(44000 + 2 * 13600));
  CHECK_THROWS_AS(ppdu_airtime(0, 1500, r13, p), std::invalid_argument);
}

TEST_CASE("subchannel PHY halves the rate") {
  const PhyConfig p;
  const PhyConfig h = p.with_bandwidth(80);
  CHECK(h.data_subcarriers == 980);
  const auto m = default_mcs_table()[9];
  CHECK(phy_rate_bps(m, h, 2) == doctest::Approx(phy_rate_bps(m, p, 2) / 2));
  CHECK_THROWS_AS(p.with_bandwidth(100), std::invalid_argument);
}

TEST_CASE("MCS table validation") {
  CHECK_NOTHROW(validate_mcs_table(default_mcs_table()));
  auto t = default_mcs_table();
  t[5].min_sinr_db = 10.0;
  CHECK_THROWS_AS(validate_mcs_table(t), std::invalid_argument);
  t = default_mcs_table();
  t[3].index = 7;
  CHECK_THROWS_AS(validate_mcs_table(t), std::invalid_argument);
  CHECK_THROWS_AS(validate_mcs_table({}), std::invalid_argument);
}

TEST_CASE("empirical PER over four million trials") {
  RngStream rng(1, "per.test");
  constexpr int kTrials = 4000000;
  int lost = 0;
  for (int i = 0; i < kTrials; ++i) lost += mpdu_error_trial(0.10, rng) ? 1 : 0;
  const double per = static_cast<double>(lost) / kTrials;
  CHECK(std::fabs(per - 0.100) <= 0.001);
  CHECK_THROWS_AS(mpdu_error_trial(1.0, rng), std::invalid_argument);
  CHECK_FALSE(mpdu_error_trial(0.0, rng));
}
