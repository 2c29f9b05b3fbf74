#include "uhrsim/phy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uhrsim {

double distance_m(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

double path_loss_db(Position tx, Position rx, double freq_ghz) {
  if (!(freq_ghz > 0.0)) throw std::invalid_argument("path_loss_db: frequency must be positive");
  const double d = distance_m(tx, rx);
  if (!(d > 0.0)) throw std::invalid_argument("path_loss_db: transmitter and receiver co-located");
  constexpr double kBreakpoint = 5.0;
  double pl = 40.05 + 20.0 * std::log10(freq_ghz / 2.4) + 20.0 * std::log10(std::min(d, kBreakpoint));
  if (d > kBreakpoint) pl += 35.0 * std::log10(d / kBreakpoint);
  return pl;
}

double noise_floor_dbm(double bandwidth_mhz, double noise_figure_db, double noise_density_dbm_hz) {
  if (!(bandwidth_mhz > 0.0)) throw std::invalid_argument("noise_floor_dbm: bandwidth must be positive");
  return noise_density_dbm_hz + 10.0 * std::log10(bandwidth_mhz * 1e6) + noise_figure_db;
}

double sinr_db(double signal_dbm, std::span<const Interferer> interferers, double noise_dbm) {
  double total_mw = std::pow(10.0, noise_dbm / 10.0);
  for (const auto& i : interferers) {
    if (i.suppression_db < 0.0) throw std::invalid_argument("sinr_db: negative suppression");
    total_mw += std::pow(10.0, (i.power_dbm - i.suppression_db) / 10.0);
  }
  return signal_dbm - 10.0 * std::log10(total_mw);
}

McsTable default_mcs_table() {
  return {
      {0, 1, {1, 2}, 2.0},    // BPSK 1/2
      {1, 2, {1, 2}, 5.0},    // QPSK 1/2
      {2, 2, {3, 4}, 8.0},    // QPSK 3/4
      {3, 4, {1, 2}, 11.0},   // 16-QAM 1/2
      {4, 4, {3, 4}, 14.5},   // 16-QAM 3/4
      {5, 6, {2, 3}, 18.0},   // 64-QAM 2/3
      {6, 6, {3, 4}, 19.5},   // 64-QAM 3/4
      {7, 6, {5, 6}, 21.0},   // 64-QAM 5/6
      {8, 8, {3, 4}, 24.0},   // 256-QAM 3/4
      {9, 8, {5, 6}, 27.0},   // 256-QAM 5/6
      {10, 10, {3, 4}, 30.0}, // 1024-QAM 3/4
      {11, 10, {5, 6}, 33.0}, // 1024-QAM 5/6
      {12, 12, {3, 4}, 35.0}, // 4096-QAM 3/4
      {13, 12, {5, 6}, 37.0}, // 4096-QAM 5/6
  };
}

void validate_mcs_table(const McsTable& table) {
  if (table.empty()) throw std::invalid_argument("MCS table is empty");
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& e = table[i];
    if (e.index != static_cast<int>(i)) {
      throw std::invalid_argument("MCS table row " + std::to_string(i) + " has index " +
                                  std::to_string(e.index));
    }
    if (e.bits_per_symbol < 1 || e.rate.num < 1 || e.rate.den < 1 || e.rate.num > e.rate.den) {
      throw std::invalid_argument("MCS " + std::to_string(e.index) + ": invalid modulation/rate");
    }
    if (i > 0) {
      const auto& p = table[i - 1];
      if (!(e.min_sinr_db > p.min_sinr_db)) {
        throw std::invalid_argument("MCS " + std::to_string(e.index) +
                                    ": threshold must increase with index");
      }
      if (!(e.info_bits_per_subcarrier() > p.info_bits_per_subcarrier())) {
        throw std::invalid_argument("MCS " + std::to_string(e.index) +
                                    ": bits x rate must increase with index");
      }
    }
  }
}

std::optional<McsEntry> select_mcs(double sinr, const McsTable& table) {
  std::optional<McsEntry> best;
  for (const auto& e : table) {
    if (e.min_sinr_db <= sinr) best = e;
  }
  return best;
}

bool valid_bandwidth(int bandwidth_mhz) {
  switch (bandwidth_mhz) {
    case 20:
    case 40:
    case 80:
    case 160:
    case 320:
      return true;
    default:
      return false;
  }
}

int data_subcarriers_for(int bandwidth_mhz) {
  switch (bandwidth_mhz) {
    case 20: return 234;
    case 40: return 468;
    case 80: return 980;
    case 160: return 1960;
    case 320: return 3920;
    default:
      throw std::invalid_argument("unsupported channel width " + std::to_string(bandwidth_mhz) +
                                  " MHz");
  }
}

PhyConfig PhyConfig::with_bandwidth(int bw) const {
  PhyConfig c = *this;
  c.bandwidth_mhz = bw;
  c.data_subcarriers = data_subcarriers_for(bw);
  return c;
}

double phy_rate_bps(const McsEntry& mcs, const PhyConfig& cfg, int streams) {
  if (streams < 1) throw std::invalid_argument("phy_rate_bps: streams must be >= 1");
  return cfg.data_subcarriers * mcs.info_bits_per_subcarrier() * streams / (cfg.symbol.ns() * 1e-9);
}

double bits_per_ofdm_symbol(double rate_bps, const PhyConfig& cfg) {
  return rate_bps * (cfg.symbol.ns() * 1e-9);
}

std::int64_t payload_symbols(double payload_bits, double rate_bps, const PhyConfig& cfg) {
  if (!(rate_bps > 0.0)) throw std::invalid_argument("payload_symbols: rate must be positive");
  const double bps = bits_per_ofdm_symbol(rate_bps, cfg);
  // Guard against 39199.99999-style rounding of an exact symbol count.
  return static_cast<std::int64_t>(std::ceil(payload_bits / bps - 1e-9));
}

SimTime ppdu_airtime_bits(double payload_bits, double rate_bps, const PhyConfig& cfg) {
  return cfg.preamble + cfg.symbol * payload_symbols(payload_bits, rate_bps, cfg);
}

SimTime ppdu_airtime(int n_mpdus, int mpdu_bytes, double rate_bps, const PhyConfig& cfg) {
  if (n_mpdus < 1 || mpdu_bytes < 1) {
    throw std::invalid_argument("ppdu_airtime: a PPDU carries at least one non-empty MPDU");
  }
  return ppdu_airtime_bits(static_cast<double>(n_mpdus) * mpdu_bytes * 8.0, rate_bps, cfg);
}

bool mpdu_error_trial(double per, RngStream& rng) {
  if (per < 0.0 || per >= 1.0) throw std::invalid_argument("mpdu_error_trial: per must be in [0,1)");
  return rng.bernoulli(per);
}

}  // namespace uhrsim
