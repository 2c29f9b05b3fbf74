#pragma once

#include <optional>
#include <span>
#include <vector>

#include "uhrsim/rng.hpp"
#include "uhrsim/sim_time.hpp"

namespace uhrsim {

struct Position {
  double x = 0.0;  // meters
  double y = 0.0;
  friend bool operator==(const Position&, const Position&) = default;
};

double distance_m(Position a, Position b);

// Indoor residential path loss with a 5 m breakpoint and no wall/floor terms:
//   PL = 40.05 + 20 log10(f/2.4) + 20 log10(min(d,5)) + [d>5] 35 log10(d/5)
// Throws std::invalid_argument for co-located devices or freq <= 0.
double path_loss_db(Position tx, Position rx, double freq_ghz);

double noise_floor_dbm(double bandwidth_mhz, double noise_figure_db,
                       double noise_density_dbm_hz = -174.0);

struct Interferer {
  double power_dbm = 0.0;       // received power before suppression
  double suppression_db = 0.0;  // nulling attenuation, >= 0
};

double sinr_db(double signal_dbm, std::span<const Interferer> interferers, double noise_dbm);

struct CodingRate {
  int num = 1;
  int den = 2;
  double value() const { return static_cast<double>(num) / den; }
  friend bool operator==(const CodingRate&, const CodingRate&) = default;
};

struct McsEntry {
  int index = 0;
  int bits_per_symbol = 1;  // log2 of the modulation order
  CodingRate rate;
  double min_sinr_db = 0.0;

  double info_bits_per_subcarrier() const { return bits_per_symbol * rate.value(); }
  friend bool operator==(const McsEntry&, const McsEntry&) = default;
};

using McsTable = std::vector<McsEntry>;

/// BPSK 1/2 (MCS0) through 4096-QAM 5/6 (MCS13).
McsTable default_mcs_table();

/// Throws std::invalid_argument unless indices are 0..n-1 in order and both
/// threshold and information bits strictly increase with index.
void validate_mcs_table(const McsTable& table);

/// Highest entry whose threshold is met; nullopt when the SINR is below MCS0.
std::optional<McsEntry> select_mcs(double sinr_db, const McsTable& table);

/// Data subcarriers of the EHT tone plan for a channel width.
int data_subcarriers_for(int bandwidth_mhz);
bool valid_bandwidth(int bandwidth_mhz);

struct PhyConfig {
  double freq_ghz = 6.0;
  int bandwidth_mhz = 160;
  int data_subcarriers = 1960;
  SimTime symbol = nanoseconds(13600);  // 12.8 us + 0.8 us guard
  SimTime preamble = microseconds(44);
  double noise_figure_db = 7.0;
  double noise_density_dbm_hz = -174.0;
  double tx_power_dbm = 20.0;
  double per = 0.10;

  /// Same PHY restricted to a narrower subchannel (C-OFDMA).
  PhyConfig with_bandwidth(int bandwidth_mhz) const;
};

double phy_rate_bps(const McsEntry& mcs, const PhyConfig& cfg, int streams);

/// Data bits carried by one OFDM symbol at the given rate.
double bits_per_ofdm_symbol(double rate_bps, const PhyConfig& cfg);

/// Preamble plus payload rounded up to whole OFDM symbols.
SimTime ppdu_airtime(int n_mpdus, int mpdu_bytes, double rate_bps, const PhyConfig& cfg);
SimTime ppdu_airtime_bits(double payload_bits, double rate_bps, const PhyConfig& cfg);

/// Number of whole symbols needed for a payload.
std::int64_t payload_symbols(double payload_bits, double rate_bps, const PhyConfig& cfg);

/// True when the MPDU is lost.
bool mpdu_error_trial(double per, RngStream& rng);

}  // namespace uhrsim
