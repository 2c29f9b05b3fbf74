#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uhrsim/coordination.hpp"
#include "uhrsim/errors.hpp"
#include "uhrsim/mlo.hpp"
#include "uhrsim/phy.hpp"
#include "uhrsim/traffic.hpp"

namespace uhrsim {

struct ApConfig {
  std::string name;
  Position pos;
  int antennas = 4;
  int streams = 2;
  friend bool operator==(const ApConfig&, const ApConfig&) = default;
};

struct StaConfig {
  std::string name;
  Position pos;
  int antennas = 2;
  std::string ap;
  friend bool operator==(const StaConfig&, const StaConfig&) = default;
};

struct FlowConfig {
  std::string name;
  std::string src;
  std::string dst;
  TrafficModel model = TrafficModel::OnOff;
  double mean_on_ms = 4.15;
  double mean_off_ms = 4.15;
  double rate_mbps = 4000.0;
  int packet_bytes = 1500;
  TrafficClass cls = TrafficClass::BestEffort;
  double start_ms = 0.0;
  friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

struct RtwtConfig {
  std::string owner;
  double start_us = 0.0;
  double duration_us = 0.0;
  double period_us = 0.0;
  std::vector<std::string> flows;
  std::vector<int> links;  // empty: every link
  friend bool operator==(const RtwtConfig&, const RtwtConfig&) = default;
};

struct ModeConfig {
  std::string device;
  MloMode mode = MloMode::EmlmrStr;
  friend bool operator==(const ModeConfig&, const ModeConfig&) = default;
};

struct ScenarioConfig {
  // [run]
  std::string name = "custom";
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  // [topology]
  std::vector<ApConfig> aps;
  std::vector<StaConfig> stas;
  // [links]
  int link_count = 0;
  int bandwidth_mhz = 0;
  double freq_ghz = 0.0;
  // [phy]
  double tx_power_dbm = 20.0;
  double noise_figure_db = 7.0;
  double noise_density_dbm_hz = -174.0;
  double per = 0.10;
  double preamble_us = 44.0;
  double symbol_us = 13.6;
  double cca_dbm = -82.0;
  McsTable mcs = default_mcs_table();
  // [mac]
  double slot_us = 9.0;
  double sifs_us = 16.0;
  double difs_us = 34.0;
  int cw_min = 15;
  int cw_max = 1023;
  int retry_limit = 7;
  double block_ack_us = 32.0;
  double txop_limit_us = 5484.0;
  int max_ampdu = 1024;
  int buffer_packets = 10240;
  bool preemption = false;
  std::vector<RtwtConfig> rtwt;
  // [mlo]
  MloMode default_mode = MloMode::EmlmrStr;
  double switch_delay_us = 0.0;
  std::vector<ModeConfig> modes;
  // [coordination]
  CoordScheme scheme = CoordScheme::None;
  std::optional<double> nulling_db;
  double sounding_us = 0.0;
  std::vector<std::string> members;  // empty: every AP
  // [traffic]
  std::vector<FlowConfig> flows;

  MloMode mode_of(std::string_view device) const;
  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Parses and validates; throws ConfigError listing every problem found.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::string& path);
/// Checks a configuration built or modified in code.
void validate_scenario(const ScenarioConfig& cfg);
std::string serialize_scenario(const ScenarioConfig& cfg);
/// 16 hex digits identifying the serialized configuration.
std::string scenario_hash(const ScenarioConfig& cfg);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown preset.
std::string preset_text(std::string_view name);
ScenarioConfig preset(std::string_view name);

/// Numeric fields addressable as "<section>.<key>" (e.g. coordination.nulling_db).
std::vector<std::string> numeric_keys();
bool is_numeric_key(std::string_view key);
/// Throws ConfigError for unknown/non-numeric keys or a non-integral value
/// for an integer field.
void set_numeric(ScenarioConfig& cfg, std::string_view key, double value);
double get_numeric(const ScenarioConfig& cfg, std::string_view key);

/// Shortest round-trip text for a double.
std::string format_number(double v);

}  // namespace uhrsim
