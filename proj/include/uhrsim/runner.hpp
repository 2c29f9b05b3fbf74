#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uhrsim/network.hpp"
#include "uhrsim/scenario.hpp"
#include "uhrsim/stats.hpp"

namespace uhrsim {

struct RunRequest {
  ScenarioConfig config;
  std::string label;  // output directory name; empty: scenario hash
  std::optional<std::uint64_t> seed;
  std::optional<double> duration_s;
  std::filesystem::path out;  // empty: nothing written
  bool trace = false;
};

struct RunReport {
  RunResults results;
  std::filesystem::path dir;
  std::vector<std::string> audit_problems;  // empty when every check passed
};

/// One simulation. Writes outputs first, then throws AuditFailure if the run
/// broke conservation or airtime rules.
RunReport run_scenario(const RunRequest& req);

/// Same, returning the problems instead of throwing.
RunReport run_scenario_unchecked(const RunRequest& req);

struct SweepRequest {
  ScenarioConfig config;
  std::string label;
  std::string key;
  std::vector<double> values;
  int seeds = 1;  // consecutive seeds starting at the configured one
  std::optional<double> duration_s;
  std::filesystem::path out;
  int jobs = 1;
};

struct Spread {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct SweepRow {
  double value = 0.0;
  int runs = 0;
  Spread p50_us;
  Spread p99_us;
  Spread p999999_us;
  int dominant_mcs = -1;  // of the first seed
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<std::string> audit_problems;
};

/// Runs |values| x seeds simulations on up to `jobs` threads. Throws
/// ConfigError for an empty value list or a key that is not numeric, and
/// AuditFailure after writing every output if any run failed its audit.
SweepReport sweep(const SweepRequest& req);

std::string format_sweep(const SweepRequest& req, const SweepReport& rep);

/// Jobs default: UHRSIM_JOBS when set to a positive integer, else 1.
int default_jobs();

}  // namespace uhrsim
