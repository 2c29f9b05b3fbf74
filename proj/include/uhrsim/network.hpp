#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "uhrsim/coordination.hpp"
#include "uhrsim/phy.hpp"
#include "uhrsim/scenario.hpp"
#include "uhrsim/stats.hpp"

namespace uhrsim {

/// Outcome of one transmission, reported when it ends.
struct TxOutcome {
  int device = -1;
  int link = -1;
  int dst = -1;
  SimTime start;
  SimTime end;
  int mcs = -1;
  double sinr_db = 0.0;             // worst PPDU of the TXOP, actual overlap included
  std::vector<int> interferers;     // overlapping transmitters counted in the SINR
  std::vector<double> suppression_db;
  int mpdus = 0;
  int delivered = 0;
  int failed = 0;
  int interrupted = 0;              // returned to the queue by a preemption cut
  bool sinr_failure = false;
  int group = -1;
  int subchannel = -1;
  bool sp_member = false;
  bool preempted = false;
};

struct PreemptionRecord {
  int device = -1;
  int link = -1;
  PreemptionKind kind = PreemptionKind::Rejected;
  SimTime arrival;
  SimTime insertion_latency;
};

struct RunOptions {
  std::ostream* trace = nullptr;
  std::function<void(const TxOutcome&)> on_tx;
  std::function<void(const PreemptionRecord&)> on_preempt;
  std::size_t exact_cap = DelayAccumulator::kDefaultExactCap;
};

/// Event-driven simulation of one scenario. Seed and duration come from the
/// configuration. Construction throws ConfigError for infeasible setups.
class Network {
 public:
  explicit Network(const ScenarioConfig& cfg, RunOptions opts = {});
  ~Network();
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  /// Runs to the configured horizon. Call once.
  RunResults run();

  int device_index(std::string_view name) const;
  const ContentionDomain& domain() const;
  const CoordinationSet& coordination() const;
  /// Link-adaptation SINR and MCS used for (tx -> rx) on a link.
  double static_sinr_db(int tx, int rx, int link) const;
  std::optional<McsEntry> static_mcs(int tx, int rx, int link) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace uhrsim
