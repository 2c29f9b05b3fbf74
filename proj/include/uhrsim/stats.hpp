#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uhrsim/errors.hpp"
#include "uhrsim/mac.hpp"
#include "uhrsim/sim_time.hpp"

namespace uhrsim {

/// Delay histogram with geometric bins from 1 us to 100 s, ratio 1.008
/// (relative bin width below 1%), plus an underflow and an overflow bin.
/// Edges are integer nanoseconds, so binning is exact and portable.
class LogHistogram {
 public:
  static constexpr int kLogBins = 2312;
  static constexpr int kUnderflow = 0;
  static constexpr int kOverflow = kLogBins + 1;

  /// edges()[k] = ceil(1000 * 1.008^k) ns, k = 0..kLogBins.
  static const std::vector<std::int64_t>& edges();
  static int bin_of(std::int64_t ns);
  /// Exclusive upper edge in ns; the overflow bin has none (returns -1).
  static std::int64_t upper_edge(int bin);

  LogHistogram() : counts_(kOverflow + 1, 0) {}
  void add(std::int64_t ns, std::uint64_t n = 1);
  void merge(const LogHistogram& other);
  std::uint64_t count() const { return total_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  /// Bin holding the rank-th smallest sample (1-based).
  int bin_at_rank(std::uint64_t rank) const;

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct QuantileResult {
  SimTime value;
  bool sufficient = false;  // n >= ceil(1/(1-q))
  bool exact = false;       // order statistic rather than bin edge
};

struct CcdfPoint {
  double delay_us = 0.0;
  double ccdf = 0.0;
};

/// Per-flow delay samples: exact list while under a memory cap, histogram always.
class DelayAccumulator {
 public:
  static constexpr std::size_t kDefaultExactCap = std::size_t{1} << 20;

  explicit DelayAccumulator(std::size_t exact_cap = kDefaultExactCap) : exact_cap_(exact_cap) {}

  /// Throws std::invalid_argument for negative delays.
  void record(SimTime delay);
  void merge(const DelayAccumulator& other);

  std::uint64_t count() const { return hist_.count(); }
  bool exact_available() const { return exact_enabled_; }
  SimTime max() const { return nanoseconds(max_ns_); }
  double mean_us() const;
  const LogHistogram& histogram() const { return hist_; }

  /// Throws std::invalid_argument unless 0 < q < 1.
  QuantileResult quantile(double q) const;
  /// One row per non-empty bin: upper edge and fraction of samples beyond it.
  std::vector<CcdfPoint> ccdf() const;

 private:
  std::size_t exact_cap_;
  bool exact_enabled_ = true;
  std::vector<std::int64_t> exact_;
  LogHistogram hist_;
  std::int64_t max_ns_ = 0;
  long double sum_ns_ = 0.0L;
};

/// 1-based rank ceil(q*n) with protection against rounding noise.
std::uint64_t quantile_rank(double q, std::uint64_t n);
/// Minimum sample count for a meaningful q-quantile: ceil(1/(1-q)).
std::uint64_t min_samples_for(double q);

struct FlowCounters {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_buffer = 0;
  std::uint64_t dropped_retry = 0;
};

struct ConservationRow {
  std::string flow;
  FlowCounters counters;
  std::uint64_t queued_end = 0;
  std::uint64_t inflight_end = 0;

  std::int64_t imbalance() const;
};

/// Throws AuditFailure listing every flow whose books do not balance.
void check_conservation(const std::vector<ConservationRow>& rows);

struct BusyInterval {
  int link = 0;
  int device = -1;
  SimTime start;
  SimTime end;
  int group = -1;       // coordinated TXOP this interval belongs to
  int subchannel = -1;  // C-OFDMA portion, -1 for the whole channel
  int mpdus = 0;
  bool sp_member = false;
  std::optional<SimTime> txop_start;  // tail of a preempted TXOP: where the TXOP began

  SimTime origin() const { return txop_start.value_or(start); }
};

struct AuditRules {
  std::function<bool(int link, int a, int b)> contend;  // mutual carrier sense
  std::function<bool(int device)> single_radio;
  const RtwtCalendar* calendar = nullptr;
  SimTime txop_limit = microseconds(5484);
  int max_ampdu = 1024;
};

/// Streaming check of every transmission interval against the ones still
/// on the air. Also accumulates per-link busy time (union of intervals).
class AirtimeAuditor {
 public:
  AirtimeAuditor(int links, AuditRules rules);

  /// Intervals must be opened in non-decreasing start order.
  std::size_t open(const BusyInterval& iv);
  /// Shortens an open interval (e.g. after a preemption cut).
  void amend_end(std::size_t id, SimTime end);
  void finish();

  std::uint64_t intervals() const { return opened_; }
  std::uint64_t violation_count() const { return violation_count_; }
  const std::map<std::string, std::uint64_t>& violations_by_kind() const { return by_kind_; }
  const std::vector<std::string>& first_violations() const { return samples_; }
  /// Overlaps between different devices on one link that the rules allowed.
  std::uint64_t concurrent_overlaps() const { return concurrent_; }
  std::uint64_t collisions() const { return collisions_; }
  SimTime busy_time(int link) const { return busy_[static_cast<std::size_t>(link)]; }

 private:
  void violation(const std::string& kind, const BusyInterval& a, const BusyInterval* b);
  void retire_front();

  int links_;
  AuditRules rules_;
  std::deque<BusyInterval> active_;  // start order; index = id - base_
  std::size_t base_ = 0;
  std::optional<SimTime> last_start_;
  std::vector<SimTime> busy_;
  std::vector<SimTime> covered_until_;
  std::uint64_t opened_ = 0;
  std::uint64_t violation_count_ = 0;
  std::uint64_t concurrent_ = 0;
  std::uint64_t collisions_ = 0;
  std::map<std::string, std::uint64_t> by_kind_;
  std::vector<std::string> samples_;
};

struct BlockingRow {
  std::string device;
  int link = 0;
  double deferral_fraction = 0.0;
  double obss_deferral_fraction = 0.0;
};

struct FlowResult {
  std::string name;
  std::string src;
  std::string dst;
  FlowCounters counters;
  std::uint64_t queued_end = 0;
  std::uint64_t inflight_end = 0;
  DelayAccumulator delays;
};

struct RunResults {
  std::string scenario;
  std::uint64_t seed = 0;
  SimTime duration;
  std::uint64_t events = 0;
  std::vector<FlowResult> flows;
  DelayAccumulator all;  // every delivered packet of every flow
  std::vector<double> link_utilization;
  std::map<int, std::uint64_t> mcs_txops;  // MCS index -> TXOPs started
  std::vector<BlockingRow> blocking;
  std::uint64_t audit_intervals = 0;
  std::uint64_t audit_violations = 0;
  std::vector<std::string> audit_samples;  // first few violations, for diagnostics
  std::uint64_t concurrent_overlaps = 0;
  std::uint64_t collisions = 0;
  std::uint64_t preemptions = 0;
  SimTime max_insertion_latency;

  /// MCS used by the most TXOPs (lowest index on ties), -1 if none.
  int dominant_mcs() const;
  std::vector<ConservationRow> conservation() const;
};

std::string format_summary(const RunResults& r);
std::string format_ccdf(const DelayAccumulator& acc);
/// Writes summary.txt and ccdf_<flow>.csv into dir (created if needed).
void export_results(const RunResults& r, const std::filesystem::path& dir);

}  // namespace uhrsim
