#include "uhrsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace uhrsim {

const std::vector<std::int64_t>& LogHistogram::edges() {
  static const std::vector<std::int64_t> e = [] {
    std::vector<std::int64_t> v(kLogBins + 1);
    for (int k = 0; k <= kLogBins; ++k) {
      v[k] = static_cast<std::int64_t>(std::ceil(1000.0 * std::pow(1.008, k)));
    }
    return v;
  }();
  return e;
}

int LogHistogram::bin_of(std::int64_t ns) {
  const auto& e = edges();
  if (ns < e.front()) return kUnderflow;
  if (ns >= e.back()) return kOverflow;
  int k = static_cast<int>(std::log(static_cast<double>(ns) / 1000.0) / std::log(1.008));
  k = std::clamp(k, 0, kLogBins - 1);
  while (k + 1 < kLogBins && e[k + 1] <= ns) ++k;
  while (k > 0 && e[k] > ns) --k;
  return k + 1;
}

std::int64_t LogHistogram::upper_edge(int bin) {
  if (bin < 0 || bin > kOverflow) throw std::out_of_range("histogram bin");
  if (bin == kOverflow) return -1;
  return edges()[bin];
}

void LogHistogram::add(std::int64_t ns, std::uint64_t n) {
  counts_[bin_of(ns)] += n;
  total_ += n;
}

void LogHistogram::merge(const LogHistogram& other) {
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

int LogHistogram::bin_at_rank(std::uint64_t rank) const {
  if (rank < 1 || rank > total_) throw std::out_of_range("rank outside sample count");
  std::uint64_t cum = 0;
  for (int b = 0; b <= kOverflow; ++b) {
    cum += counts_[b];
    if (cum >= rank) return b;
  }
  return kOverflow;
}

std::uint64_t quantile_rank(double q, std::uint64_t n) {
  const long double x = static_cast<long double>(q) * n;
  auto r = static_cast<std::uint64_t>(std::ceil(x - x * 1e-12L));
  return std::clamp<std::uint64_t>(r, 1, std::max<std::uint64_t>(n, 1));
}

std::uint64_t min_samples_for(double q) {
  const long double x = 1.0L / (1.0L - q);
  return static_cast<std::uint64_t>(std::ceil(x - x * 1e-9L));
}

void DelayAccumulator::record(SimTime delay) {
  const std::int64_t ns = delay.ns();
  if (ns < 0) throw std::invalid_argument("negative delay");
  hist_.add(ns);
  max_ns_ = std::max(max_ns_, ns);
  sum_ns_ += ns;
  if (exact_enabled_) {
    if (exact_.size() < exact_cap_) {
      exact_.push_back(ns);
    } else {
      exact_enabled_ = false;
      std::vector<std::int64_t>().swap(exact_);
    }
  }
}

void DelayAccumulator::merge(const DelayAccumulator& other) {
  hist_.merge(other.hist_);
  max_ns_ = std::max(max_ns_, other.max_ns_);
  sum_ns_ += other.sum_ns_;
  if (exact_enabled_ && other.exact_enabled_ && exact_.size() + other.exact_.size() <= exact_cap_) {
    exact_.insert(exact_.end(), other.exact_.begin(), other.exact_.end());
  } else {
    exact_enabled_ = false;
    std::vector<std::int64_t>().swap(exact_);
  }
}

double DelayAccumulator::mean_us() const {
  const auto n = count();
  return n == 0 ? 0.0 : static_cast<double>(sum_ns_ / n) / 1000.0;
}

QuantileResult DelayAccumulator::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile must lie in (0, 1)");
  QuantileResult r;
  const std::uint64_t n = count();
  if (n == 0) return r;
  r.sufficient = n >= min_samples_for(q);
  const std::uint64_t rank = quantile_rank(q, n);
  if (exact_enabled_) {
    std::vector<std::int64_t> v = exact_;
    auto nth = v.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(v.begin(), nth, v.end());
    r.value = nanoseconds(*nth);
    r.exact = true;
    return r;
  }
  const int bin = hist_.bin_at_rank(rank);
  r.value = nanoseconds(bin == LogHistogram::kOverflow ? max_ns_ : LogHistogram::upper_edge(bin));
  return r;
}

std::vector<CcdfPoint> DelayAccumulator::ccdf() const {
  std::vector<CcdfPoint> out;
  const std::uint64_t n = count();
  if (n == 0) return out;
  const auto& c = hist_.counts();
  std::uint64_t cum = 0;
  for (int b = 0; b <= LogHistogram::kOverflow; ++b) {
    if (c[b] == 0) continue;
    cum += c[b];
    const std::int64_t edge = b == LogHistogram::kOverflow ? max_ns_ : LogHistogram::upper_edge(b);
    out.push_back({edge / 1000.0, static_cast<double>(n - cum) / static_cast<double>(n)});
  }
  return out;
}

std::int64_t ConservationRow::imbalance() const {
  const auto lhs = static_cast<std::int64_t>(counters.generated);
  const auto rhs = static_cast<std::int64_t>(counters.delivered + counters.dropped_buffer +
                                             counters.dropped_retry + queued_end + inflight_end);
  return lhs - rhs;
}

void check_conservation(const std::vector<ConservationRow>& rows) {
  std::ostringstream bad;
  for (const auto& r : rows) {
    if (r.imbalance() == 0) continue;
    bad << "flow " << r.flow << ": generated=" << r.counters.generated
        << " delivered=" << r.counters.delivered << " dropped_buffer=" << r.counters.dropped_buffer
        << " dropped_retry=" << r.counters.dropped_retry << " queued=" << r.queued_end
        << " inflight=" << r.inflight_end << " diff=" << r.imbalance() << '\n';
  }
  if (!bad.str().empty()) throw AuditFailure("conservation violated\n" + bad.str());
}

AirtimeAuditor::AirtimeAuditor(int links, AuditRules rules)
    : links_(links), rules_(std::move(rules)), busy_(links), covered_until_(links) {}

void AirtimeAuditor::violation(const std::string& kind, const BusyInterval& a, const BusyInterval* b) {
  ++violation_count_;
  ++by_kind_[kind];
  if (samples_.size() >= 16) return;
  std::ostringstream os;
  os << kind << ": link " << a.link << " device " << a.device << " [" << a.start.ns() << ", "
     << a.end.ns() << ")";
  if (b != nullptr) {
    os << " vs device " << b->device << " link " << b->link << " [" << b->start.ns() << ", "
       << b->end.ns() << ")";
  }
  samples_.push_back(os.str());
}

void AirtimeAuditor::retire_front() {
  const BusyInterval& f = active_.front();
  auto l = static_cast<std::size_t>(f.link);
  if (f.end > covered_until_[l]) {
    busy_[l] += f.end - std::max(f.start, covered_until_[l]);
    covered_until_[l] = f.end;
  }
  active_.pop_front();
  ++base_;
}

std::size_t AirtimeAuditor::open(const BusyInterval& iv) {
  if (iv.link < 0 || iv.link >= links_) throw std::out_of_range("auditor link");
  if (last_start_ && iv.start < *last_start_) {
    throw std::logic_error("auditor intervals must arrive in start order");
  }
  last_start_ = iv.start;
  while (!active_.empty() && active_.front().end <= iv.start) retire_front();
  ++opened_;

  if (iv.device < 0) violation("untagged", iv, nullptr);
  if (iv.end < iv.start) violation("negative-interval", iv, nullptr);
  if (iv.end - iv.origin() > rules_.txop_limit) violation("txop-limit", iv, nullptr);
  if (iv.mpdus > rules_.max_ampdu) violation("aggregation", iv, nullptr);

  if (rules_.calendar != nullptr && !rules_.calendar->empty()) {
    std::optional<SpOccurrence> occ = rules_.calendar->active_at(iv.start, iv.link);
    if (!occ) {
      occ = rules_.calendar->next_at_or_after(iv.start, iv.link);
      if (occ && occ->start >= iv.end) occ.reset();
    }
    if (occ) {
      const auto& sp = rules_.calendar->sps()[occ->sp];
      const bool ok = iv.sp_member && sp.owner == iv.device && iv.start >= occ->start && iv.end <= occ->end;
      if (!ok) violation("rtwt-nonmember", iv, nullptr);
    }
  }

  for (const auto& other : active_) {
    if (other.end <= iv.start || other.start >= iv.end) continue;
    if (other.device == iv.device) {
      if (other.link == iv.link) {
        violation("self-overlap", iv, &other);
      } else if (rules_.single_radio && rules_.single_radio(iv.device)) {
        violation("single-radio", iv, &other);
      }
      continue;
    }
    if (other.link != iv.link) continue;
    if (iv.group >= 0 && iv.group == other.group) {
      if (iv.subchannel < 0 || other.subchannel < 0 || iv.subchannel == other.subchannel) {
        violation("coordinated-overlap", iv, &other);
      } else {
        ++concurrent_;
      }
      continue;
    }
    const bool sense = rules_.contend && rules_.contend(iv.link, iv.device, other.device);
    if (!sense) {
      ++concurrent_;
    } else if (other.origin() == iv.origin()) {
      ++collisions_;
    } else {
      violation("mutual-exclusion", iv, &other);
    }
  }
  active_.push_back(iv);
  return base_ + active_.size() - 1;
}

void AirtimeAuditor::amend_end(std::size_t id, SimTime end) {
  if (id < base_ || id - base_ >= active_.size()) return;
  auto& iv = active_[id - base_];
  if (end < iv.end) iv.end = std::max(end, iv.start);
}

void AirtimeAuditor::finish() {
  // Retire in start order so the per-link union stays exact.
  while (!active_.empty()) retire_front();
}

int RunResults::dominant_mcs() const {
  int best = -1;
  std::uint64_t best_n = 0;
  for (const auto& [mcs, n] : mcs_txops) {
    if (n > best_n) {
      best = mcs;
      best_n = n;
    }
  }
  return best;
}

std::vector<ConservationRow> RunResults::conservation() const {
  std::vector<ConservationRow> rows;
  for (const auto& f : flows) rows.push_back({f.name, f.counters, f.queued_end, f.inflight_end});
  return rows;
}

namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_quantiles(std::ostream& os, const DelayAccumulator& d) {
  const double qs[] = {0.5, 0.99, 0.999999};
  const char* names[] = {"p50_us", "p99_us", "p999999_us"};
  for (int i = 0; i < 3; ++i) {
    const auto r = d.quantile(qs[i]);
    os << ' ' << names[i] << '=' << fixed3(r.value.ns() / 1000.0);
  }
  os << " p999999_sufficient=" << (d.quantile(0.999999).sufficient ? 1 : 0)
     << " mean_us=" << fixed3(d.mean_us()) << " max_us=" << fixed3(d.max().ns() / 1000.0);
}

}  // namespace

std::string format_summary(const RunResults& r) {
  std::ostringstream os;
  os << "scenario=" << r.scenario << " seed=" << r.seed << " duration_s=" << fixed3(r.duration.s())
     << " events=" << r.events << '\n';
  for (const auto& f : r.flows) {
    os << "flow=" << f.name << " delivered=" << f.counters.delivered;
    write_quantiles(os, f.delays);
    os << " src=" << f.src << " dst=" << f.dst << " generated=" << f.counters.generated
       << " dropped_buffer=" << f.counters.dropped_buffer
       << " dropped_retry=" << f.counters.dropped_retry << " queued_end=" << f.queued_end
       << " inflight_end=" << f.inflight_end << '\n';
  }
  os << "flow=all delivered=" << r.all.count();
  write_quantiles(os, r.all);
  os << '\n';
  for (std::size_t l = 0; l < r.link_utilization.size(); ++l) {
    os << "link=" << l << " utilization=" << fixed6(r.link_utilization[l]) << '\n';
  }
  for (const auto& [mcs, n] : r.mcs_txops) os << "mcs=" << mcs << " txops=" << n << '\n';
  os << "dominant_mcs=" << r.dominant_mcs() << '\n';
  for (const auto& b : r.blocking) {
    os << "blocking device=" << b.device << " link=" << b.link
       << " deferral=" << fixed6(b.deferral_fraction)
       << " obss_deferral=" << fixed6(b.obss_deferral_fraction) << '\n';
  }
  os << "audit intervals=" << r.audit_intervals << " violations=" << r.audit_violations
     << " collisions=" << r.collisions << " concurrent_overlaps=" << r.concurrent_overlaps << '\n';
  os << "preemptions=" << r.preemptions
     << " max_insertion_latency_us=" << fixed3(r.max_insertion_latency.ns() / 1000.0) << '\n';
  return os.str();
}

std::string format_ccdf(const DelayAccumulator& acc) {
  std::ostringstream os;
  os << "delay_us,ccdf\n";
  char buf[96];
  for (const auto& p : acc.ccdf()) {
    std::snprintf(buf, sizeof buf, "%.3f,%.10g\n", p.delay_us, p.ccdf);
    os << buf;
  }
  return os.str();
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace

void export_results(const RunResults& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "summary.txt", format_summary(r));
  for (const auto& f : r.flows) write_file(dir / ("ccdf_" + f.name + ".csv"), format_ccdf(f.delays));
  write_file(dir / "ccdf_all.csv", format_ccdf(r.all));
}

}  // namespace uhrsim
