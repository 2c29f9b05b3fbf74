#include "uhrsim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

namespace uhrsim {

namespace {

std::vector<std::string> audit(const RunResults& r) {
  std::vector<std::string> problems;
  try {
    check_conservation(r.conservation());
  } catch (const AuditFailure& e) {
    problems.emplace_back(e.what());
  }
  if (r.audit_violations > 0) {
    problems.push_back(std::to_string(r.audit_violations) + " airtime violation(s) in " +
                       std::to_string(r.audit_intervals) + " transmissions");
    for (const auto& v : r.audit_samples) problems.push_back("  " + v);
  }
  return problems;
}

Spread spread(std::vector<double> v) {
  Spread s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  const std::size_t n = v.size();
  s.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return s;
}

std::string point_name(const std::string& label, const std::string& key, double value) {
  return label + "__" + key + "=" + format_number(value);
}

}  // namespace

int default_jobs() {
  if (const char* env = std::getenv("UHRSIM_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 1;
}

RunReport run_scenario_unchecked(const RunRequest& req) {
  ScenarioConfig cfg = req.config;
  if (req.seed) cfg.seed = *req.seed;
  if (req.duration_s) cfg.duration_s = *req.duration_s;
  validate_scenario(cfg);

  RunReport rep;
  if (!req.out.empty()) {
    const std::string label = req.label.empty() ? scenario_hash(cfg) : req.label;
    rep.dir = req.out / label / std::to_string(cfg.seed);
    std::filesystem::create_directories(rep.dir);
  }
  std::ofstream trace;
  RunOptions opts;
  if (req.trace && !rep.dir.empty()) {
    trace.open(rep.dir / "trace.log");
    opts.trace = &trace;
  }
  Network net(cfg, opts);
  rep.results = net.run();
  if (!rep.dir.empty()) export_results(rep.results, rep.dir);
  rep.audit_problems = audit(rep.results);
  return rep;
}

RunReport run_scenario(const RunRequest& req) {
  RunReport rep = run_scenario_unchecked(req);
  if (!rep.audit_problems.empty()) {
    std::string msg;
    for (const auto& p : rep.audit_problems) msg += (msg.empty() ? "" : "\n") + p;
    throw AuditFailure(msg);
  }
  return rep;
}

SweepReport sweep(const SweepRequest& req) {
  if (req.values.empty()) throw ConfigError("sweep needs at least one value");
  if (!is_numeric_key(req.key)) throw ConfigError("sweep key '" + req.key + "' is not a numeric field");
  if (req.seeds < 1) throw ConfigError("sweep needs at least one seed");

  struct Job {
    std::size_t point;
    RunRequest run;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < req.values.size(); ++i) {
    ScenarioConfig cfg = req.config;
    set_numeric(cfg, req.key, req.values[i]);
    if (req.duration_s) cfg.duration_s = *req.duration_s;
    validate_scenario(cfg);
    const std::string label = req.label.empty() ? scenario_hash(req.config) : req.label;
    for (int s = 0; s < req.seeds; ++s) {
      RunRequest r;
      r.config = cfg;
      r.seed = cfg.seed + static_cast<std::uint64_t>(s);
      r.label = point_name(label, req.key, req.values[i]);
      r.out = req.out;
      jobs.push_back({i, std::move(r)});
    }
  }
  // Construction errors (e.g. infeasible CBF budget) surface before any run.
  for (std::size_t i = 0; i < jobs.size(); i += static_cast<std::size_t>(req.seeds)) {
    Network probe(jobs[i].run.config);
  }

  std::vector<RunReport> reports(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        reports[j] = run_scenario_unchecked(jobs[j].run);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const int n = std::clamp(req.jobs, 1, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SweepReport out;
  for (std::size_t i = 0; i < req.values.size(); ++i) {
    SweepRow row;
    row.value = req.values[i];
    std::vector<double> p50, p99, p6;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].point != i) continue;
      const RunResults& r = reports[j].results;
      if (row.runs == 0) row.dominant_mcs = r.dominant_mcs();
      ++row.runs;
      if (r.all.count() > 0) {
        p50.push_back(r.all.quantile(0.5).value.us());
        p99.push_back(r.all.quantile(0.99).value.us());
        p6.push_back(r.all.quantile(0.999999).value.us());
      }
      for (const auto& p : reports[j].audit_problems) {
        out.audit_problems.push_back(jobs[j].run.label + "/" + std::to_string(*jobs[j].run.seed) + ": " + p);
      }
    }
    row.p50_us = spread(p50);
    row.p99_us = spread(p99);
    row.p999999_us = spread(p6);
    out.rows.push_back(row);
  }

  if (!req.out.empty()) {
    std::filesystem::create_directories(req.out);
    const std::string label = req.label.empty() ? scenario_hash(req.config) : req.label;
    std::ofstream(req.out / (label + "__" + req.key + ".csv")) << format_sweep(req, out);
  }
  if (!out.audit_problems.empty()) {
    std::string msg;
    for (const auto& p : out.audit_problems) msg += (msg.empty() ? "" : "\n") + p;
    throw AuditFailure(msg);
  }
  return out;
}

std::string format_sweep(const SweepRequest& req, const SweepReport& rep) {
  std::string s = req.key +
                  ",runs,dominant_mcs,p50_min_us,p50_median_us,p50_max_us,p99_min_us,p99_median_us,p99_max_us,"
                  "p999999_min_us,p999999_median_us,p999999_max_us\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.3f", v);
    s += buf;
  };
  for (const auto& r : rep.rows) {
    s += format_number(r.value) + "," + std::to_string(r.runs) + "," + std::to_string(r.dominant_mcs);
    for (const Spread* sp : {&r.p50_us, &r.p99_us, &r.p999999_us}) {
      put(sp->min);
      put(sp->median);
      put(sp->max);
    }
    s += '\n';
  }
  return s;
}

}  // namespace uhrsim
