#include <charconv>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uhrsim/runner.hpp"

using namespace uhrsim;

namespace {

enum Exit { kOk = 0, kConfig = 1, kAudit = 2 };

struct Source {
  std::string config;
  std::string preset;
};

void add_source(CLI::App* cmd, Source& src) {
  auto* c = cmd->add_option("--config", src.config, "Scenario file");
  auto* p = cmd->add_option("--preset", src.preset, "Canned scenario instead of a file");
  c->excludes(p);
}

ScenarioConfig load(const Source& src, std::string& label) {
  if (!src.preset.empty()) {
    label = src.preset;
    return preset(src.preset);
  }
  if (src.config.empty()) throw ConfigError("one of --config or --preset is required");
  label.clear();
  return load_scenario(src.config);
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    double v = 0.0;
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || end != item.data() + item.size()) {
      throw ConfigError("bad sweep value '" + item + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

void print_flows(const RunResults& r) {
  for (const auto& f : r.flows) {
    const auto q = f.delays.quantile(0.999999);
    std::printf("%s delivered=%llu p50_us=%.3f p99_us=%.3f p999999_us=%.3f%s\n", f.name.c_str(),
                static_cast<unsigned long long>(f.counters.delivered),
                f.delays.count() ? f.delays.quantile(0.5).value.us() : 0.0,
                f.delays.count() ? f.delays.quantile(0.99).value.us() : 0.0, f.delays.count() ? q.value.us() : 0.0,
                f.delays.count() && !q.sufficient ? " (too few samples)" : "");
  }
  std::printf("dominant_mcs=%d\n", r.dominant_mcs());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven simulator for multi-link, multi-AP Wi-Fi latency studies"};
  app.require_subcommand(1);

  Source run_src;
  RunRequest run_req;
  std::uint64_t run_seed = 0;
  double run_duration = 0.0;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Run one simulation");
  add_source(run, run_src);
  auto* seed_opt = run->add_option("--seed", run_seed, "Seed (default: from the scenario)");
  auto* dur_opt = run->add_option("--duration", run_duration, "Simulated seconds (default: from the scenario)");
  run->add_option("--out", run_out, "Output root directory");
  run->add_flag("--trace", run_req.trace, "Write trace.log with one line per event");

  Source sw_src;
  SweepRequest sw_req;
  std::string sw_values;
  std::string sw_out;
  double sw_duration = 0.0;
  sw_req.jobs = default_jobs();
  auto* sw = app.add_subcommand("sweep", "Run a parameter sweep over several seeds");
  add_source(sw, sw_src);
  sw->add_option("--key", sw_req.key, "Numeric field, e.g. coordination.nulling_db")->required();
  sw->add_option("--values", sw_values, "Comma-separated values")->required();
  sw->add_option("--seeds", sw_req.seeds, "Number of consecutive seeds")->capture_default_str();
  auto* sw_dur = sw->add_option("--duration", sw_duration, "Simulated seconds per run");
  sw->add_option("--out", sw_out, "Output root directory");
  sw->add_option("--jobs", sw_req.jobs, "Parallel runs (default: UHRSIM_JOBS or 1)");

  std::string preset_name;
  bool preset_print = false;
  auto* pre = app.add_subcommand("preset", "Show a canned scenario");
  pre->add_option("name", preset_name, "Preset name")->required();
  pre->add_flag("--print", preset_print, "Print the scenario text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*run) {
      run_req.config = load(run_src, run_req.label);
      if (*seed_opt) run_req.seed = run_seed;
      if (*dur_opt) run_req.duration_s = run_duration;
      run_req.out = run_out;
      const RunReport rep = run_scenario_unchecked(run_req);
      print_flows(rep.results);
      if (!rep.dir.empty()) std::printf("output=%s\n", rep.dir.string().c_str());
      if (!rep.audit_problems.empty()) {
        for (const auto& p : rep.audit_problems) std::fprintf(stderr, "audit: %s\n", p.c_str());
        return kAudit;
      }
      return kOk;
    }
    if (*sw) {
      sw_req.config = load(sw_src, sw_req.label);
      sw_req.values = parse_values(sw_values);
      if (*sw_dur) sw_req.duration_s = sw_duration;
      sw_req.out = sw_out;
      const SweepReport rep = sweep(sw_req);
      std::cout << format_sweep(sw_req, rep);
      return kOk;
    }
    if (*pre) {
      const std::string text = preset_text(preset_name);
      if (preset_print) {
        std::cout << text;
      } else {
        std::cout << preset_name << '\n';
      }
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const AuditFailure& e) {
    std::fprintf(stderr, "audit failure: %s\n", e.what());
    return kAudit;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  }
  return kOk;
}
