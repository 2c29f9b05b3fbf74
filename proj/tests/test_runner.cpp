#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "uhrsim/errors.hpp"
#include "uhrsim/runner.hpp"

using namespace uhrsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("uhrsim_runner_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const char* bin = std::getenv("UHRSIM_BIN");
  REQUIRE(bin != nullptr);
  const std::string cmd = std::string(bin) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("run writes summary and CCDF files per seed") {
  const auto out = scratch("layout");
  RunRequest req;
  req.config = preset("case-study-mlo");
  req.label = "demo";
  req.seed = 3;
  req.duration_s = 0.3;
  req.out = out;
  req.trace = true;
  const auto rep = run_scenario(req);
  CHECK(rep.dir == out / "demo" / "3");
  CHECK(rep.audit_problems.empty());
  CHECK(fs::exists(rep.dir / "summary.txt"));
  CHECK(fs::exists(rep.dir / "ccdf_f1.csv"));
  CHECK(fs::exists(rep.dir / "ccdf_f2.csv"));
  CHECK(fs::file_size(rep.dir / "trace.log") > 0);
  CHECK(rep.results.seed == 3);
  CHECK(rep.results.duration == milliseconds(300));
  fs::remove_all(out);
}

TEST_CASE("same seed gives byte-identical outputs") {
  const auto a = scratch("same_a");
  const auto b = scratch("same_b");
  RunRequest req;
  req.config = preset("case-study-cbf");
  req.duration_s = 0.5;
  req.trace = true;
  req.out = a;
  const auto ra = run_scenario(req);
  req.out = b;
  const auto rb = run_scenario(req);
  CHECK(ra.dir.filename() == rb.dir.filename());
  auto effective = req.config;
  effective.duration_s = 0.5;
  CHECK(ra.dir.parent_path().filename().string() == scenario_hash(effective));
  for (const char* f : {"summary.txt", "ccdf_f1.csv", "ccdf_f2.csv", "trace.log"}) {
    CHECK_MESSAGE(slurp(ra.dir / f) == slurp(rb.dir / f), f);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("sweep rejects bad requests") {
  SweepRequest req;
  req.config = preset("case-study-cbf");
  req.key = "coordination.nulling_db";
  CHECK_THROWS_AS(sweep(req), ConfigError);
  req.values = {10};
  req.key = "coordination.scheme";
  CHECK_THROWS_AS(sweep(req), ConfigError);
  req.key = "coordination.nulling_db";
  req.seeds = 0;
  CHECK_THROWS_AS(sweep(req), ConfigError);
}

TEST_CASE("sweep over nulling depth") {
  const auto out = scratch("sweep");
  SweepRequest req;
  req.config = preset("case-study-cbf");
  req.label = "cbf";
  req.key = "coordination.nulling_db";
  req.values = {10, 20, 30};
  req.seeds = 2;
  req.duration_s = 0.3;
  req.out = out;
  req.jobs = 2;
  const auto rep = sweep(req);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.audit_problems.empty());
  CHECK(rep.rows[0].dominant_mcs == 4);
  CHECK(rep.rows[1].dominant_mcs == 9);
  CHECK(rep.rows[2].dominant_mcs == 13);
  for (const auto& row : rep.rows) {
    CHECK(row.runs == 2);
    CHECK(row.p50_us.min <= row.p50_us.median);
    CHECK(row.p50_us.median <= row.p50_us.max);
  }
  CHECK(rep.rows[0].p50_us.median > rep.rows[2].p50_us.median);
  CHECK(fs::exists(out / "cbf__coordination.nulling_db=10" / "1" / "summary.txt"));
  CHECK(fs::exists(out / "cbf__coordination.nulling_db=30" / "2" / "summary.txt"));
  const std::string csv = slurp(out / "cbf__coordination.nulling_db.csv");
  CHECK(csv == format_sweep(req, rep));
  CHECK(csv.rfind("coordination.nulling_db,runs,dominant_mcs,", 0) == 0);
  fs::remove_all(out);
}

TEST_CASE("sweeping the seed key with one seed per point is a plain run") {
  SweepRequest req;
  req.config = preset("case-study-mlo");
  req.key = "run.seed";
  req.values = {7, 7};
  req.duration_s = 0.3;
  const auto rep = sweep(req);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].p99_us.median == rep.rows[1].p99_us.median);
  RunRequest one;
  one.config = preset("case-study-mlo");
  one.seed = 7;
  one.duration_s = 0.3;
  const auto r = run_scenario(one);
  CHECK(r.results.all.quantile(0.99).value.us() == doctest::Approx(rep.rows[0].p99_us.median));
}

TEST_CASE("CLI exit codes") {
  const auto out = scratch("cli");
  CHECK(cli("preset case-study-mlo --print") == 0);
  CHECK(cli("run --preset case-study-mlo --duration 0.2 --out " + out.string()) == 0);
  CHECK(fs::exists(out / "case-study-mlo" / "1" / "summary.txt"));
  CHECK(cli("run --preset nope") == 1);
  CHECK(cli("run --config /nonexistent.ini") == 1);
  CHECK(cli("run --preset case-study-mlo --config x.ini") == 1);
  CHECK(cli("sweep --preset case-study-cbf --key coordination.scheme --values 1") == 1);
  CHECK(cli("sweep --preset case-study-cbf --key coordination.nulling_db --values ''") == 1);
  CHECK(cli("sweep --preset case-study-cbf --key coordination.nulling_db --values 1,x") == 1);
  CHECK(cli("frobnicate") == 1);
  const auto bad = out / "bad.ini";
  std::ofstream(bad) << "[run]\nduration_s = 1\n";
  CHECK(cli("run --config " + bad.string()) == 1);
  fs::remove_all(out);
}
