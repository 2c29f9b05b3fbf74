#include "uhrsim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "uhrsim/mac.hpp"

namespace uhrsim {

MloMode ScenarioConfig::mode_of(std::string_view device) const {
  for (const auto& m : modes) {
    if (m.device == device) return m.mode;
  }
  return default_mode;
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

namespace {

using FieldRef = std::variant<double*, int*, std::uint64_t*, std::optional<double>*>;

struct NumericField {
  std::string_view key;
  FieldRef (*ref)(ScenarioConfig&);
};

// clang-format off
const NumericField kNumeric[] = {
    {"run.duration_s",             [](ScenarioConfig& c) -> FieldRef { return &c.duration_s; }},
    {"run.seed",                   [](ScenarioConfig& c) -> FieldRef { return &c.seed; }},
    {"links.count",                [](ScenarioConfig& c) -> FieldRef { return &c.link_count; }},
    {"links.bandwidth_mhz",        [](ScenarioConfig& c) -> FieldRef { return &c.bandwidth_mhz; }},
    {"links.freq_ghz",             [](ScenarioConfig& c) -> FieldRef { return &c.freq_ghz; }},
    {"phy.tx_power_dbm",           [](ScenarioConfig& c) -> FieldRef { return &c.tx_power_dbm; }},
    {"phy.noise_figure_db",        [](ScenarioConfig& c) -> FieldRef { return &c.noise_figure_db; }},
    {"phy.noise_density_dbm_hz",   [](ScenarioConfig& c) -> FieldRef { return &c.noise_density_dbm_hz; }},
    {"phy.per",                    [](ScenarioConfig& c) -> FieldRef { return &c.per; }},
    {"phy.preamble_us",            [](ScenarioConfig& c) -> FieldRef { return &c.preamble_us; }},
    {"phy.symbol_us",              [](ScenarioConfig& c) -> FieldRef { return &c.symbol_us; }},
    {"phy.cca_dbm",                [](ScenarioConfig& c) -> FieldRef { return &c.cca_dbm; }},
    {"mac.slot_us",                [](ScenarioConfig& c) -> FieldRef { return &c.slot_us; }},
    {"mac.sifs_us",                [](ScenarioConfig& c) -> FieldRef { return &c.sifs_us; }},
    {"mac.difs_us",                [](ScenarioConfig& c) -> FieldRef { return &c.difs_us; }},
    {"mac.cw_min",                 [](ScenarioConfig& c) -> FieldRef { return &c.cw_min; }},
    {"mac.cw_max",                 [](ScenarioConfig& c) -> FieldRef { return &c.cw_max; }},
    {"mac.retry_limit",            [](ScenarioConfig& c) -> FieldRef { return &c.retry_limit; }},
    {"mac.block_ack_us",           [](ScenarioConfig& c) -> FieldRef { return &c.block_ack_us; }},
    {"mac.txop_limit_us",          [](ScenarioConfig& c) -> FieldRef { return &c.txop_limit_us; }},
    {"mac.max_ampdu",              [](ScenarioConfig& c) -> FieldRef { return &c.max_ampdu; }},
    {"mac.buffer_packets",         [](ScenarioConfig& c) -> FieldRef { return &c.buffer_packets; }},
    {"mlo.switch_delay_us",        [](ScenarioConfig& c) -> FieldRef { return &c.switch_delay_us; }},
    {"coordination.nulling_db",    [](ScenarioConfig& c) -> FieldRef { return &c.nulling_db; }},
    {"coordination.sounding_us",   [](ScenarioConfig& c) -> FieldRef { return &c.sounding_us; }},
};
// clang-format on

const NumericField* find_numeric(std::string_view key) {
  for (const auto& f : kNumeric) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

const std::set<std::string_view> kSections = {"run",  "topology",     "links",  "phy",
                                              "mac",  "mlo", "coordination", "traffic"};

const std::set<std::string_view> kRequired = {"run.duration_s", "run.seed", "links.count",
                                              "links.bandwidth_mhz", "links.freq_ghz"};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto next = s.find(sep, pos);
    const auto piece = trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (!piece.empty()) out.push_back(piece);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <class Int>
std::optional<Int> to_int(std::string_view s) {
  Int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Assigns text to a numeric field; returns an error message or "".
std::string assign_text(FieldRef ref, std::string_view text) {
  return std::visit(
      [&](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
          auto v = to_int<T>(text);
          if (!v) return "expected an integer, got '" + std::string(text) + "'";
          *p = *v;
        } else {
          auto v = to_double(text);
          if (!v) return "expected a number, got '" + std::string(text) + "'";
          *p = *v;
        }
        return {};
      },
      ref);
}

struct SourceLines {
  std::map<std::string, int> keys;
  std::vector<int> aps, stas, flows, rtwt, modes;

  int key(const std::string& k) const {
    auto it = keys.find(k);
    return it == keys.end() ? 0 : it->second;
  }
  static int at(const std::vector<int>& v, std::size_t i) { return i < v.size() ? v[i] : 0; }
};

using Attrs = std::vector<std::pair<std::string_view, std::string_view>>;

struct Issues {
  std::vector<ConfigIssue> list;
  void add(int line, std::string msg) { list.push_back({line, std::move(msg)}); }
};

bool parse_attrs(std::span<const std::string_view> toks, const std::set<std::string_view>& allowed,
                 Attrs& out, int line, Issues& issues) {
  bool ok = true;
  for (auto t : toks) {
    const auto eq = t.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      issues.add(line, "expected attr=value, got '" + std::string(t) + "'");
      ok = false;
      continue;
    }
    const auto k = t.substr(0, eq);
    if (!allowed.count(k)) {
      issues.add(line, "unknown attribute '" + std::string(k) + "'");
      ok = false;
      continue;
    }
    out.emplace_back(k, t.substr(eq + 1));
  }
  return ok;
}

std::optional<std::string_view> attr(const Attrs& a, std::string_view k) {
  for (const auto& [key, v] : a) {
    if (key == k) return v;
  }
  return std::nullopt;
}

template <class T>
void num_attr(const Attrs& a, std::string_view k, T& dst, int line, Issues& issues, bool required = false) {
  auto v = attr(a, k);
  if (!v) {
    if (required) issues.add(line, "missing attribute '" + std::string(k) + "'");
    return;
  }
  if constexpr (std::is_same_v<T, int>) {
    if (auto x = to_int<int>(*v)) {
      dst = *x;
      return;
    }
  } else {
    if (auto x = to_double(*v)) {
      dst = *x;
      return;
    }
  }
  issues.add(line, "bad value for '" + std::string(k) + "': '" + std::string(*v) + "'");
}

std::optional<TrafficModel> parse_model(std::string_view s) {
  if (s == "onoff") return TrafficModel::OnOff;
  if (s == "poisson") return TrafficModel::Poisson;
  if (s == "cbr") return TrafficModel::Cbr;
  return std::nullopt;
}

std::string_view model_name(TrafficModel m) {
  switch (m) {
    case TrafficModel::OnOff: return "onoff";
    case TrafficModel::Poisson: return "poisson";
    case TrafficModel::Cbr: return "cbr";
  }
  return "?";
}

std::optional<TrafficClass> parse_class(std::string_view s) {
  if (s == "be") return TrafficClass::BestEffort;
  if (s == "ts") return TrafficClass::TimeSensitive;
  return std::nullopt;
}

void parse_entry(ScenarioConfig& c, SourceLines& lines, const std::string& full, std::string_view value,
                 int line, bool& mcs_seen, Issues& issues) {
  const auto toks = tokens(value);
  if (toks.empty()) {
    issues.add(line, full + " entry is empty");
    return;
  }
  const std::span<const std::string_view> rest(toks.begin() + 1, toks.end());
  Attrs a;
  if (full == "topology.ap") {
    ApConfig ap;
    ap.name = std::string(toks[0]);
    if (!parse_attrs(rest, {"x", "y", "antennas", "streams"}, a, line, issues)) return;
    num_attr(a, "x", ap.pos.x, line, issues, true);
    num_attr(a, "y", ap.pos.y, line, issues, true);
    num_attr(a, "antennas", ap.antennas, line, issues);
    num_attr(a, "streams", ap.streams, line, issues);
    c.aps.push_back(ap);
    lines.aps.push_back(line);
  } else if (full == "topology.sta") {
    StaConfig sta;
    sta.name = std::string(toks[0]);
    if (!parse_attrs(rest, {"x", "y", "antennas", "ap"}, a, line, issues)) return;
    num_attr(a, "x", sta.pos.x, line, issues, true);
    num_attr(a, "y", sta.pos.y, line, issues, true);
    num_attr(a, "antennas", sta.antennas, line, issues);
    if (auto v = attr(a, "ap")) {
      sta.ap = std::string(*v);
    } else {
      issues.add(line, "missing attribute 'ap'");
    }
    c.stas.push_back(sta);
    lines.stas.push_back(line);
  } else if (full == "traffic.flow") {
    FlowConfig f;
    f.name = std::string(toks[0]);
    if (!parse_attrs(rest, {"src", "dst", "model", "mean_on_ms", "mean_off_ms", "rate_mbps", "packet_bytes",
                            "class", "start_ms"},
                     a, line, issues)) {
      return;
    }
    if (auto v = attr(a, "src")) f.src = std::string(*v); else issues.add(line, "missing attribute 'src'");
    if (auto v = attr(a, "dst")) f.dst = std::string(*v); else issues.add(line, "missing attribute 'dst'");
    if (auto v = attr(a, "model")) {
      if (auto m = parse_model(*v)) f.model = *m; else issues.add(line, "unknown traffic model '" + std::string(*v) + "'");
    }
    if (auto v = attr(a, "class")) {
      if (auto k = parse_class(*v)) f.cls = *k; else issues.add(line, "unknown traffic class '" + std::string(*v) + "'");
    }
    num_attr(a, "mean_on_ms", f.mean_on_ms, line, issues);
    num_attr(a, "mean_off_ms", f.mean_off_ms, line, issues);
    num_attr(a, "rate_mbps", f.rate_mbps, line, issues);
    num_attr(a, "packet_bytes", f.packet_bytes, line, issues);
    num_attr(a, "start_ms", f.start_ms, line, issues);
    c.flows.push_back(f);
    lines.flows.push_back(line);
  } else if (full == "phy.mcs") {
    if (!mcs_seen) {
      c.mcs.clear();
      mcs_seen = true;
    }
    if (toks.size() != 4) {
      issues.add(line, "mcs row needs: index bits num/den min_sinr_db");
      return;
    }
    McsEntry e;
    auto idx = to_int<int>(toks[0]);
    auto bits = to_int<int>(toks[1]);
    auto rate = split(toks[2], '/');
    auto thr = to_double(toks[3]);
    std::optional<int> num, den;
    if (rate.size() == 2) {
      num = to_int<int>(rate[0]);
      den = to_int<int>(rate[1]);
    }
    if (!idx || !bits || !num || !den || !thr || *den <= 0 || *num <= 0) {
      issues.add(line, "malformed mcs row");
      return;
    }
    e.index = *idx;
    e.bits_per_symbol = *bits;
    e.rate = {*num, *den};
    e.min_sinr_db = *thr;
    c.mcs.push_back(e);
  } else if (full == "mac.rtwt") {
    RtwtConfig r;
    if (!parse_attrs(toks, {"owner", "start_us", "duration_us", "period_us", "flows", "links"}, a, line, issues)) return;
    if (auto v = attr(a, "owner")) r.owner = std::string(*v); else issues.add(line, "missing attribute 'owner'");
    num_attr(a, "start_us", r.start_us, line, issues, true);
    num_attr(a, "duration_us", r.duration_us, line, issues, true);
    num_attr(a, "period_us", r.period_us, line, issues, true);
    if (auto v = attr(a, "flows")) {
      for (auto f : split(*v, ',')) r.flows.emplace_back(f);
    }
    if (auto v = attr(a, "links")) {
      for (auto l : split(*v, ',')) {
        if (auto x = to_int<int>(l)) r.links.push_back(*x); else issues.add(line, "bad link id '" + std::string(l) + "'");
      }
    }
    c.rtwt.push_back(r);
    lines.rtwt.push_back(line);
  } else if (full == "mlo.mode") {
    if (toks.size() != 2) {
      issues.add(line, "mode entry needs: device mode");
      return;
    }
    auto m = parse_mlo_mode(toks[1]);
    if (!m) {
      issues.add(line, "unknown MLO mode '" + std::string(toks[1]) + "'");
      return;
    }
    c.modes.push_back({std::string(toks[0]), *m});
    lines.modes.push_back(line);
  }
}

bool is_entry(const std::string& full) {
  return full == "topology.ap" || full == "topology.sta" || full == "traffic.flow" || full == "phy.mcs" ||
         full == "mac.rtwt" || full == "mlo.mode";
}

void validate_impl(const ScenarioConfig& c, const SourceLines& L, Issues& issues) {
  auto key_issue = [&](const char* key, std::string msg) { issues.add(L.key(key), std::move(msg)); };
  if (!(c.duration_s > 0.0)) key_issue("run.duration_s", "run.duration_s must be positive");
  if (c.link_count < 1 || c.link_count > 16) key_issue("links.count", "links.count must be within 1..16");
  if (!valid_bandwidth(c.bandwidth_mhz)) key_issue("links.bandwidth_mhz", "links.bandwidth_mhz must be 20, 40, 80, 160 or 320");
  if (!(c.freq_ghz > 0.0)) key_issue("links.freq_ghz", "links.freq_ghz must be positive");
  if (!(c.per >= 0.0 && c.per < 1.0)) key_issue("phy.per", "phy.per must lie in [0, 1)");
  if (!(c.symbol_us > 0.0)) key_issue("phy.symbol_us", "phy.symbol_us must be positive");
  if (c.preamble_us < 0.0) key_issue("phy.preamble_us", "phy.preamble_us must be non-negative");
  if (!(c.slot_us > 0.0) || !(c.sifs_us > 0.0) || !(c.difs_us > 0.0) || c.block_ack_us < 0.0) {
    key_issue("mac.slot_us", "EDCA timings must be positive");
  }
  if (c.cw_min < 1 || c.cw_max < c.cw_min) key_issue("mac.cw_min", "need 1 <= cw_min <= cw_max");
  if (c.retry_limit < 0 || c.retry_limit > 255) key_issue("mac.retry_limit", "mac.retry_limit must be within 0..255");
  if (!(c.txop_limit_us > 0.0)) key_issue("mac.txop_limit_us", "mac.txop_limit_us must be positive");
  if (c.max_ampdu < 1) key_issue("mac.max_ampdu", "mac.max_ampdu must be at least 1");
  if (c.buffer_packets < 1) key_issue("mac.buffer_packets", "mac.buffer_packets must be at least 1");
  if (c.switch_delay_us < 0.0) key_issue("mlo.switch_delay_us", "mlo.switch_delay_us must be non-negative");
  if (c.sounding_us < 0.0) key_issue("coordination.sounding_us", "coordination.sounding_us must be non-negative");
  try {
    validate_mcs_table(c.mcs);
  } catch (const std::invalid_argument& e) {
    issues.add(0, std::string("mcs table: ") + e.what());
  }

  std::map<std::string, int> kind;  // 0 ap, 1 sta
  for (std::size_t i = 0; i < c.aps.size(); ++i) {
    const auto& ap = c.aps[i];
    const int line = SourceLines::at(L.aps, i);
    if (!kind.emplace(ap.name, 0).second) issues.add(line, "duplicate device name '" + ap.name + "'");
    if (ap.antennas < 1 || ap.streams < 1 || ap.streams > ap.antennas) {
      issues.add(line, "AP " + ap.name + " needs 1 <= streams <= antennas");
    }
  }
  for (std::size_t i = 0; i < c.stas.size(); ++i) {
    const auto& sta = c.stas[i];
    const int line = SourceLines::at(L.stas, i);
    if (!kind.emplace(sta.name, 1).second) issues.add(line, "duplicate device name '" + sta.name + "'");
    if (sta.antennas < 1) issues.add(line, "STA " + sta.name + " needs at least one antenna");
    auto it = kind.find(sta.ap);
    const bool ap_ok = std::any_of(c.aps.begin(), c.aps.end(), [&](const ApConfig& a) { return a.name == sta.ap; });
    if (!ap_ok) issues.add(line, "STA " + sta.name + " references undefined AP '" + sta.ap + "'");
    (void)it;
  }
  std::set<std::string> flow_names;
  for (std::size_t i = 0; i < c.flows.size(); ++i) {
    const auto& f = c.flows[i];
    const int line = SourceLines::at(L.flows, i);
    if (!flow_names.insert(f.name).second) issues.add(line, "duplicate flow name '" + f.name + "'");
    if (!kind.count(f.src)) issues.add(line, "flow " + f.name + " references undefined device '" + f.src + "'");
    if (!kind.count(f.dst)) issues.add(line, "flow " + f.name + " references undefined device '" + f.dst + "'");
    if (f.src == f.dst) issues.add(line, "flow " + f.name + " has identical source and destination");
    if (!(f.rate_mbps > 0.0) || f.packet_bytes < 1) issues.add(line, "flow " + f.name + " needs positive rate and packet size");
    if (f.model == TrafficModel::OnOff && (!(f.mean_on_ms > 0.0) || !(f.mean_off_ms > 0.0))) {
      issues.add(line, "flow " + f.name + " needs positive on/off means");
    }
    if (f.start_ms < 0.0) issues.add(line, "flow " + f.name + " has a negative start");
  }

  RtwtCalendar cal;
  for (std::size_t i = 0; i < c.rtwt.size(); ++i) {
    const auto& r = c.rtwt[i];
    const int line = SourceLines::at(L.rtwt, i);
    auto k = kind.find(r.owner);
    if (k == kind.end() || k->second != 0) {
      issues.add(line, "R-TWT owner '" + r.owner + "' is not an AP");
      continue;
    }
    for (const auto& fname : r.flows) {
      auto f = std::find_if(c.flows.begin(), c.flows.end(), [&](const FlowConfig& x) { return x.name == fname; });
      if (f == c.flows.end()) {
        issues.add(line, "R-TWT member flow '" + fname + "' is undefined");
      } else if (f->src != r.owner) {
        issues.add(line, "R-TWT member flow '" + fname + "' does not originate at " + r.owner);
      }
    }
    for (int l : r.links) {
      if (l < 0 || l >= c.link_count) issues.add(line, "R-TWT link " + std::to_string(l) + " out of range");
    }
    if (r.start_us < 0.0 || !(r.duration_us > 0.0) || !(r.period_us > r.duration_us)) {
      issues.add(line, "R-TWT SP needs start >= 0 and 0 < duration < period");
      continue;
    }
    RtwtSp sp;
    sp.owner = static_cast<int>(i);
    sp.start = nanoseconds(std::llround(r.start_us * 1000.0));
    sp.duration = nanoseconds(std::llround(r.duration_us * 1000.0));
    sp.period = nanoseconds(std::llround(r.period_us * 1000.0));
    sp.links = r.links;
    try {
      cal.schedule(sp);
    } catch (const std::invalid_argument& e) {
      issues.add(line, e.what());
    }
  }

  std::set<std::string> mode_devices;
  for (std::size_t i = 0; i < c.modes.size(); ++i) {
    const int line = SourceLines::at(L.modes, i);
    if (!kind.count(c.modes[i].device)) issues.add(line, "mode for undefined device '" + c.modes[i].device + "'");
    if (!mode_devices.insert(c.modes[i].device).second) issues.add(line, "duplicate mode for '" + c.modes[i].device + "'");
  }

  if (c.scheme == CoordScheme::Cbf && !c.nulling_db) {
    key_issue("coordination.scheme", "coordination.scheme=cbf requires coordination.nulling_db");
  }
  if (c.nulling_db && *c.nulling_db < 0.0) key_issue("coordination.nulling_db", "coordination.nulling_db must be non-negative");
  for (const auto& m : c.members) {
    auto k = kind.find(m);
    if (k == kind.end() || k->second != 0) key_issue("coordination.members", "coordination member '" + m + "' is not an AP");
  }
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig c;
  SourceLines lines;
  Issues issues;
  std::string section;
  bool mcs_seen = false;
  std::set<std::string> seen;

  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.add(lineno, "malformed section header");
        continue;
      }
      const auto name = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(name)) {
        issues.add(lineno, "unknown section [" + std::string(name) + "]");
        section.clear();
        continue;
      }
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      issues.add(lineno, "expected key = value");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (section.empty()) {
      issues.add(lineno, "key '" + std::string(key) + "' outside of a known section");
      continue;
    }
    const std::string full = section + "." + std::string(key);
    if (is_entry(full)) {
      parse_entry(c, lines, full, value, lineno, mcs_seen, issues);
      continue;
    }
    if (!seen.insert(full).second) {
      issues.add(lineno, "duplicate key " + full);
      continue;
    }
    lines.keys[full] = lineno;
    if (const auto* f = find_numeric(full)) {
      if (auto err = assign_text(f->ref(c), value); !err.empty()) issues.add(lineno, full + ": " + err);
    } else if (full == "run.name") {
      if (value.empty() || value.find_first_of(" \t/") != std::string_view::npos) {
        issues.add(lineno, "run.name must be a single word without '/'");
      } else {
        c.name = std::string(value);
      }
    } else if (full == "mac.preemption") {
      if (value == "on" || value == "true" || value == "1") {
        c.preemption = true;
      } else if (value == "off" || value == "false" || value == "0") {
        c.preemption = false;
      } else {
        issues.add(lineno, "mac.preemption must be on or off");
      }
    } else if (full == "mlo.default_mode") {
      if (auto m = parse_mlo_mode(value)) c.default_mode = *m; else issues.add(lineno, "unknown MLO mode '" + std::string(value) + "'");
    } else if (full == "coordination.scheme") {
      if (auto s = parse_coord_scheme(value)) c.scheme = *s; else issues.add(lineno, "unknown coordination scheme '" + std::string(value) + "'");
    } else if (full == "coordination.members") {
      for (auto m : split(value, ',')) c.members.emplace_back(m);
    } else {
      issues.add(lineno, "unknown key " + full);
    }
  }
  for (auto req : kRequired) {
    if (!seen.count(std::string(req))) issues.add(0, "missing required key " + std::string(req));
  }
  if (issues.list.empty()) validate_impl(c, lines, issues);
  if (!issues.list.empty()) throw ConfigError(std::move(issues.list));
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read scenario file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

void validate_scenario(const ScenarioConfig& cfg) {
  Issues issues;
  validate_impl(cfg, SourceLines{}, issues);
  if (!issues.list.empty()) throw ConfigError(std::move(issues.list));
}

std::string serialize_scenario(const ScenarioConfig& c) {
  std::ostringstream os;
  auto num = [](double v) { return format_number(v); };
  os << "[run]\n"
     << "name = " << c.name << '\n'
     << "duration_s = " << num(c.duration_s) << '\n'
     << "seed = " << c.seed << '\n';
  os << "\n[topology]\n";
  for (const auto& ap : c.aps) {
    os << "ap = " << ap.name << " x=" << num(ap.pos.x) << " y=" << num(ap.pos.y) << " antennas=" << ap.antennas
       << " streams=" << ap.streams << '\n';
  }
  for (const auto& s : c.stas) {
    os << "sta = " << s.name << " x=" << num(s.pos.x) << " y=" << num(s.pos.y) << " antennas=" << s.antennas
       << " ap=" << s.ap << '\n';
  }
  os << "\n[links]\n"
     << "count = " << c.link_count << '\n'
     << "bandwidth_mhz = " << c.bandwidth_mhz << '\n'
     << "freq_ghz = " << num(c.freq_ghz) << '\n';
  os << "\n[phy]\n"
     << "tx_power_dbm = " << num(c.tx_power_dbm) << '\n'
     << "noise_figure_db = " << num(c.noise_figure_db) << '\n'
     << "noise_density_dbm_hz = " << num(c.noise_density_dbm_hz) << '\n'
     << "per = " << num(c.per) << '\n'
     << "preamble_us = " << num(c.preamble_us) << '\n'
     << "symbol_us = " << num(c.symbol_us) << '\n'
     << "cca_dbm = " << num(c.cca_dbm) << '\n';
  for (const auto& m : c.mcs) {
    os << "mcs = " << m.index << ' ' << m.bits_per_symbol << ' ' << m.rate.num << '/' << m.rate.den << ' '
       << num(m.min_sinr_db) << '\n';
  }
  os << "\n[mac]\n"
     << "slot_us = " << num(c.slot_us) << '\n'
     << "sifs_us = " << num(c.sifs_us) << '\n'
     << "difs_us = " << num(c.difs_us) << '\n'
     << "cw_min = " << c.cw_min << '\n'
     << "cw_max = " << c.cw_max << '\n'
     << "retry_limit = " << c.retry_limit << '\n'
     << "block_ack_us = " << num(c.block_ack_us) << '\n'
     << "txop_limit_us = " << num(c.txop_limit_us) << '\n'
     << "max_ampdu = " << c.max_ampdu << '\n'
     << "buffer_packets = " << c.buffer_packets << '\n'
     << "preemption = " << (c.preemption ? "on" : "off") << '\n';
  for (const auto& r : c.rtwt) {
    os << "rtwt = owner=" << r.owner << " start_us=" << num(r.start_us) << " duration_us=" << num(r.duration_us)
       << " period_us=" << num(r.period_us);
    if (!r.flows.empty()) {
      os << " flows=";
      for (std::size_t i = 0; i < r.flows.size(); ++i) os << (i ? "," : "") << r.flows[i];
    }
    if (!r.links.empty()) {
      os << " links=";
      for (std::size_t i = 0; i < r.links.size(); ++i) os << (i ? "," : "") << r.links[i];
    }
    os << '\n';
  }
  os << "\n[mlo]\n"
     << "default_mode = " << to_string(c.default_mode) << '\n'
     << "switch_delay_us = " << num(c.switch_delay_us) << '\n';
  for (const auto& m : c.modes) os << "mode = " << m.device << ' ' << to_string(m.mode) << '\n';
  os << "\n[coordination]\n"
     << "scheme = " << to_string(c.scheme) << '\n';
  if (c.nulling_db) os << "nulling_db = " << num(*c.nulling_db) << '\n';
  os << "sounding_us = " << num(c.sounding_us) << '\n';
  if (!c.members.empty()) {
    os << "members = ";
    for (std::size_t i = 0; i < c.members.size(); ++i) os << (i ? "," : "") << c.members[i];
    os << '\n';
  }
  os << "\n[traffic]\n";
  for (const auto& f : c.flows) {
    os << "flow = " << f.name << " src=" << f.src << " dst=" << f.dst << " model=" << model_name(f.model)
       << " mean_on_ms=" << num(f.mean_on_ms) << " mean_off_ms=" << num(f.mean_off_ms)
       << " rate_mbps=" << num(f.rate_mbps) << " packet_bytes=" << f.packet_bytes
       << " class=" << (f.cls == TrafficClass::TimeSensitive ? "ts" : "be") << " start_ms=" << num(f.start_ms)
       << '\n';
  }
  return os.str();
}

std::string scenario_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_scenario(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

constexpr std::string_view kCaseStudy = R"(# Two neighboring BSSs sharing two 160 MHz links in the 6 GHz band.
[run]
name = %NAME%
duration_s = 120
seed = 1

[topology]
ap = ap1 x=5 y=10 antennas=4 streams=2
ap = ap2 x=10 y=10 antennas=4 streams=2
sta = sta1 x=5 y=12.5 antennas=2 ap=ap1
sta = sta2 x=10 y=12.5 antennas=2 ap=ap2

[links]
count = 2
bandwidth_mhz = 160
freq_ghz = 6

[phy]
tx_power_dbm = 20
noise_figure_db = 7
noise_density_dbm_hz = -174
per = 0.1
preamble_us = 44
symbol_us = 13.6

[mac]
slot_us = 9
sifs_us = 16
difs_us = 34
cw_min = 15
cw_max = 1023
retry_limit = 7
block_ack_us = 32
txop_limit_us = 5484
max_ampdu = 1024
buffer_packets = 10240
preemption = off

[mlo]
default_mode = emlmr_str

[coordination]
%COORD%

[traffic]
flow = f1 src=ap1 dst=sta1 model=onoff mean_on_ms=4.15 mean_off_ms=4.15 rate_mbps=4000 packet_bytes=1500
flow = f2 src=ap2 dst=sta2 model=onoff mean_on_ms=4.15 mean_off_ms=4.15 rate_mbps=4000 packet_bytes=1500
)";

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) {
    s.replace(p, from.size(), to);
  }
  return s;
}

}  // namespace

std::vector<std::string> preset_names() { return {"case-study-mlo", "case-study-cbf"}; }

std::string preset_text(std::string_view name) {
  std::string coord;
  if (name == "case-study-mlo") {
    coord = "scheme = none";
  } else if (name == "case-study-cbf") {
    coord = "scheme = cbf\nnulling_db = 30";
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return replace_all(replace_all(std::string(kCaseStudy), "%NAME%", name), "%COORD%", coord);
}

ScenarioConfig preset(std::string_view name) { return parse_scenario(preset_text(name)); }

std::vector<std::string> numeric_keys() {
  std::vector<std::string> out;
  for (const auto& f : kNumeric) out.emplace_back(f.key);
  return out;
}

bool is_numeric_key(std::string_view key) { return find_numeric(key) != nullptr; }

void set_numeric(ScenarioConfig& cfg, std::string_view key, double value) {
  const auto* f = find_numeric(key);
  if (f == nullptr) throw ConfigError("'" + std::string(key) + "' is not a numeric scenario key");
  if (!std::isfinite(value)) throw ConfigError("non-finite value for " + std::string(key));
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
          if (value != std::floor(value) || (value < 0.0 && std::is_same_v<T, std::uint64_t>) ||
              std::fabs(value) > 9.0e15) {
            throw ConfigError(std::string(key) + " needs an integer value");
          }
          *p = static_cast<T>(value);
        } else {
          *p = value;
        }
      },
      f->ref(cfg));
}

double get_numeric(const ScenarioConfig& cfg, std::string_view key) {
  const auto* f = find_numeric(key);
  if (f == nullptr) throw ConfigError("'" + std::string(key) + "' is not a numeric scenario key");
  auto& mut = const_cast<ScenarioConfig&>(cfg);
  return std::visit(
      [&](auto* p) -> double {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, std::optional<double>>) {
          if (!*p) throw ConfigError(std::string(key) + " is not set");
          return **p;
        } else {
          return static_cast<double>(*p);
        }
      },
      f->ref(mut));
}

}  // namespace uhrsim
