#include "uhrsim/coordination.hpp"

#include <algorithm>
#include <stdexcept>

#include "uhrsim/errors.hpp"
#include "uhrsim/phy.hpp"

namespace uhrsim {

std::string_view to_string(CoordScheme s) {
  switch (s) {
    case CoordScheme::None: return "none";
    case CoordScheme::Ctdma: return "ctdma";
    case CoordScheme::Cofdma: return "cofdma";
    case CoordScheme::Cbf: return "cbf";
  }
  return "?";
}

std::optional<CoordScheme> parse_coord_scheme(std::string_view text) {
  if (text == "none") return CoordScheme::None;
  if (text == "ctdma") return CoordScheme::Ctdma;
  if (text == "cofdma") return CoordScheme::Cofdma;
  if (text == "cbf") return CoordScheme::Cbf;
  return std::nullopt;
}

bool CoordinationSet::contains(int device) const { return rank(device) >= 0; }

int CoordinationSet::rank(int device) const {
  auto it = std::find(members.begin(), members.end(), device);
  return it == members.end() ? -1 : static_cast<int>(it - members.begin());
}

bool null_budget_check(int antennas, int served_streams, int null_directions) {
  return antennas >= served_streams + null_directions;
}

CoordinationSet form_set(const std::vector<CoordCandidate>& aps, CoordScheme scheme,
                         const CoordParams& params) {
  CoordinationSet set;
  set.scheme = scheme;
  if (scheme == CoordScheme::None) return set;
  if (aps.size() < 2) {
    throw ConfigError("coordination set needs at least two APs" +
                      (aps.empty() ? std::string() : ", got only " + aps.front().name));
  }
  if (params.nulling_db < 0.0) throw ConfigError("nulling_db must be non-negative");
  for (const auto& ap : aps) {
    if (!ap.same_domain) throw ConfigError("AP " + ap.name + " is outside the administrative domain");
    if (scheme == CoordScheme::Cbf && !null_budget_check(ap.antennas, ap.streams, ap.null_directions)) {
      throw ConfigError("AP " + ap.name + " lacks spatial degrees of freedom for CBF: " +
                        std::to_string(ap.antennas) + " antennas < " + std::to_string(ap.streams) +
                        " streams + " + std::to_string(ap.null_directions) + " nulls");
    }
    set.members.push_back(ap.device);
  }
  std::sort(set.members.begin(), set.members.end());
  if (std::adjacent_find(set.members.begin(), set.members.end()) != set.members.end()) {
    throw ConfigError("duplicate AP in coordination set");
  }
  if (scheme == CoordScheme::Cbf) {
    set.nulling_db = params.nulling_db;
    set.sounding = params.sounding;
  }
  return set;
}

ContentionDomain::ContentionDomain(int links, int devices)
    : links_(links),
      devices_(devices),
      adj_(static_cast<std::size_t>(links) * devices * devices, 0),
      supp_(adj_.size(), 0.0) {}

std::size_t ContentionDomain::index(int link, int a, int b) const {
  if (link < 0 || link >= links_ || a < 0 || a >= devices_ || b < 0 || b >= devices_) {
    throw std::out_of_range("contention domain index");
  }
  return (static_cast<std::size_t>(link) * devices_ + a) * devices_ + b;
}

void ContentionDomain::set_edge(int link, int a, int b, bool on) {
  if (a == b) return;
  adj_[index(link, a, b)] = on;
  adj_[index(link, b, a)] = on;
}

void ContentionDomain::set_suppression(int link, int tx, int rx, double db) {
  if (db < 0.0) throw std::invalid_argument("suppression must be non-negative");
  supp_[index(link, tx, rx)] = db;
}

std::vector<int> ContentionDomain::neighbors(int link, int device) const {
  std::vector<int> out;
  for (int d = 0; d < devices_; ++d) {
    if (d != device && edge(link, device, d)) out.push_back(d);
  }
  return out;
}

ContentionDomain rewrite_contention(const ContentionDomain& domain, const CoordinationSet& set,
                                    const std::vector<int>& bss) {
  ContentionDomain out = domain;
  if (set.scheme != CoordScheme::Cbf) return out;
  const int n = domain.devices();
  auto member_bss = [&](int d) { return d < static_cast<int>(bss.size()) && set.contains(bss[d]); };
  for (int l = 0; l < domain.links(); ++l) {
    for (int a = 0; a < n; ++a) {
      if (!member_bss(a)) continue;
      for (int b = 0; b < n; ++b) {
        if (a == b || !member_bss(b) || bss[a] == bss[b]) continue;
        out.set_edge(l, a, b, false);
        out.set_suppression(l, a, b, set.nulling_db);
      }
    }
  }
  return out;
}

std::vector<CtdmaSlot> ctdma_slots(SimTime txop, const std::vector<int>& members, SimTime sifs) {
  const auto n = static_cast<std::int64_t>(members.size());
  if (n < 2) throw std::invalid_argument("C-TDMA needs at least two members");
  const SimTime usable = txop - sifs * (n - 1);
  if (usable.ns() <= 0) throw std::invalid_argument("TXOP too short for C-TDMA slots");
  const SimTime slot = nanoseconds(usable.ns() / n);
  std::vector<CtdmaSlot> out;
  SimTime offset;
  for (int m : members) {
    out.push_back({m, offset, slot});
    offset += slot + sifs;
  }
  return out;
}

std::vector<int> cofdma_split(int bandwidth_mhz, int members) {
  if (members < 2) throw ConfigError("C-OFDMA needs at least two members");
  if (!valid_bandwidth(bandwidth_mhz) || bandwidth_mhz % members != 0 ||
      !valid_bandwidth(bandwidth_mhz / members)) {
    throw ConfigError(std::to_string(bandwidth_mhz) + " MHz cannot be split equally among " +
                      std::to_string(members) + " APs");
  }
  return std::vector<int>(static_cast<std::size_t>(members), bandwidth_mhz / members);
}

}  // namespace uhrsim
