#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uhrsim/sim_time.hpp"

namespace uhrsim {

enum class CoordScheme { None, Ctdma, Cofdma, Cbf };

std::string_view to_string(CoordScheme s);
std::optional<CoordScheme> parse_coord_scheme(std::string_view text);

/// One AP applying to join a coordination set.
struct CoordCandidate {
  int device = -1;
  std::string name;
  int antennas = 1;
  int streams = 1;
  int null_directions = 0;  // receive antennas of STAs in the other member BSSs
  bool same_domain = true;
};

struct CoordParams {
  double nulling_db = 0.0;
  SimTime sounding;  // CBF channel sounding charged at every TXOP start
};

struct CoordinationSet {
  std::vector<int> members;  // AP device ids, ascending
  CoordScheme scheme = CoordScheme::None;
  double nulling_db = 0.0;
  SimTime sounding;

  bool contains(int device) const;
  /// Position of the AP in member-id order, or -1.
  int rank(int device) const;
};

bool null_budget_check(int antennas, int served_streams, int null_directions);

/// Validates membership and, for CBF, the spatial budget of every member.
/// Throws ConfigError naming the offending AP.
CoordinationSet form_set(const std::vector<CoordCandidate>& aps, CoordScheme scheme,
                         const CoordParams& params);

/// Carrier-sense graph per link plus the nulling applied to each
/// transmitter -> receiver interference path (dB, 0 = none).
class ContentionDomain {
 public:
  ContentionDomain() = default;
  ContentionDomain(int links, int devices);

  int links() const { return links_; }
  int devices() const { return devices_; }

  bool edge(int link, int a, int b) const { return adj_[index(link, a, b)] != 0; }
  void set_edge(int link, int a, int b, bool on);
  double suppression_db(int link, int tx, int rx) const { return supp_[index(link, tx, rx)]; }
  void set_suppression(int link, int tx, int rx, double db);
  std::vector<int> neighbors(int link, int device) const;

  friend bool operator==(const ContentionDomain&, const ContentionDomain&) = default;

 private:
  std::size_t index(int link, int a, int b) const;

  int links_ = 0;
  int devices_ = 0;
  std::vector<char> adj_;
  std::vector<double> supp_;
};

/// bss[d] is the AP that device d belongs to (an AP maps to itself).
/// CBF drops every edge between member BSSs and applies the nulling to every
/// cross-BSS path among them. Other schemes leave the domain unchanged.
ContentionDomain rewrite_contention(const ContentionDomain& domain, const CoordinationSet& set,
                                    const std::vector<int>& bss);

struct CtdmaSlot {
  int member = -1;
  SimTime offset;  // from the start of the coordinated TXOP
  SimTime duration;
};

/// Equal slots in member order separated by SIFS. Throws std::invalid_argument
/// for fewer than two members.
std::vector<CtdmaSlot> ctdma_slots(SimTime txop, const std::vector<int>& members, SimTime sifs);

/// Equal split into valid channel widths. Throws ConfigError otherwise.
std::vector<int> cofdma_split(int bandwidth_mhz, int members);

}  // namespace uhrsim
