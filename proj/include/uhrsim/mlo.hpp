#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "uhrsim/mac.hpp"
#include "uhrsim/shared_queue.hpp"
#include "uhrsim/sim_time.hpp"

namespace uhrsim {

enum class MloMode { Mlsr, Emlsr, EmlmrStr, EmlmrNstr };

std::string_view to_string(MloMode mode);
std::optional<MloMode> parse_mlo_mode(std::string_view text);

struct MldConfig {
  MloMode mode = MloMode::EmlmrStr;
  std::vector<int> links;  // links[0] is the designated MLSR link
  int radios = 2;
  SimTime switch_delay;    // EMLSR radio switch back after a TXOP

  /// MLSR and EMLSR carry at most one full-rate transmission at a time.
  bool single_radio() const { return mode == MloMode::Mlsr || mode == MloMode::Emlsr; }
};

/// What an MLD is doing on one of its links.
struct LinkActivity {
  bool transmitting = false;
  SimTime tx_start;
  SimTime tx_end;
  SimTime hold_until;  // contention suspended until this instant
};

/// Links the device may contend on right now.
std::vector<int> eligible_links(const MldConfig& mld, std::span<const LinkActivity> activity,
                                SimTime now);

struct GrantCheck {
  bool allowed = true;
  SimTime defer_until;  // when !allowed: retry once this instant passes
};

/// Mode rules applied at the moment a backoff expires on `link`.
/// NSTR: a transmission may not start while a paired link carries one that
/// started more than one slot earlier.
GrantCheck check_grant(const MldConfig& mld, int link, std::span<const LinkActivity> activity,
                       SimTime now, SimTime slot);

/// Dequeue at grant from the single shared buffer. Concurrent grants on
/// different links receive disjoint packets. status EmptyQueue means the grant
/// is released without a transmission.
PlanResult on_grant(SharedQueue& queue, int link, const McsEntry& mcs, SimTime now,
                    const TxopLimits& limits, const RtwtCalendar& calendar, const TxopEnv& env);

struct LinkBlocking {
  int link = 0;
  double deferral_fraction = 0.0;       // any neighbor busy while backlogged
  double obss_deferral_fraction = 0.0;  // attributable to other BSSs
};

struct DeviceBlocking {
  int device = -1;
  std::vector<LinkBlocking> links;
};

}  // namespace uhrsim
