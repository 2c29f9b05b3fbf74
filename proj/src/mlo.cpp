#include "uhrsim/mlo.hpp"

#include <algorithm>

namespace uhrsim {

std::string_view to_string(MloMode mode) {
  switch (mode) {
    case MloMode::Mlsr: return "mlsr";
    case MloMode::Emlsr: return "emlsr";
    case MloMode::EmlmrStr: return "emlmr_str";
    case MloMode::EmlmrNstr: return "emlmr_nstr";
  }
  return "?";
}

std::optional<MloMode> parse_mlo_mode(std::string_view text) {
  if (text == "mlsr") return MloMode::Mlsr;
  if (text == "emlsr") return MloMode::Emlsr;
  if (text == "emlmr_str" || text == "str") return MloMode::EmlmrStr;
  if (text == "emlmr_nstr" || text == "nstr") return MloMode::EmlmrNstr;
  return std::nullopt;
}

std::vector<int> eligible_links(const MldConfig& mld, std::span<const LinkActivity> activity,
                                SimTime now) {
  std::vector<int> out;
  if (mld.links.empty()) return out;
  auto held = [&](int l) {
    return static_cast<std::size_t>(l) < activity.size() && activity[l].hold_until > now;
  };
  switch (mld.mode) {
    case MloMode::Mlsr:
      if (!held(mld.links.front())) out.push_back(mld.links.front());
      break;
    case MloMode::Emlsr: {
      const bool busy = std::any_of(mld.links.begin(), mld.links.end(), [&](int l) {
        return static_cast<std::size_t>(l) < activity.size() &&
               (activity[l].transmitting || activity[l].hold_until > now);
      });
      if (!busy) out = mld.links;
      break;
    }
    case MloMode::EmlmrStr:
    case MloMode::EmlmrNstr:
      for (int l : mld.links) {
        if (!held(l)) out.push_back(l);
      }
      break;
  }
  return out;
}

GrantCheck check_grant(const MldConfig& mld, int link, std::span<const LinkActivity> activity,
                       SimTime now, SimTime slot) {
  GrantCheck g;
  if (mld.mode == MloMode::Emlsr || mld.mode == MloMode::Mlsr) {
    for (int l : mld.links) {
      if (l == link || static_cast<std::size_t>(l) >= activity.size()) continue;
      if (activity[l].transmitting) {
        g.allowed = false;
        g.defer_until = std::max(g.defer_until, activity[l].tx_end + mld.switch_delay);
      }
    }
    return g;
  }
  if (mld.mode != MloMode::EmlmrNstr) return g;
  for (int l : mld.links) {
    if (l == link || static_cast<std::size_t>(l) >= activity.size()) continue;
    const auto& a = activity[l];
    if (a.transmitting && now - a.tx_start > slot) {
      g.allowed = false;
      g.defer_until = std::max(g.defer_until, a.tx_end);
    }
  }
  return g;
}

PlanResult on_grant(SharedQueue& queue, int link, const McsEntry& mcs, SimTime now,
                    const TxopLimits& limits, const RtwtCalendar& calendar, const TxopEnv& env) {
  return build_txop(queue, link, mcs, now, limits, calendar, env);
}

}  // namespace uhrsim
