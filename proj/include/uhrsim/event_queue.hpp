#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "uhrsim/sim_time.hpp"

namespace uhrsim {

enum class EventKind : std::uint8_t {
  Arrival,      // traffic arrival of an eager flow
  Wake,         // device idle, next lazy arrival due
  AccessGrant,  // backoff expired on (device, link)
  TxEnd,        // end of a transmission (TXOP or coordinated slot)
  SlotStart,    // next member of a coordinated TXOP takes over
  SpStart,      // R-TWT service period begins
  SpEnd,        // R-TWT service period ends
  Resume,       // hold on (device, link) lifted
  Preempt,      // urgent PPDU takes over an ongoing TXOP
  User,         // free for tests and tools
};

std::string_view to_string(EventKind kind);

struct Event {
  SimTime fire_at;
  std::uint64_t seq = 0;  // assigned by the queue
  EventKind kind = EventKind::User;
  std::int32_t target = -1;
  std::int32_t link = -1;
  std::int64_t payload = 0;
};

struct EventHandle {
  std::uint64_t seq = 0;
  bool valid() const { return seq != 0; }
  friend bool operator==(EventHandle, EventHandle) = default;
};

/// Min-heap on (fire_at, seq) with lazy cancellation.
class EventQueue {
 public:
  EventHandle push(Event e);
  std::optional<Event> pop();
  bool cancel(EventHandle h);
  std::optional<Event> find(EventHandle h) const;
  std::optional<SimTime> next_time();
  std::size_t size() const { return heap_.size() - cancelled_.size(); }
  bool empty() const { return size() == 0; }

 private:
  void drop_cancelled_top();

  std::vector<Event> heap_;
  std::unordered_set<std::uint64_t> cancelled_;
  std::uint64_t next_seq_ = 1;
};

class Engine;

class EventHandler {
 public:
  virtual ~EventHandler() = default;
  virtual void on_event(const Event& e, Engine& engine) = 0;
};

struct RunSummary {
  std::uint64_t events = 0;
  double wall_seconds = 0.0;
  SimTime clock;
};

/// Single-threaded discrete-event loop.
class Engine {
 public:
  SimTime now() const { return now_; }

  /// Aborts the process when e.fire_at is earlier than now().
  EventHandle schedule(Event e);
  EventHandle schedule_at(SimTime at, EventKind kind, std::int32_t target = -1,
                          std::int32_t link = -1, std::int64_t payload = 0);
  bool cancel(EventHandle h) { return queue_.cancel(h); }
  std::optional<Event> pending(EventHandle h) const { return queue_.find(h); }
  std::size_t pending_count() const { return queue_.size(); }

  /// Processes every event with fire_at <= t_end. The clock stays at the last
  /// processed event.
  RunSummary run_until(SimTime t_end, EventHandler& handler);

  /// One line per processed event: "<fire_at_ns> <kind> <target> <link>".
  void set_trace(std::ostream* os) { trace_ = os; }
  std::uint64_t processed() const { return processed_; }

 private:
  EventQueue queue_;
  SimTime now_;
  std::uint64_t processed_ = 0;
  std::ostream* trace_ = nullptr;
};

}  // namespace uhrsim
