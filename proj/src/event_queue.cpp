#include "uhrsim/event_queue.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>

namespace uhrsim {

namespace {

// std heap functions build a max-heap; invert for earliest-first.
struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
    return a.seq > b.seq;
  }
};

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Arrival: return "arrival";
    case EventKind::Wake: return "wake";
    case EventKind::AccessGrant: return "grant";
    case EventKind::TxEnd: return "txend";
    case EventKind::SlotStart: return "slot";
    case EventKind::SpStart: return "sp-start";
    case EventKind::SpEnd: return "sp-end";
    case EventKind::Resume: return "resume";
    case EventKind::Preempt: return "preempt";
    case EventKind::User: return "user";
  }
  return "?";
}

EventHandle EventQueue::push(Event e) {
  e.seq = next_seq_++;
  heap_.push_back(e);
  std::push_heap(heap_.begin(), heap_.end(), Later{});
  return EventHandle{e.seq};
}

void EventQueue::drop_cancelled_top() {
  while (!heap_.empty()) {
    auto it = cancelled_.find(heap_.front().seq);
    if (it == cancelled_.end()) return;
    cancelled_.erase(it);
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    heap_.pop_back();
  }
}

std::optional<Event> EventQueue::pop() {
  drop_cancelled_top();
  if (heap_.empty()) return std::nullopt;
  std::pop_heap(heap_.begin(), heap_.end(), Later{});
  Event e = heap_.back();
  heap_.pop_back();
  return e;
}

std::optional<SimTime> EventQueue::next_time() {
  drop_cancelled_top();
  if (heap_.empty()) return std::nullopt;
  return heap_.front().fire_at;
}

bool EventQueue::cancel(EventHandle h) {
  if (!h.valid() || cancelled_.contains(h.seq)) return false;
  const bool present = std::any_of(heap_.begin(), heap_.end(),
                                   [&](const Event& e) { return e.seq == h.seq; });
  if (!present) return false;
  cancelled_.insert(h.seq);
  return true;
}

std::optional<Event> EventQueue::find(EventHandle h) const {
  if (!h.valid() || cancelled_.contains(h.seq)) return std::nullopt;
  for (const auto& e : heap_) {
    if (e.seq == h.seq) return e;
  }
  return std::nullopt;
}

EventHandle Engine::schedule(Event e) {
  if (e.fire_at < now_) {
    std::fprintf(stderr,
                 "uhrsim: event '%.*s' scheduled in the past (fire_at=%lld ns, now=%lld ns)\n",
                 static_cast<int>(to_string(e.kind).size()), to_string(e.kind).data(),
                 static_cast<long long>(e.fire_at.ns()), static_cast<long long>(now_.ns()));
    std::abort();
  }
  return queue_.push(e);
}

EventHandle Engine::schedule_at(SimTime at, EventKind kind, std::int32_t target,
                                std::int32_t link, std::int64_t payload) {
  Event e;
  e.fire_at = at;
  e.kind = kind;
  e.target = target;
  e.link = link;
  e.payload = payload;
  return schedule(e);
}

RunSummary Engine::run_until(SimTime t_end, EventHandler& handler) {
  const auto wall_start = std::chrono::steady_clock::now();
  std::uint64_t count = 0;
  while (true) {
    auto next = queue_.next_time();
    if (!next || *next > t_end) break;
    Event e = *queue_.pop();
    now_ = e.fire_at;
    ++count;
    ++processed_;
    if (trace_) {
      *trace_ << e.fire_at.ns() << ' ' << to_string(e.kind) << ' ' << e.target << ' ' << e.link
              << '\n';
    }
    handler.on_event(e, *this);
  }
  RunSummary summary;
  summary.events = count;
  summary.clock = now_;
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return summary;
}

}  // namespace uhrsim
