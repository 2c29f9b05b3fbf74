#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "uhrsim/traffic.hpp"

namespace uhrsim {

/// Single transmit buffer of a multi-link device, shared by all its links.
/// Capacity covers queued and in-flight (unacknowledged) packets.
class SharedQueue {
 public:
  explicit SharedQueue(std::size_t capacity = 10240, bool priority = false)
      : capacity_(capacity), priority_(priority) {}

  /// Drop-tail admission. Returns false when the buffer is full.
  bool push(const Packet& p) {
    if (occupancy() >= capacity_) return false;
    lane(p.cls).push_back(p);
    return true;
  }

  std::size_t capacity() const { return capacity_; }
  bool priority() const { return priority_; }
  std::size_t size() const { return lanes_[0].size() + lanes_[1].size(); }
  std::size_t in_flight() const { return in_flight_; }
  std::size_t occupancy() const { return size() + in_flight_; }
  bool empty() const { return size() == 0; }

  /// First packet in service order satisfying pred, or nullptr.
  template <class Pred>
  const Packet* find_first(Pred pred) const {
    for (const auto& l : lanes_) {
      for (const auto& p : l) {
        if (pred(p)) return &p;
      }
    }
    return nullptr;
  }

  /// Removes, in service order, packets accepted by pred while the count stays
  /// within max_count and the summed size within max_bits. Stops at the first
  /// accepted packet that would overflow max_bits (FIFO is never reordered).
  /// With force_one, the first accepted packet is taken even if oversized.
  /// Taken packets become in-flight.
  template <class Pred>
  std::vector<Packet> take(std::size_t max_count, double max_bits, bool force_one, Pred pred) {
    std::vector<Packet> out;
    double bits = 0.0;
    bool stop = false;
    for (auto& l : lanes_) {
      if (stop || out.size() >= max_count) break;
      std::vector<Packet> skipped;
      while (!l.empty() && out.size() < max_count) {
        const Packet& p = l.front();
        if (!pred(p)) {
          skipped.push_back(p);
          l.pop_front();
          continue;
        }
        const double b = p.bytes * 8.0;
        if (bits + b > max_bits && !(force_one && out.empty())) {
          stop = true;
          break;
        }
        bits += b;
        out.push_back(p);
        l.pop_front();
      }
      for (auto it = skipped.rbegin(); it != skipped.rend(); ++it) l.push_front(*it);
    }
    in_flight_ += out.size();
    return out;
  }

  /// In-flight packets go back to the head of their lane in the given order.
  void requeue_front(std::span<const Packet> packets) {
    for (auto it = packets.rbegin(); it != packets.rend(); ++it) lane(it->cls).push_front(*it);
    in_flight_ -= packets.size();
  }

  /// In-flight packets left the buffer (delivered or dropped).
  void release(std::size_t n) { in_flight_ -= n; }

  template <class Fn>
  void for_each(Fn fn) const {
    for (const auto& l : lanes_)
      for (const auto& p : l) fn(p);
  }

 private:
  std::deque<Packet>& lane(TrafficClass c) {
    return lanes_[priority_ && c == TrafficClass::TimeSensitive ? 0 : 1];
  }

  std::size_t capacity_;
  bool priority_;
  std::array<std::deque<Packet>, 2> lanes_;  // [0] time-sensitive when prioritized
  std::size_t in_flight_ = 0;
};

}  // namespace uhrsim
