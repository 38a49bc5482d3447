#pragma once

#include <cassert>
#include <cstdint>
#include <queue>
#include <vector>

#include "qstack/types.hpp"

namespace qstack {

/// Monotone virtual time; only moves forward.
class VirtualClock {
 public:
  Nanos now() const noexcept { return now_; }
  void advance_to(Nanos t) {
    assert(t >= now_);
    now_ = t;
  }
  void advance_by(Nanos d) {
    assert(d >= 0);
    now_ += d;
  }

 private:
  Nanos now_ = 0;
};

template <typename T>
struct Occurrence {
  Nanos deadline;
  T payload;
};

/// Deadline-ordered schedule of arrivals/timers driving its own clock.
/// Equal deadlines fire in insertion order.
template <typename T>
class EventSchedule {
 public:
  void push(Nanos deadline, T payload) { heap_.push(Entry{deadline, next_seq_++, std::move(payload)}); }

  /// Fires everything with deadline <= until and moves the clock to until.
  std::vector<Occurrence<T>> advance(Nanos until) {
    assert(until >= clock_.now());
    std::vector<Occurrence<T>> fired;
    while (!heap_.empty() && heap_.top().deadline <= until) {
      auto& top = const_cast<Entry&>(heap_.top());
      fired.push_back(Occurrence<T>{top.deadline, std::move(top.payload)});
      heap_.pop();
    }
    clock_.advance_to(until);
    return fired;
  }

  Nanos next_deadline() const { return heap_.empty() ? kNever : heap_.top().deadline; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  Nanos now() const { return clock_.now(); }

 private:
  struct Entry {
    Nanos deadline;
    std::uint64_t seq;
    T payload;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.deadline != b.deadline) return a.deadline > b.deadline;
      return a.seq > b.seq;
    }
  };

  VirtualClock clock_;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
};

}  // namespace qstack
