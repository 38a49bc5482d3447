#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "qstack/types.hpp"

namespace qstack {

enum class EventKind : std::uint8_t { Readable, Writable, Accepted, Closed };

struct Event {
  FlowId flow = 0;
  EventKind kind = EventKind::Readable;
  Priority priority = Priority::Low;
  Nanos t_emit = 0;
  std::uint32_t producer = 0;  // stack coroutine index
};

using ConsumerId = std::uint32_t;

/// One consumer's inbox: a FIFO per (producer, class). Draining takes High
/// before Low and rotates across producers within a class.
class EventChannel {
 public:
  void push(const Event& e);

  /// Oldest eligible event (t_emit <= now), High class first.
  std::optional<Event> pop(Nanos now);
  bool has_ready(Nanos now) const;
  bool has_ready_high(Nanos now) const;
  /// Earliest t_emit among queued events, kNever if empty.
  Nanos next_emit_time() const;

  std::size_t size() const { return size_; }
  std::size_t high_size() const;
  bool empty() const { return size_ == 0; }

  /// With classes off both classes share one ring set (FIFO per producer).
  void set_classed(bool on) { classed_ = on; }

 private:
  struct ClassRings {
    std::map<std::uint32_t, std::deque<Event>> rings;  // keyed by producer
    std::uint32_t cursor = 0;                          // next producer to serve
  };
  ClassRings& rings_for(Priority p) { return classed_ && effective(p) == Priority::High ? high_ : low_; }
  static std::optional<Event> pop_class(ClassRings& c, Nanos now);
  static bool ready_in(const ClassRings& c, Nanos now);

  ClassRings high_;
  ClassRings low_;
  std::size_t size_ = 0;
  bool classed_ = true;
};

/// K:M event delivery from stack producers to app consumers, with
/// per-flow priority-filtered bindings (diffluence).
class EventHub {
 public:
  /// Fallback route used when no binding matches; may return nullopt.
  using DefaultRoute = std::function<std::optional<ConsumerId>(FlowId)>;

  ConsumerId add_consumer();
  /// Strict High-before-Low delivery on every channel (default on).
  void set_priority_classes(bool on);
  std::size_t num_consumers() const { return channels_.size(); }

  /// Binds a flow's events of `class_filter` (High, Low, or Unset for Any)
  /// to a consumer. Rebinding the same (flow, class) overwrites and bumps
  /// the conflict counter.
  void q_epoll_ctrl(FlowId flow, ConsumerId consumer, Priority class_filter);
  void unbind(FlowId flow);
  void set_default_route(DefaultRoute r) { default_route_ = std::move(r); }

  std::optional<ConsumerId> route(FlowId flow, Priority cls) const;

  /// Routes and enqueues; returns the consumer or nullopt if orphaned.
  std::optional<ConsumerId> emit(const Event& e);

  /// One event per call, highest class first. One implicit check per call.
  std::optional<Event> q_get_event(ConsumerId c, Nanos now);
  /// Up to max_events, all High before any Low. One implicit check per call.
  std::vector<Event> q_epoll_wait(ConsumerId c, std::size_t max_events, Nanos now);

  /// Fired once per q_get_event / q_epoll_wait call.
  void set_implicit_check(std::function<void(ConsumerId)> fn) { implicit_check_ = std::move(fn); }

  EventChannel& channel(ConsumerId c) { return channels_.at(c); }
  const EventChannel& channel(ConsumerId c) const { return channels_.at(c); }

  std::uint64_t emitted() const { return emitted_; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t orphaned() const { return orphaned_; }
  std::uint64_t binding_conflicts() const { return conflicts_; }
  std::uint64_t pending() const;

 private:
  struct Binding {
    std::optional<ConsumerId> any, high, low;
  };

  std::vector<EventChannel> channels_;
  bool classed_ = true;
  std::map<FlowId, Binding> bindings_;
  DefaultRoute default_route_;
  std::function<void(ConsumerId)> implicit_check_;
  std::uint64_t emitted_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t orphaned_ = 0;
  std::uint64_t conflicts_ = 0;
};

}  // namespace qstack
