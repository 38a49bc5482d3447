#include "qstack/events.hpp"

#include <algorithm>

namespace qstack {

void EventChannel::push(const Event& e) {
  rings_for(e.priority).rings[e.producer].push_back(e);
  ++size_;
}

bool EventChannel::ready_in(const ClassRings& c, Nanos now) {
  return std::any_of(c.rings.begin(), c.rings.end(),
                     [&](const auto& kv) { return !kv.second.empty() && kv.second.front().t_emit <= now; });
}

std::optional<Event> EventChannel::pop_class(ClassRings& c, Nanos now) {
  if (c.rings.empty()) return std::nullopt;
  auto start = c.rings.lower_bound(c.cursor);
  auto try_ring = [&](auto it) -> std::optional<Event> {
    auto& ring = it->second;
    if (ring.empty() || ring.front().t_emit > now) return std::nullopt;
    Event e = ring.front();
    ring.pop_front();
    c.cursor = it->first + 1;
    return e;
  };
  for (auto it = start; it != c.rings.end(); ++it)
    if (auto e = try_ring(it)) return e;
  for (auto it = c.rings.begin(); it != start; ++it)
    if (auto e = try_ring(it)) return e;
  return std::nullopt;
}

std::optional<Event> EventChannel::pop(Nanos now) {
  auto e = pop_class(high_, now);
  if (!e) e = pop_class(low_, now);
  if (e) --size_;
  return e;
}

bool EventChannel::has_ready(Nanos now) const { return ready_in(high_, now) || ready_in(low_, now); }
bool EventChannel::has_ready_high(Nanos now) const { return ready_in(high_, now); }

Nanos EventChannel::next_emit_time() const {
  Nanos t = kNever;
  for (const auto* c : {&high_, &low_})
    for (const auto& [_, ring] : c->rings)
      if (!ring.empty()) t = std::min(t, ring.front().t_emit);
  return t;
}

std::size_t EventChannel::high_size() const {
  std::size_t n = 0;
  for (const auto& [_, ring] : high_.rings) n += ring.size();
  return n;
}

ConsumerId EventHub::add_consumer() {
  channels_.emplace_back().set_classed(classed_);
  return static_cast<ConsumerId>(channels_.size() - 1);
}

void EventHub::set_priority_classes(bool on) {
  classed_ = on;
  for (auto& ch : channels_) ch.set_classed(on);
}

void EventHub::q_epoll_ctrl(FlowId flow, ConsumerId consumer, Priority class_filter) {
  if (consumer >= channels_.size()) throw Error(ErrorCode::InvalidConfig, "q_epoll_ctrl: unknown consumer");
  auto& b = bindings_[flow];
  auto& slot = class_filter == Priority::High ? b.high : class_filter == Priority::Low ? b.low : b.any;
  if (slot && *slot != consumer) ++conflicts_;
  slot = consumer;
}

void EventHub::unbind(FlowId flow) { bindings_.erase(flow); }

std::optional<ConsumerId> EventHub::route(FlowId flow, Priority cls) const {
  auto it = bindings_.find(flow);
  if (it != bindings_.end()) {
    const auto& b = it->second;
    const bool high = effective(cls) == Priority::High;
    const auto& own = high ? b.high : b.low;
    const auto& other = high ? b.low : b.high;
    if (own) return own;
    if (b.any) return b.any;
    // One-sided binding: keep both classes on the same consumer.
    if (other) return other;
  }
  if (default_route_) return default_route_(flow);
  return std::nullopt;
}

std::optional<ConsumerId> EventHub::emit(const Event& e) {
  ++emitted_;
  auto c = route(e.flow, e.priority);
  if (!c || *c >= channels_.size()) {
    ++orphaned_;
    return std::nullopt;
  }
  channels_[*c].push(e);
  return c;
}

std::optional<Event> EventHub::q_get_event(ConsumerId c, Nanos now) {
  if (implicit_check_) implicit_check_(c);
  auto e = channels_.at(c).pop(now);
  if (e) ++delivered_;
  return e;
}

std::vector<Event> EventHub::q_epoll_wait(ConsumerId c, std::size_t max_events, Nanos now) {
  if (implicit_check_) implicit_check_(c);
  std::vector<Event> out;
  auto& ch = channels_.at(c);
  while (out.size() < max_events) {
    auto e = ch.pop(now);
    if (!e) break;
    out.push_back(*e);
  }
  delivered_ += out.size();
  return out;
}

std::uint64_t EventHub::pending() const {
  std::uint64_t n = 0;
  for (const auto& ch : channels_) n += ch.size();
  return n;
}

}  // namespace qstack
