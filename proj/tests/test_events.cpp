#include <doctest.h>

#include <algorithm>
#include <random>
#include <tuple>

#include "qstack/events.hpp"

using namespace qstack;

namespace {

Event ev(FlowId f, Priority p, std::uint32_t producer = 0, Nanos t = 0) { return Event{f, EventKind::Readable, p, t, producer}; }

}  // namespace

TEST_CASE("class-filtered bindings") {
  EventHub hub;
  auto a = hub.add_consumer(), b = hub.add_consumer();
  hub.q_epoll_ctrl(1, a, Priority::High);
  CHECK(hub.emit(ev(1, Priority::High)) == a);

  hub.q_epoll_ctrl(2, b, Priority::Unset);
  CHECK(hub.emit(ev(2, Priority::High)) == b);
  CHECK(hub.emit(ev(2, Priority::Low)) == b);

  hub.q_epoll_ctrl(3, a, Priority::High);
  hub.q_epoll_ctrl(3, b, Priority::Low);
  CHECK(hub.emit(ev(3, Priority::High)) == a);
  CHECK(hub.emit(ev(3, Priority::Low)) == b);
  CHECK(hub.emit(ev(3, Priority::Unset)) == b);
  CHECK(hub.binding_conflicts() == 0);

  hub.q_epoll_ctrl(3, a, Priority::Low);
  CHECK(hub.binding_conflicts() == 1);
  CHECK(hub.emit(ev(3, Priority::Low)) == a);
}

TEST_CASE("unrouted events are counted as orphaned") {
  EventHub hub;
  hub.add_consumer();
  CHECK_FALSE(hub.emit(ev(9, Priority::Low)).has_value());
  CHECK(hub.orphaned() == 1);
  hub.set_default_route([](FlowId) { return std::optional<ConsumerId>{0}; });
  CHECK(hub.emit(ev(9, Priority::Low)) == 0u);
}

TEST_CASE("High is delivered before Low") {
  EventHub hub;
  auto c = hub.add_consumer();
  hub.q_epoll_ctrl(1, c, Priority::Unset);
  hub.emit(ev(1, Priority::Low));
  hub.emit(ev(1, Priority::High));
  CHECK(hub.q_get_event(c, 0)->priority == Priority::High);
  CHECK(hub.q_get_event(c, 0)->priority == Priority::Low);
}

TEST_CASE("per-producer order is preserved when producers interleave") {
  EventChannel ch;
  for (FlowId i = 0; i < 10; ++i) ch.push(ev(i, Priority::Low, i % 2));
  FlowId next[2] = {0, 1};
  while (auto e = ch.pop(0)) {
    CHECK(e->flow == next[e->producer]);
    next[e->producer] += 2;
  }
}

TEST_CASE("10k random emissions drain in oracle order") {
  std::mt19937 rng(42);
  EventChannel ch;
  struct Row {
    int cls;  // 0 = High
    std::uint32_t idx, producer;
    FlowId id;
  };
  std::vector<Row> rows;
  std::uint32_t counter[3][2] = {};
  for (FlowId i = 0; i < 10'000; ++i) {
    auto producer = static_cast<std::uint32_t>(rng() % 3);
    auto p = rng() % 2 ? Priority::High : Priority::Low;
    int cls = p == Priority::High ? 0 : 1;
    rows.push_back({cls, counter[producer][cls]++, producer, i});
    ch.push(ev(i, p, producer));
  }
  // Equal per-producer indexes across producers resolve by producer id.
  auto oracle = rows;
  std::stable_sort(oracle.begin(), oracle.end(),
                   [](const Row& a, const Row& b) { return std::tie(a.cls, a.idx, a.producer) < std::tie(b.cls, b.idx, b.producer); });
  std::size_t mismatches = 0;
  for (const auto& r : oracle) {
    auto e = ch.pop(0);
    REQUIRE(e);
    mismatches += e->flow != r.id;
  }
  CHECK(mismatches == 0);
  CHECK(ch.empty());
}

TEST_CASE("q_get_event charges one check per call") {
  EventHub hub;
  auto c = hub.add_consumer();
  hub.q_epoll_ctrl(1, c, Priority::Unset);
  int checks = 0;
  hub.set_implicit_check([&](ConsumerId) { ++checks; });
  for (int i = 0; i < 3; ++i) hub.emit(ev(1, Priority::Low));
  for (int i = 0; i < 3; ++i) CHECK(hub.q_get_event(c, 0));
  CHECK(checks == 3);
  CHECK_FALSE(hub.q_get_event(c, 0).has_value());
  CHECK(checks == 4);
}

TEST_CASE("a High event arriving behind queued Low events is next") {
  EventHub hub;
  auto c = hub.add_consumer();
  hub.q_epoll_ctrl(1, c, Priority::Unset);
  hub.emit(ev(1, Priority::Low));
  hub.emit(ev(1, Priority::Low));
  hub.q_get_event(c, 0);
  hub.emit(ev(1, Priority::High));
  CHECK(hub.q_get_event(c, 0)->priority == Priority::High);
}

TEST_CASE("events become visible at their emit time") {
  EventChannel ch;
  ch.push(ev(1, Priority::Low, 0, 100));
  CHECK_FALSE(ch.pop(99).has_value());
  CHECK(ch.next_emit_time() == 100);
  CHECK(ch.pop(100).has_value());
}

TEST_CASE("q_epoll_wait") {
  EventHub hub;
  auto c = hub.add_consumer();
  hub.q_epoll_ctrl(1, c, Priority::Unset);
  for (int i = 0; i < 5; ++i) hub.emit(ev(1, Priority::Low));
  CHECK(hub.q_epoll_wait(c, 3, 0).size() == 3);

  EventHub mixed;
  auto m = mixed.add_consumer();
  mixed.q_epoll_ctrl(1, m, Priority::Unset);
  mixed.emit(ev(1, Priority::Low));
  mixed.emit(ev(1, Priority::High));
  mixed.emit(ev(1, Priority::Low));
  mixed.emit(ev(1, Priority::High));
  auto got = mixed.q_epoll_wait(m, 10, 0);
  REQUIRE(got.size() == 4);
  CHECK(got[0].priority == Priority::High);
  CHECK(got[1].priority == Priority::High);
}

TEST_CASE("q_epoll_wait matches repeated q_get_event") {
  std::mt19937 rng(8);
  EventHub one, many;
  auto a = one.add_consumer(), b = many.add_consumer();
  one.set_default_route([](FlowId) { return std::optional<ConsumerId>{0}; });
  many.set_default_route([](FlowId) { return std::optional<ConsumerId>{0}; });
  for (FlowId i = 0; i < 500; ++i) {
    auto e = ev(i, rng() % 3 ? Priority::Low : Priority::High, rng() % 4);
    one.emit(e);
    many.emit(e);
  }
  auto batch = one.q_epoll_wait(a, 1000, 0);
  REQUIRE(batch.size() == 500);
  for (const auto& e : batch) CHECK(many.q_get_event(b, 0)->flow == e.flow);
}

TEST_CASE("High queue wait does not depend on the Low backlog") {
  auto high_wait = [](int low_backlog) {
    EventChannel ch;
    for (int i = 0; i < low_backlog; ++i) ch.push(ev(1, Priority::Low, i % 2, 0));
    ch.push(ev(2, Priority::High, 0, 50));
    // The consumer polls every 10 ns, taking one event per poll.
    for (Nanos t = 0;; t += 10) {
      auto e = ch.pop(t);
      if (e && e->priority == Priority::High) return t - e->t_emit;
    }
  };
  CHECK(high_wait(0) == high_wait(10));
  CHECK(high_wait(10) == high_wait(100));
}

TEST_CASE("no event loss") {
  std::mt19937 rng(1);
  EventHub hub;
  hub.add_consumer();
  hub.add_consumer();
  hub.q_epoll_ctrl(1, 0, Priority::High);
  hub.q_epoll_ctrl(1, 1, Priority::Low);
  hub.q_epoll_ctrl(2, 1, Priority::Unset);
  for (int i = 0; i < 2000; ++i) {
    if (rng() % 3) {
      hub.emit(ev(rng() % 4, rng() % 2 ? Priority::High : Priority::Low));
    } else if (rng() % 2) {
      hub.q_get_event(rng() % 2, 0);
    } else {
      hub.q_epoll_wait(rng() % 2, rng() % 5, 0);
    }
    CHECK(hub.emitted() == hub.delivered() + hub.pending() + hub.orphaned());
  }
}

TEST_CASE("priority classes off gives plain per-producer FIFO") {
  EventHub hub;
  hub.set_priority_classes(false);
  auto c = hub.add_consumer();
  hub.q_epoll_ctrl(1, c, Priority::Unset);
  hub.emit(ev(1, Priority::Low));
  hub.emit(ev(1, Priority::High));
  CHECK(hub.q_get_event(c, 0)->priority == Priority::Low);
}
