#include <doctest.h>

#include "qstack/fastpath.hpp"

using namespace qstack;

TEST_CASE("stale NIC timestamp triggers a drain") {
  FcdThresholds th;
  FcdState st;
  Nanos now = ms(1);
  st.last_nic_check = now - us(250);
  st.last_tcp_process = now;
  auto a = fastcalldown_check(th, st, CheckContext{now, now, true, false, false});
  CHECK(a.has(FcdAction::DrainNic));
  CHECK_FALSE(a.has(FcdAction::TcpBatch));
  CHECK(st.last_nic_check == now);
}

TEST_CASE("fresh timestamps do nothing and cost one check") {
  FcdThresholds th;
  FcdState st{ms(1), ms(1)};
  auto a = fastcalldown_check(th, st, CheckContext{ms(1) + 10, ms(1), true, false, false});
  CHECK(a.none());
  CHECK(a.to_string() == "None");
  CHECK(th.check_cost == 22);
}

TEST_CASE("tcp interval and budget") {
  FcdThresholds th;
  FcdState st{0, 0};
  auto a = fastcalldown_check(th, st, CheckContext{us(60), 0, true, false, false});
  CHECK(a.has(FcdAction::TcpBatch));
  CHECK(st.last_tcp_process == us(60));

  auto b = fastcalldown_check(th, st, CheckContext{ms(10) + 5, 5, false, false, false});
  CHECK(b.has(FcdAction::Reschedule));
  CHECK_FALSE(b.has(FcdAction::DrainNic));  // no stack on this core
}

TEST_CASE("priority yield only when enabled") {
  FcdThresholds th;
  FcdState st{0, 0};
  CheckContext ctx{10, 0, false, true, true};
  CHECK_FALSE(fastcalldown_check(th, st, ctx).has(FcdAction::PriorityYield));
  th.priority_check = true;
  CHECK(fastcalldown_check(th, st, ctx).has(FcdAction::PriorityYield));
  ctx.running_serves_low = false;
  CHECK_FALSE(fastcalldown_check(th, st, ctx).has(FcdAction::PriorityYield));
}

TEST_CASE("cost comparison") {
  auto c3 = cost_compare(3);
  CHECK(c3.fastcalldown_ns == 298);
  CHECK(c3.coroutine_mode_ns == 318);
  CHECK(c3.fastcalldown_cheaper());
  auto c2 = cost_compare(2);
  CHECK(c2.fastcalldown_ns == 232);
  CHECK(c2.coroutine_mode_ns == 212);
  CHECK_FALSE(c2.fastcalldown_cheaper());
  auto c1 = cost_compare(1);
  CHECK(c1.fastcalldown_ns == 166);
  CHECK(c1.coroutine_mode_ns == 106);
  for (std::int64_t n = 1; n <= 1000; ++n) {
    auto c = cost_compare(n);
    CHECK(c.fastcalldown_ns == 100 + 66 * n);
    CHECK(c.coroutine_mode_ns == 106 * n);
    CHECK(c.fastcalldown_cheaper() == (2 * n > 5));
  }
}

TEST_CASE("register_callup") {
  auto drv = std::make_shared<DriverExtraction>();
  TcpLayer tcp;
  tcp.establish(1);
  CallupRegistry reg(drv, tcp);

  reg.register_callup(Layer::Driver, std::nullopt, header_keyword_matcher());
  CHECK(drv->enabled);
  Driver d(drv);
  NicQueue q;
  Packet p;
  p.flow = 1;
  p.seq_len = 1460;
  p.has_header = true;
  p.header = MessageHeader{4096, 0, Priority::High, us(1)}.encode();
  q.enqueue(p, 0);
  Packet rest = p;
  rest.has_header = false;
  rest.seq_start = 1460;
  q.enqueue(rest, 0);
  Nanos cost = 0;
  d.poll_and_classify(q, 32, cost);
  auto first = *d.rx().pop(), second = *d.rx().pop();
  CHECK(first.priority == Priority::High);
  CHECK(second.priority == Priority::Unset);

  // Both layers: the TCP hook overrides the driver's label on later packets.
  reg.register_callup(Layer::Tcp, FlowId{1}, stateful_header_extractor());
  std::vector<Packet> batch{first, second};
  auto r = tcp.process_batch(batch, 0, 0);
  REQUIRE(r.events.size() == 2);
  CHECK(r.events[0].priority == Priority::High);
  CHECK(r.events[1].priority == Priority::High);
  CHECK(batch[1].priority == Priority::High);

  CHECK_THROWS_AS(reg.register_callup(Layer::Nic, std::nullopt, header_keyword_matcher()), Error);
  try {
    reg.register_callup(Layer::EventFramework, std::nullopt, header_keyword_matcher());
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedLayer);
  }
  CHECK_THROWS_AS(reg.register_callup(Layer::Driver, std::nullopt, stateful_header_extractor()), Error);
  CHECK_THROWS_AS(reg.register_callup(Layer::Tcp, std::nullopt, stateful_header_extractor()), Error);
  CHECK_THROWS_AS(reg.register_callup(Layer::Tcp, FlowId{99}, stateful_header_extractor()), Error);
}
