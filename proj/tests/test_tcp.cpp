#include <doctest.h>

#include <random>

#include "qstack/tcp.hpp"

using namespace qstack;

namespace {

struct Msg {
  std::uint32_t len;
  Priority cls;
};

// Segments messages back to back; segment sizes come from `cut`.
template <typename Cut>
std::vector<Packet> segment(FlowId f, const std::vector<Msg>& msgs, Cut cut, std::vector<Priority>* truth = nullptr) {
  std::vector<Packet> out;
  std::uint64_t seq = 0;
  for (const auto& m : msgs) {
    std::uint32_t left = m.len;
    bool first = true;
    while (left) {
      Packet p;
      p.flow = f;
      p.seq_start = seq;
      p.seq_len = std::min(left, first ? std::max<std::uint32_t>(cut(), 16) : cut());
      p.has_header = first;
      if (first) p.header = MessageHeader{m.len, 0, m.cls, us(1)}.encode();
      seq += p.seq_len;
      left -= p.seq_len;
      first = false;
      out.push_back(p);
      if (truth) truth->push_back(m.cls);
    }
  }
  return out;
}

std::vector<Packet> mss_split(FlowId f, std::uint32_t len, Priority cls, std::uint64_t seq0 = 0) {
  auto v = segment(f, {{len, cls}}, [] { return 1460u; });
  for (auto& p : v) p.seq_start += seq0;
  return v;
}

}  // namespace

TEST_CASE("extraction hook registration") {
  TcpLayer tcp;
  CHECK_THROWS_AS(tcp.register_extraction(5, stateful_header_extractor()), Error);
  try {
    tcp.register_extraction(5, stateful_header_extractor());
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownFlow);
  }
  tcp.establish(5);
  int calls = 0;
  tcp.register_extraction(5, [&](const Packet&, auto) {
    ++calls;
    return Priority::High;
  });
  auto pk = mss_split(5, 4096, Priority::Low);
  pk.push_back(pk.back());  // duplicate: not a new payload packet
  auto r = tcp.process_batch(pk, 0, 0);
  CHECK(calls == 3);
  CHECK(r.events.size() == 3);

  tcp.register_extraction(5, [](const Packet&, auto) { return Priority::Low; });
  auto more = mss_split(5, 100, Priority::High, 4096);
  auto r2 = tcp.process_batch(more, 0, 0);
  REQUIRE(r2.events.size() == 1);
  CHECK(r2.events[0].priority == Priority::Low);
}

TEST_CASE("no hook labels Low") {
  TcpLayer tcp;
  tcp.establish(1);
  auto pk = mss_split(1, 1024, Priority::High);
  auto r = tcp.process_batch(pk, 0, 0);
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].priority == Priority::Low);
}

TEST_CASE("process_batch labelling") {
  TcpLayer tcp;
  tcp.establish(1);
  tcp.register_extraction(1, stateful_header_extractor());

  auto one = mss_split(1, 1024, Priority::High);
  REQUIRE(one.size() == 1);
  auto r = tcp.process_batch(one, 0, 0);
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].priority == Priority::High);

  auto three = mss_split(1, 4096, Priority::High, 1024);
  REQUIRE(three.size() == 3);
  r = tcp.process_batch(three, 2, 77);
  REQUIRE(r.events.size() == 3);
  for (const auto& e : r.events) {
    CHECK(e.priority == Priority::High);
    CHECK(e.producer == 2);
    CHECK(e.t_emit == 77);
  }
  CHECK(r.cost == 3 * (300 + 100));

  std::vector<Packet> none;
  tcp.config().batch_overhead_ns = 40;
  r = tcp.process_batch(none, 0, 0);
  CHECK(r.events.empty());
  CHECK(r.cost == 40);
}

TEST_CASE("process_batch caps at max_batch and ignores out-of-window data") {
  TcpLayer tcp;
  tcp.establish(1);
  std::vector<Packet> pk;
  for (std::uint64_t i = 0; i < 70; ++i) {
    Packet p;
    p.flow = 1;
    p.seq_start = i * 10;
    p.seq_len = 10;
    pk.push_back(p);
  }
  CHECK(tcp.process_batch(pk, 0, 0).processed == 64);

  Packet far;
  far.flow = 1;
  far.seq_start = 1ull << 40;
  far.seq_len = 10;
  std::vector<Packet> v{far};
  CHECK(tcp.process_batch(v, 0, 0).events.empty());
  CHECK(tcp.ignored() == 1);
}

TEST_CASE("recv") {
  TcpLayer tcp;
  tcp.establish(1);
  int checks = 0;
  tcp.set_implicit_check([&](FlowId) { ++checks; });
  auto pk = mss_split(1, 1024, Priority::Low);
  tcp.process_batch(pk, 0, 0);
  CHECK(tcp.recv(1, 4096) == 1024u);
  CHECK(checks == 1);

  TcpLayer gap;
  gap.establish(2);
  auto later = mss_split(2, 100, Priority::Low, 500);
  gap.process_batch(later, 0, 0);
  CHECK_FALSE(gap.recv(2, 4096).has_value());
}

TEST_CASE("recv_priority takes a complete High message past unread Low data") {
  TcpLayer tcp;
  tcp.establish(1);
  auto low = mss_split(1, 1000, Priority::Low);
  auto high = mss_split(1, 1000, Priority::High, 1000);
  high[0].priority = Priority::High;
  tcp.process_batch(low, 0, 0);
  tcp.process_batch(high, 0, 0);
  auto m = tcp.recv_priority(1);
  REQUIRE(m);
  CHECK(m->seq_start == 1000);
  CHECK(m->label == Priority::High);
  CHECK_FALSE(tcp.recv_priority(1).has_value());
  // The in-order path still yields the Low message and skips the taken one.
  auto l = tcp.recv_message(1);
  REQUIRE(l);
  CHECK(l->seq_start == 0);
  CHECK_FALSE(tcp.recv_message(1).has_value());
}

TEST_CASE("two High messages come out FIFO") {
  TcpLayer tcp;
  tcp.establish(1);
  tcp.register_extraction(1, stateful_header_extractor());
  auto a = mss_split(1, 3000, Priority::High);
  auto b = mss_split(1, 200, Priority::High, 3000);
  tcp.process_batch(a, 0, 0);
  tcp.process_batch(b, 0, 0);
  CHECK(tcp.recv_priority(1)->seq_start == 0);
  CHECK(tcp.recv_priority(1)->seq_start == 3000);
}

TEST_CASE("send segmentation and priority") {
  TcpLayer tcp;
  tcp.establish(1);
  Driver d;
  CHECK(tcp.send(1, 4096, Priority::Low, d) == 3);
  std::vector<std::uint32_t> lens;
  while (auto p = d.tx_pop()) lens.push_back(p->seq_len);
  CHECK(lens == std::vector<std::uint32_t>{1460, 1460, 1176});
  CHECK(tcp.send(1, 0, Priority::Low, d) == 0);

  tcp.send(1, 3000, Priority::Low, d);
  tcp.send(1, 100, Priority::High, d);
  CHECK(d.tx_pop()->priority == Priority::High);
}

TEST_CASE("private field access") {
  TcpLayer tcp;
  tcp.establish(1);
  std::vector<std::uint8_t> v{1, 2, 3, 4, 5, 6, 7, 8};
  tcp.private_write(1, 0, v);
  auto r = tcp.private_read(1, 0, 8);
  CHECK(std::vector<std::uint8_t>(r.begin(), r.end()) == v);
  CHECK_THROWS_AS(tcp.private_write(1, 60, v), Error);
  CHECK_THROWS_AS(tcp.private_read(1, 60, 8), Error);
}

TEST_CASE("remaining bytes after a 1024 B first segment of a 4096 B request") {
  TcpLayer tcp;
  tcp.establish(1);
  tcp.register_extraction(1, stateful_header_extractor());
  auto pk = segment(1, {{4096, Priority::High}}, [] { return 1024u; });
  REQUIRE(pk.size() == 4);
  std::vector<Packet> first{pk[0]};
  tcp.process_batch(first, 0, 0);
  auto f = tcp.private_read(1, 0, kPrivateFieldBytes);
  auto mb = MessageBoundary::load(std::span<const std::uint8_t, kPrivateFieldBytes>(f.data(), kPrivateFieldBytes));
  // Replay oracle: bytes declared minus bytes already seen.
  CHECK(mb.remaining_bytes == 4096 - pk[0].seq_len);
  CHECK(mb.remaining_bytes == 3072);
  CHECK(mb.current_label == Priority::High);
}

TEST_CASE("stateful labels equal the whole-message oracle") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Msg> msgs;
    for (int i = 0; i < 40; ++i)
      msgs.push_back({16 + static_cast<std::uint32_t>(rng() % 6000), rng() % 4 == 0 ? Priority::High : Priority::Low});
    std::vector<Priority> truth;
    auto pk = segment(7, msgs, [&] { return 1 + static_cast<std::uint32_t>(rng() % 1460); }, &truth);
    TcpLayer tcp;
    tcp.establish(7);
    tcp.register_extraction(7, stateful_header_extractor());
    std::size_t at = 0;
    std::vector<Priority> got;
    while (at < pk.size()) {
      std::size_t n = std::min<std::size_t>(pk.size() - at, 1 + rng() % 64);
      std::span<Packet> batch(pk.data() + at, n);
      for (auto& e : tcp.process_batch(batch, 0, 0).events) got.push_back(e.priority);
      at += n;
    }
    REQUIRE(got.size() == truth.size());
    CHECK(got == truth);
  }
}

TEST_CASE("private field mutations on one flow never change another flow's labels") {
  std::mt19937 rng(9);
  std::vector<Msg> msgs;
  for (int i = 0; i < 30; ++i) msgs.push_back({16 + static_cast<std::uint32_t>(rng() % 4000), rng() % 2 ? Priority::High : Priority::Low});
  auto a = segment(1, msgs, [&] { return 1 + static_cast<std::uint32_t>(rng() % 1460); });
  auto b = segment(2, msgs, [&] { return 1 + static_cast<std::uint32_t>(rng() % 1460); });

  auto labels_of_b = [&](bool interleave) {
    TcpLayer tcp;
    tcp.establish(1);
    tcp.establish(2);
    tcp.register_extraction(1, stateful_header_extractor());
    tcp.register_extraction(2, stateful_header_extractor());
    std::mt19937 mix(17);
    std::vector<Priority> out;
    std::size_t ia = 0, ib = 0;
    while (ib < b.size()) {
      if (interleave && ia < a.size() && mix() % 2) {
        std::vector<Packet> one{a[ia++]};
        tcp.process_batch(one, 0, 0);
        std::vector<std::uint8_t> junk(8);
        for (auto& x : junk) x = static_cast<std::uint8_t>(mix());
        tcp.private_write(1, mix() % 56, junk);
      } else {
        std::vector<Packet> one{b[ib++]};
        for (auto& e : tcp.process_batch(one, 0, 0).events) out.push_back(e.priority);
      }
    }
    return out;
  };
  CHECK(labels_of_b(true) == labels_of_b(false));
}

TEST_CASE("in-order recv delivers bytes in sequence despite reordering") {
  TcpLayer tcp;
  tcp.establish(1);
  auto pk = segment(1, {{5000, Priority::Low}}, [] { return 700u; });
  std::reverse(pk.begin(), pk.end());
  std::uint64_t total = 0;
  for (auto& p : pk) {
    std::vector<Packet> one{p};
    tcp.process_batch(one, 0, 0);
    if (p.seq_start != 0) CHECK_FALSE(tcp.recv(1, 1u << 20).has_value());
  }
  while (auto n = tcp.recv(1, 333)) total += *n;
  CHECK(total == 5000);
}
