#include "qstack/driver.hpp"

namespace qstack {

bool DriverBuffer::push(Packet p) {
  auto& q = classed_ && effective(p.priority) == Priority::High ? high_ : low_;
  if (q.size() >= capacity_) {
    ++drops_;
    return false;
  }
  q.push_back(std::move(p));
  return true;
}

std::optional<Packet> DriverBuffer::pop() {
  auto& q = !high_.empty() ? high_ : low_;
  if (q.empty()) return std::nullopt;
  Packet p = std::move(q.front());
  q.pop_front();
  return p;
}

const Packet* DriverBuffer::peek() const {
  if (!high_.empty()) return &high_.front();
  if (!low_.empty()) return &low_.front();
  return nullptr;
}

DriverExtractionFn header_keyword_matcher() {
  return [](const Packet& p) {
    if (!p.has_header) return Priority::Unset;
    return MessageHeader::decode(p.bytes()).priority == Priority::High ? Priority::High : Priority::Unset;
  };
}

std::size_t Driver::poll_and_classify(NicQueue& queue, std::size_t max_batch, Nanos& cost) {
  Nanos poll_cost = 0;
  auto burst = queue.rx_burst(max_batch, poll_cost);
  cost += poll_cost;
  auto& ex = *extraction_;
  for (auto& p : burst) {
    if (ex.enabled) {
      p.priority = ex.callback(p);
      cost += ex.cost_ns;
    }
    rx_.push(std::move(p));
  }
  return burst.size();
}

std::size_t Driver::drain(NicQueue& queue, std::size_t max_batch, Nanos& cost) {
  std::size_t total = 0;
  for (;;) {
    std::size_t n = poll_and_classify(queue, max_batch, cost);
    total += n;
    if (n < max_batch || queue.empty()) break;
  }
  return total;
}

}  // namespace qstack
