#include "qstack/nic.hpp"

#include <algorithm>

namespace qstack {

std::array<std::uint8_t, kMessageHeaderBytes> MessageHeader::encode() const {
  std::array<std::uint8_t, kMessageHeaderBytes> out{};
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(total_length >> (8 * i));
  out[4] = class_index;
  out[5] = static_cast<std::uint8_t>(priority);
  auto svc = static_cast<std::uint64_t>(service_ns);
  for (int i = 0; i < 8; ++i) out[8 + i] = static_cast<std::uint8_t>(svc >> (8 * i));
  return out;
}

MessageHeader MessageHeader::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMessageHeaderBytes) throw Error(ErrorCode::OutOfBounds, "short message header");
  MessageHeader h;
  for (int i = 0; i < 4; ++i) h.total_length |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  h.class_index = bytes[4];
  h.priority = static_cast<Priority>(bytes[5]);
  std::uint64_t svc = 0;
  for (int i = 0; i < 8; ++i) svc |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  h.service_ns = static_cast<Nanos>(svc);
  return h;
}

EnqueueResult NicQueue::enqueue(Packet p, Nanos now) {
  ++enqueued_;
  if (ring_.size() >= capacity_) {
    ++drops_;
    if (first_drop_at_ == kNever) first_drop_at_ = now;
    return EnqueueResult::Dropped;
  }
  p.t_arrive_nic = now;
  ring_.push_back(std::move(p));
  return EnqueueResult::Accepted;
}

std::vector<Packet> NicQueue::rx_burst(std::size_t max_batch, Nanos& cost) {
  std::size_t n = std::min(max_batch, ring_.size());
  std::vector<Packet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(std::move(ring_.front()));
    ring_.pop_front();
  }
  dequeued_ += n;
  cost = cost_model_.cost(n);
  return out;
}

std::uint32_t rss_hash(FlowId flow, std::uint32_t num_groups) {
  if (num_groups <= 1) return 0;
  // Knuth multiplicative hash, top 32 bits, reduced modulo the group count.
  std::uint64_t h = static_cast<std::uint64_t>(flow) * 0x9E3779B97F4A7C15ull;
  return static_cast<std::uint32_t>((h >> 32) % num_groups);
}

RssMap::RssMap(std::uint32_t num_groups) : group_to_queue_(std::max<std::uint32_t>(num_groups, 1)) {
  for (std::uint32_t g = 0; g < group_to_queue_.size(); ++g) group_to_queue_[g] = g % kMaxQueues;
}

}  // namespace qstack
