#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "qstack/types.hpp"

namespace qstack {

/// Bytes of the fixed application message header carried by the first
/// packet of every request: total_length (u32 LE), class index (u8),
/// priority (u8), 2 reserved bytes, service time in ns (u64 LE).
inline constexpr std::size_t kMessageHeaderBytes = 16;

struct MessageHeader {
  std::uint32_t total_length = 0;
  std::uint8_t class_index = 0;
  Priority priority = Priority::Low;
  Nanos service_ns = 0;

  std::array<std::uint8_t, kMessageHeaderBytes> encode() const;
  static MessageHeader decode(std::span<const std::uint8_t> bytes);
};

struct Packet {
  FlowId flow = 0;
  std::uint64_t seq_start = 0;
  std::uint32_t seq_len = 0;
  RequestId request = 0;  // payload descriptor reference
  Priority priority = Priority::Unset;
  bool has_header = false;
  std::array<std::uint8_t, kMessageHeaderBytes> header{};
  Nanos t_arrive_nic = 0;
  Nanos t_leave_server = 0;

  /// Materialised payload bytes: only the message header is simulated.
  std::span<const std::uint8_t> bytes() const {
    return has_header ? std::span<const std::uint8_t>(header) : std::span<const std::uint8_t>{};
  }
};

/// Poll cost: an empty check costs empty_ns, a full batch costs batch_ns,
/// partial batches are pro-rated linearly (floor).
struct RxCostModel {
  Nanos empty_ns = 100;
  Nanos batch_ns = 1000;
  std::size_t batch_size = 32;

  Nanos cost(std::size_t packets) const {
    if (packets == 0) return empty_ns;
    return static_cast<Nanos>(packets) * batch_ns / static_cast<Nanos>(batch_size);
  }
};

enum class EnqueueResult { Accepted, Dropped };

/// Fixed-capacity descriptor ring with tail drop.
class NicQueue {
 public:
  static constexpr std::size_t kDefaultCapacity = 4096;

  explicit NicQueue(QueueId id = 0, std::size_t capacity = kDefaultCapacity, Priority priority_class = Priority::Unset,
                    RxCostModel cost_model = {})
      : id_(id), capacity_(capacity), priority_class_(priority_class), cost_model_(cost_model) {}

  EnqueueResult enqueue(Packet p, Nanos now);

  /// Removes up to max_batch packets FIFO; `cost` receives the poll charge.
  std::vector<Packet> rx_burst(std::size_t max_batch, Nanos& cost);

  QueueId id() const { return id_; }
  std::size_t size() const { return ring_.size(); }
  bool empty() const { return ring_.empty(); }
  std::size_t capacity() const { return capacity_; }
  Priority priority_class() const { return priority_class_; }
  const RxCostModel& cost_model() const { return cost_model_; }

  std::uint64_t enqueued() const { return enqueued_; }
  std::uint64_t dequeued() const { return dequeued_; }
  std::uint64_t drops() const { return drops_; }
  Nanos first_drop_at() const { return first_drop_at_; }

 private:
  QueueId id_;
  std::size_t capacity_;
  Priority priority_class_;
  RxCostModel cost_model_;
  std::deque<Packet> ring_;
  std::uint64_t enqueued_ = 0;  // offered, including drops
  std::uint64_t dequeued_ = 0;
  std::uint64_t drops_ = 0;
  Nanos first_drop_at_ = kNever;
};

/// Multiplicative (Fibonacci) hash of a flow id onto num_groups buckets.
std::uint32_t rss_hash(FlowId flow, std::uint32_t num_groups);

/// RSS flow groups and their NIC queue binding.
class RssMap {
 public:
  static constexpr std::uint32_t kMaxQueues = 16;

  explicit RssMap(std::uint32_t num_groups = 1);

  std::uint32_t num_groups() const { return static_cast<std::uint32_t>(group_to_queue_.size()); }
  std::uint32_t group_of(FlowId flow) const { return rss_hash(flow, num_groups()); }
  QueueId queue_of_group(std::uint32_t g) const { return group_to_queue_.at(g); }
  QueueId queue_of(FlowId flow) const { return queue_of_group(group_of(flow)); }
  void bind(std::uint32_t group, QueueId q) { group_to_queue_.at(group) = q; }

 private:
  std::vector<QueueId> group_to_queue_;
};

}  // namespace qstack
