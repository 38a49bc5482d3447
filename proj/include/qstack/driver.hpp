#pragma once

#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>

#include "qstack/nic.hpp"

namespace qstack {

/// Two-class FIFO pair; dequeue always drains High before Low.
class DriverBuffer {
 public:
  explicit DriverBuffer(std::size_t capacity_per_class = std::numeric_limits<std::size_t>::max())
      : capacity_(capacity_per_class) {}

  /// False (and a drop is counted) if the class FIFO is full.
  bool push(Packet p);
  std::optional<Packet> pop();
  const Packet* peek() const;

  std::size_t size() const { return high_.size() + low_.size(); }
  std::size_t high_size() const { return high_.size(); }
  std::size_t low_size() const { return low_.size(); }
  bool empty() const { return high_.empty() && low_.empty(); }
  std::uint64_t drops() const { return drops_; }

  /// With classes off every packet shares the Low FIFO; labels are kept.
  void set_classed(bool on) { classed_ = on; }
  bool classed() const { return classed_; }

 private:
  std::size_t capacity_;
  bool classed_ = true;
  std::deque<Packet> high_;
  std::deque<Packet> low_;
  std::uint64_t drops_ = 0;
};

using DriverExtractionFn = std::function<Priority(const Packet&)>;

/// Global, stateless driver-layer classifier: sees one packet, nothing else.
struct DriverExtraction {
  DriverExtractionFn callback;
  bool enabled = false;
  Nanos cost_ns = 100;

  void set(DriverExtractionFn fn) {
    callback = std::move(fn);
    enabled = static_cast<bool>(callback);
  }
};

/// Keyword matcher used by the workloads: labels a packet High when it
/// carries a message header declaring High, leaves everything else Unset.
DriverExtractionFn header_keyword_matcher();

/// Receive/send side of one NIC queue.
class Driver {
 public:
  explicit Driver(std::shared_ptr<DriverExtraction> extraction = std::make_shared<DriverExtraction>(),
                  std::size_t buffer_capacity = std::numeric_limits<std::size_t>::max())
      : extraction_(std::move(extraction)), rx_(buffer_capacity), tx_(buffer_capacity) {}

  /// rx_burst from the queue, classify, and file into the receive buffer.
  /// Adds poll and extraction cost to `cost`. Returns packets moved.
  std::size_t poll_and_classify(NicQueue& queue, std::size_t max_batch, Nanos& cost);

  /// Repeats poll_and_classify until the queue is empty.
  std::size_t drain(NicQueue& queue, std::size_t max_batch, Nanos& cost);

  void tx_enqueue(Packet p) { tx_.push(std::move(p)); }
  std::optional<Packet> tx_pop() { return tx_.pop(); }

  DriverBuffer& rx() { return rx_; }
  DriverBuffer& tx() { return tx_; }
  const DriverBuffer& rx() const { return rx_; }
  const DriverBuffer& tx() const { return tx_; }
  DriverExtraction& extraction() { return *extraction_; }

 private:
  std::shared_ptr<DriverExtraction> extraction_;
  DriverBuffer rx_;
  DriverBuffer tx_;
};

}  // namespace qstack
