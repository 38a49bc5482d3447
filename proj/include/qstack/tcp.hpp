#pragma once

#include <array>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "qstack/driver.hpp"
#include "qstack/events.hpp"
#include "qstack/nic.hpp"

namespace qstack {

inline constexpr std::size_t kPrivateFieldBytes = 64;
using PrivateField = std::array<std::uint8_t, kPrivateFieldBytes>;

/// Per-flow stateful classifier; may read/write only its own flow's private field.
using TcpExtractionFn = std::function<Priority(const Packet&, std::span<std::uint8_t, kPrivateFieldBytes>)>;

/// Message-boundary tracker kept in the first bytes of the private field:
/// remaining unread bytes of the current message (u32 LE) and its label.
struct MessageBoundary {
  std::uint32_t remaining_bytes = 0;
  Priority current_label = Priority::Low;

  static MessageBoundary load(std::span<const std::uint8_t, kPrivateFieldBytes> field);
  void store(std::span<std::uint8_t, kPrivateFieldBytes> field) const;
};

/// Labels every packet of a message with the class its header declares,
/// carrying the decision across packets through the private field.
TcpExtractionFn stateful_header_extractor();

struct MessageDescriptor {
  FlowId flow = 0;
  std::uint64_t seq_start = 0;
  MessageHeader header;
  Priority label = Priority::Low;
};

struct FlowState {
  FlowId flow = 0;
  bool established = false;
  std::uint64_t next_expected_seq = 0;  // contiguous bytes received
  std::uint64_t read_offset = 0;        // in-order bytes consumed by the app
  std::map<std::uint64_t, std::uint32_t> out_of_order;  // seq -> len beyond next_expected
  std::map<std::uint64_t, MessageHeader> headers;        // message start -> header
  std::map<std::uint64_t, std::uint32_t> high_segments;  // High-labelled payload seen
  std::set<std::uint64_t> prio_queued;                    // messages already in prio_rcv
  std::set<std::uint64_t> consumed;                       // messages taken out of order
  std::deque<MessageDescriptor> prio_rcv;
  std::optional<TcpExtractionFn> extraction;
  PrivateField private_field{};
  std::uint64_t send_seq = 0;
};

struct TcpConfig {
  Nanos per_packet_ns = 300;
  Nanos batch_overhead_ns = 0;
  Nanos extraction_ns = 100;
  Nanos timer_check_ns = 0;  // retransmission timers are not modelled; cost hook only
  std::size_t max_batch = 64;
  std::uint32_t mss = 1460;
  std::uint64_t receive_window = 16u << 20;
  bool priority_receive = true;  // keep High payload in a separate out-of-order buffer
};

struct BatchResult {
  std::vector<Event> events;
  std::vector<std::size_t> sources;  // packet index behind each event
  std::size_t processed = 0;
  Nanos cost = 0;
};

/// Established-flow TCP: sequencing, reassembly, fastcallup labelling and
/// the priority out-of-order receive path.
class TcpLayer {
 public:
  explicit TcpLayer(TcpConfig cfg = {}) : cfg_(cfg) {}

  const TcpConfig& config() const { return cfg_; }
  TcpConfig& config() { return cfg_; }

  void establish(FlowId flow);
  bool established(FlowId flow) const;
  FlowState& flow(FlowId id);
  const FlowState& flow(FlowId id) const;

  /// Installs or replaces the flow's tcp_extraction hook. UnknownFlow if
  /// the flow is not established.
  void register_extraction(FlowId flow, TcpExtractionFn fn);
  void clear_extraction(FlowId flow);

  /// Processes up to cfg.max_batch packets (the rest are ignored by the
  /// caller's contract). Emits one Readable event per payload packet with
  /// the packet's final label; `producer` and `now` stamp the events.
  BatchResult process_batch(std::span<Packet> packets, std::uint32_t producer, Nanos now);

  /// In-order bytes; nullopt means WouldBlock.
  std::optional<std::uint32_t> recv(FlowId flow, std::uint32_t max_bytes);
  /// Next complete in-order message, skipping messages already taken by
  /// recv_priority; nullopt means WouldBlock.
  std::optional<MessageDescriptor> recv_message(FlowId flow);
  /// Oldest complete High message even if earlier Low data is unread.
  std::optional<MessageDescriptor> recv_priority(FlowId flow);

  /// Segments by MSS, labels, hands packets to the driver send buffer.
  std::size_t send(FlowId flow, std::uint32_t bytes, Priority priority, Driver& driver, RequestId request = 0);

  std::span<const std::uint8_t> private_read(FlowId flow, std::size_t offset, std::size_t len) const;
  void private_write(FlowId flow, std::size_t offset, std::span<const std::uint8_t> bytes);

  /// Fired once by every recv*/send call.
  void set_implicit_check(std::function<void(FlowId)> fn) { implicit_check_ = std::move(fn); }

  std::uint64_t ignored() const { return ignored_; }
  std::uint64_t unknown_flow_packets() const { return unknown_; }
  std::size_t num_flows() const { return flows_.size(); }

 private:
  void check(FlowId f) {
    if (implicit_check_) implicit_check_(f);
  }
  void accept_payload(FlowState& fs, const Packet& p);
  void track_high(FlowState& fs, const Packet& p);
  void skip_consumed(FlowState& fs);

  TcpConfig cfg_;
  std::unordered_map<FlowId, FlowState> flows_;
  std::function<void(FlowId)> implicit_check_;
  std::uint64_t ignored_ = 0;
  std::uint64_t unknown_ = 0;
};

}  // namespace qstack
