#include "qstack/tcp.hpp"

#include <algorithm>

namespace qstack {

MessageBoundary MessageBoundary::load(std::span<const std::uint8_t, kPrivateFieldBytes> field) {
  MessageBoundary mb;
  for (int i = 0; i < 4; ++i) mb.remaining_bytes |= static_cast<std::uint32_t>(field[i]) << (8 * i);
  mb.current_label = field[4] == static_cast<std::uint8_t>(Priority::High) ? Priority::High : Priority::Low;
  return mb;
}

void MessageBoundary::store(std::span<std::uint8_t, kPrivateFieldBytes> field) const {
  for (int i = 0; i < 4; ++i) field[i] = static_cast<std::uint8_t>(remaining_bytes >> (8 * i));
  field[4] = static_cast<std::uint8_t>(current_label);
}

TcpExtractionFn stateful_header_extractor() {
  return [](const Packet& p, std::span<std::uint8_t, kPrivateFieldBytes> field) {
    auto mb = MessageBoundary::load(field);
    if (mb.remaining_bytes == 0) {
      if (!p.has_header) return Priority::Low;
      auto h = MessageHeader::decode(p.bytes());
      mb.current_label = h.priority == Priority::High ? Priority::High : Priority::Low;
      mb.remaining_bytes = h.total_length > p.seq_len ? h.total_length - p.seq_len : 0;
    } else {
      mb.remaining_bytes -= std::min(mb.remaining_bytes, p.seq_len);
    }
    mb.store(field);
    return mb.current_label;
  };
}

void TcpLayer::establish(FlowId id) {
  auto& fs = flows_[id];
  fs.flow = id;
  fs.established = true;
}

bool TcpLayer::established(FlowId id) const {
  auto it = flows_.find(id);
  return it != flows_.end() && it->second.established;
}

FlowState& TcpLayer::flow(FlowId id) {
  auto it = flows_.find(id);
  if (it == flows_.end() || !it->second.established)
    throw Error(ErrorCode::UnknownFlow, "unknown flow " + std::to_string(id));
  return it->second;
}

const FlowState& TcpLayer::flow(FlowId id) const {
  auto it = flows_.find(id);
  if (it == flows_.end() || !it->second.established)
    throw Error(ErrorCode::UnknownFlow, "unknown flow " + std::to_string(id));
  return it->second;
}

void TcpLayer::register_extraction(FlowId id, TcpExtractionFn fn) { flow(id).extraction = std::move(fn); }
void TcpLayer::clear_extraction(FlowId id) { flow(id).extraction.reset(); }

BatchResult TcpLayer::process_batch(std::span<Packet> packets, std::uint32_t producer, Nanos now) {
  BatchResult out;
  out.cost = cfg_.batch_overhead_ns;
  const std::size_t n = std::min(packets.size(), cfg_.max_batch);
  for (std::size_t i = 0; i < n; ++i) {
    Packet& p = packets[i];
    auto it = flows_.find(p.flow);
    if (it == flows_.end() || !it->second.established) {
      ++unknown_;
      continue;
    }
    FlowState& fs = it->second;
    out.cost += cfg_.per_packet_ns;
    ++out.processed;
    if (p.seq_len == 0) continue;

    const std::uint64_t end = p.seq_start + p.seq_len;
    if (end <= fs.next_expected_seq || p.seq_start > fs.next_expected_seq + cfg_.receive_window ||
        fs.out_of_order.count(p.seq_start)) {
      ++ignored_;
      continue;
    }

    if (fs.extraction) {
      // read private field, read packet, update private field, write label
      p.priority = effective((*fs.extraction)(p, std::span<std::uint8_t, kPrivateFieldBytes>(fs.private_field)));
      out.cost += cfg_.extraction_ns;
    } else {
      p.priority = effective(p.priority);
    }

    accept_payload(fs, p);
    if (p.priority == Priority::High && cfg_.priority_receive) track_high(fs, p);
    out.events.push_back(Event{p.flow, EventKind::Readable, p.priority, now, producer});
    out.sources.push_back(i);
  }
  return out;
}

void TcpLayer::accept_payload(FlowState& fs, const Packet& p) {
  if (p.has_header) fs.headers[p.seq_start] = MessageHeader::decode(p.bytes());
  const std::uint64_t end = p.seq_start + p.seq_len;
  if (p.seq_start <= fs.next_expected_seq) {
    fs.next_expected_seq = std::max(fs.next_expected_seq, end);
    for (auto it = fs.out_of_order.begin(); it != fs.out_of_order.end() && it->first <= fs.next_expected_seq;) {
      fs.next_expected_seq = std::max(fs.next_expected_seq, it->first + it->second);
      it = fs.out_of_order.erase(it);
    }
  } else {
    fs.out_of_order[p.seq_start] = p.seq_len;
  }
}

void TcpLayer::track_high(FlowState& fs, const Packet& p) {
  fs.high_segments[p.seq_start] = p.seq_len;
  auto h = fs.headers.upper_bound(p.seq_start);
  if (h == fs.headers.begin()) return;
  --h;
  const std::uint64_t start = h->first;
  const std::uint64_t len = h->second.total_length;
  if (p.seq_start >= start + len) return;
  if (start < fs.read_offset || fs.prio_queued.count(start) || fs.consumed.count(start)) return;

  std::uint64_t covered = 0;
  for (auto it = fs.high_segments.lower_bound(start); it != fs.high_segments.end() && it->first < start + len; ++it)
    covered += it->second;
  if (covered >= len) {
    fs.prio_queued.insert(start);
    fs.prio_rcv.push_back(MessageDescriptor{fs.flow, start, h->second, Priority::High});
  }
}

void TcpLayer::skip_consumed(FlowState& fs) {
  for (auto it = fs.consumed.find(fs.read_offset); it != fs.consumed.end(); it = fs.consumed.find(fs.read_offset)) {
    auto h = fs.headers.find(fs.read_offset);
    if (h == fs.headers.end()) break;
    fs.read_offset += h->second.total_length;
    fs.consumed.erase(it);
  }
  // Bookkeeping below the read offset is no longer needed.
  fs.headers.erase(fs.headers.begin(), fs.headers.lower_bound(fs.read_offset));
  fs.high_segments.erase(fs.high_segments.begin(), fs.high_segments.lower_bound(fs.read_offset));
  fs.prio_queued.erase(fs.prio_queued.begin(), fs.prio_queued.lower_bound(fs.read_offset));
}

std::optional<std::uint32_t> TcpLayer::recv(FlowId id, std::uint32_t max_bytes) {
  check(id);
  FlowState& fs = flow(id);
  skip_consumed(fs);
  std::uint64_t limit = fs.next_expected_seq;
  auto next_taken = fs.consumed.upper_bound(fs.read_offset);
  if (next_taken != fs.consumed.end()) limit = std::min(limit, *next_taken);
  if (limit <= fs.read_offset || max_bytes == 0) return std::nullopt;
  auto n = static_cast<std::uint32_t>(std::min<std::uint64_t>(max_bytes, limit - fs.read_offset));
  fs.read_offset += n;
  skip_consumed(fs);
  return n;
}

std::optional<MessageDescriptor> TcpLayer::recv_message(FlowId id) {
  check(id);
  FlowState& fs = flow(id);
  skip_consumed(fs);
  auto h = fs.headers.find(fs.read_offset);
  if (h == fs.headers.end()) return std::nullopt;
  const std::uint64_t start = h->first;
  if (start + h->second.total_length > fs.next_expected_seq) return std::nullopt;
  MessageDescriptor d{id, start, h->second, fs.prio_queued.count(start) ? Priority::High : Priority::Low};
  fs.read_offset = start + h->second.total_length;
  skip_consumed(fs);
  return d;
}

std::optional<MessageDescriptor> TcpLayer::recv_priority(FlowId id) {
  check(id);
  FlowState& fs = flow(id);
  while (!fs.prio_rcv.empty()) {
    MessageDescriptor d = fs.prio_rcv.front();
    fs.prio_rcv.pop_front();
    if (d.seq_start < fs.read_offset) continue;  // already read in order
    fs.consumed.insert(d.seq_start);
    skip_consumed(fs);
    return d;
  }
  return std::nullopt;
}

std::size_t TcpLayer::send(FlowId id, std::uint32_t bytes, Priority priority, Driver& driver, RequestId request) {
  check(id);
  FlowState& fs = flow(id);
  std::size_t count = 0;
  while (bytes > 0) {
    std::uint32_t len = std::min(bytes, cfg_.mss);
    Packet p;
    p.flow = id;
    p.seq_start = fs.send_seq;
    p.seq_len = len;
    p.request = request;
    p.priority = priority;
    fs.send_seq += len;
    bytes -= len;
    driver.tx_enqueue(std::move(p));
    ++count;
  }
  return count;
}

std::span<const std::uint8_t> TcpLayer::private_read(FlowId id, std::size_t offset, std::size_t len) const {
  const FlowState& fs = flow(id);
  if (offset + len > kPrivateFieldBytes) throw Error(ErrorCode::OutOfBounds, "private field read out of bounds");
  return std::span<const std::uint8_t>(fs.private_field).subspan(offset, len);
}

void TcpLayer::private_write(FlowId id, std::size_t offset, std::span<const std::uint8_t> bytes) {
  FlowState& fs = flow(id);
  if (offset + bytes.size() > kPrivateFieldBytes) throw Error(ErrorCode::OutOfBounds, "private field write out of bounds");
  std::copy(bytes.begin(), bytes.end(), fs.private_field.begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace qstack
