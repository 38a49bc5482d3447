#include "qstack/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qstack {

std::string_view to_string(ArrivalPattern a) {
  switch (a) {
    case ArrivalPattern::Poisson: return "poisson";
    case ArrivalPattern::Uniform: return "uniform";
    case ArrivalPattern::Burst: return "burst";
  }
  return "poisson";
}

ArrivalPattern arrival_from_string(std::string_view s) {
  if (s == "poisson") return ArrivalPattern::Poisson;
  if (s == "uniform") return ArrivalPattern::Uniform;
  if (s == "burst") return ArrivalPattern::Burst;
  throw Error(ErrorCode::InvalidConfig, "unknown arrival pattern '" + std::string(s) + "'");
}

void WorkloadSpec::validate() const {
  if (classes.empty()) throw Error(ErrorCode::InvalidConfig, "workload needs at least one class");
  double sum = 0;
  for (const auto& c : classes) {
    if (c.fraction < 0) throw Error(ErrorCode::InvalidConfig, "negative class fraction");
    if (c.service_ns <= 0) throw Error(ErrorCode::InvalidConfig, "class service time must be positive");
    if (c.request_bytes < kMessageHeaderBytes) throw Error(ErrorCode::InvalidConfig, "request smaller than its header");
    sum += c.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidConfig, "class fractions must sum to 1");
  if (duration <= 0) throw Error(ErrorCode::InvalidConfig, "duration must be positive");
  if (num_connections == 0) throw Error(ErrorCode::InvalidConfig, "need at least one connection");
  if (link_gbps <= 0 || mss == 0) throw Error(ErrorCode::InvalidConfig, "bad link parameters");
  if (arrival == ArrivalPattern::Burst && (bursts_per_s <= 0 || burst_size == 0))
    throw Error(ErrorCode::InvalidConfig, "burst pattern needs bursts_per_s and burst_size");
  for (const auto& s : script)
    if (s.class_index >= classes.size() || s.flow >= num_connections || s.at < 0)
      throw Error(ErrorCode::InvalidConfig, "scripted request out of range");
  if (script.empty() && arrival != ArrivalPattern::Burst && rate_steps.empty() && rate <= 0)
    throw Error(ErrorCode::InvalidConfig, "rate must be positive");
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}
std::uint64_t Rng::next() { return engine_(); }
double Rng::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
std::uint64_t Rng::below(std::uint64_t bound) {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do x = next();
  while (x >= limit);
  return x % bound;
}
double Rng::exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

std::uint64_t wire_bits(std::uint32_t payload) {
  const std::uint64_t frame = std::max<std::uint64_t>(64, static_cast<std::uint64_t>(payload) + 54);
  return (frame + 20) * 8;
}

std::vector<Nanos> line_rate_schedule(std::size_t n, std::uint32_t frame_bytes, double gbps) {
  std::vector<Nanos> out(n);
  const double bits = (static_cast<double>(frame_bytes) + 20.0) * 8.0;
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<Nanos>(std::floor(static_cast<double>(i) * bits / gbps));
  return out;
}

namespace {

double rate_at(const WorkloadSpec& spec, Nanos t) {
  if (spec.rate_steps.empty()) return spec.rate;
  double r = spec.rate_steps.front().rate;
  for (const auto& s : spec.rate_steps)
    if (s.at <= t) r = s.rate;
  return r;
}

Nanos next_step_after(const WorkloadSpec& spec, Nanos t) {
  for (const auto& s : spec.rate_steps)
    if (s.at > t) return s.at;
  return kNever;
}

// Largest-remainder apportionment of n requests over class fractions.
std::vector<std::uint32_t> quotas(const std::vector<RequestClass>& classes, std::size_t n) {
  std::vector<std::uint32_t> q(classes.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    double exact = classes[i].fraction * static_cast<double>(n);
    q[i] = static_cast<std::uint32_t>(std::floor(exact + 1e-9));
    assigned += q[i];
    rem.emplace_back(exact - q[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++q[rem[k % rem.size()].second];
  return q;
}

}  // namespace

ArrivalSchedule generate(const WorkloadSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Request start instants; burst members carry their burst start and are
  // laid out back-to-back once their sizes are known.
  struct Slot {
    Nanos t;
    bool in_burst;
  };
  std::vector<Slot> slots;
  std::vector<ScriptedRequest> script = spec.script;
  std::stable_sort(script.begin(), script.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  for (const auto& s : script) slots.push_back({s.at, false});
  if (script.empty()) switch (spec.arrival) {
    case ArrivalPattern::Burst: {
      const double gap = 1e9 / spec.bursts_per_s;
      for (std::uint64_t k = 0;; ++k) {
        auto t = static_cast<Nanos>(std::floor(static_cast<double>(k) * gap));
        if (t >= spec.duration) break;
        for (std::uint32_t i = 0; i < spec.burst_size; ++i) slots.push_back({t, true});
      }
      break;
    }
    case ArrivalPattern::Poisson: {
      double t = 0;
      while (true) {
        double r = rate_at(spec, static_cast<Nanos>(t));
        if (r <= 0) {
          Nanos nxt = next_step_after(spec, static_cast<Nanos>(t));
          if (nxt == kNever) break;
          t = static_cast<double>(nxt);
          continue;
        }
        double cand = t + rng.exponential(r) * 1e9;
        Nanos boundary = next_step_after(spec, static_cast<Nanos>(t));
        if (boundary != kNever && cand >= static_cast<double>(boundary)) {
          t = static_cast<double>(boundary);  // memoryless: restart at the new rate
          continue;
        }
        t = cand;
        if (t >= static_cast<double>(spec.duration)) break;
        slots.push_back({static_cast<Nanos>(t), false});
      }
      break;
    }
    case ArrivalPattern::Uniform: {
      double t = 0;
      while (t < static_cast<double>(spec.duration)) {
        double r = rate_at(spec, static_cast<Nanos>(t));
        if (r <= 0) {
          Nanos nxt = next_step_after(spec, static_cast<Nanos>(t));
          if (nxt == kNever) break;
          t = static_cast<double>(nxt);
          continue;
        }
        slots.push_back({static_cast<Nanos>(t), false});
        t += 1e9 / r;
      }
      break;
    }
  }

  if (spec.compress_window > 0) {
    for (auto& s : slots) {
      Nanos sec = s.t / kNsPerSec * kNsPerSec;
      s.t = sec + static_cast<Nanos>(static_cast<double>(s.t - sec) * static_cast<double>(spec.compress_window) /
                                     static_cast<double>(kNsPerSec));
    }
  }

  const std::size_t n = slots.size();
  std::vector<std::uint32_t> cls;
  cls.reserve(n);
  auto q = quotas(spec.classes, n);
  for (std::uint32_t c = 0; c < q.size(); ++c) cls.insert(cls.end(), q[c], c);
  for (std::size_t i = n; i > 1; --i) std::swap(cls[i - 1], cls[rng.below(i)]);  // Fisher-Yates
  for (std::size_t i = 0; i < script.size(); ++i) cls[i] = script[i].class_index;

  ArrivalSchedule out;
  out.requests.reserve(n);
  std::vector<std::uint64_t> flow_seq(spec.num_connections, 0);
  Nanos burst_start = -1;
  std::uint64_t burst_bits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rc = spec.classes[cls[i]];
    RequestInfo r;
    r.id = i;
    r.flow = script.empty() ? static_cast<FlowId>(rng.below(spec.num_connections)) : script[i].flow;
    r.class_index = cls[i];
    r.priority = rc.priority;
    r.service_ns = rc.service_ns;
    r.bytes = rc.request_bytes;
    r.seq_start = flow_seq[r.flow];
    flow_seq[r.flow] += r.bytes;

    std::uint64_t req_bits_before = 0;
    if (slots[i].in_burst) {
      if (slots[i].t != burst_start) {
        burst_start = slots[i].t;
        burst_bits = 0;
      }
      req_bits_before = burst_bits;
    }
    const Nanos base = slots[i].in_burst ? burst_start : slots[i].t;

    MessageHeader h{r.bytes, static_cast<std::uint8_t>(r.class_index), r.priority, r.service_ns};
    std::uint32_t left = r.bytes;
    std::uint64_t seq = r.seq_start;
    std::uint64_t bits = req_bits_before;
    bool first = true;
    while (left > 0) {
      std::uint32_t len = std::min(left, spec.mss);
      Packet p;
      p.flow = r.flow;
      p.seq_start = seq;
      p.seq_len = len;
      p.request = r.id;
      p.has_header = first;
      if (first) p.header = h.encode();
      p.t_arrive_nic = base + static_cast<Nanos>(std::floor(static_cast<double>(bits) / spec.link_gbps));
      if (first) r.t_first = p.t_arrive_nic;
      bits += wire_bits(len);
      out.packets.push_back(p);
      seq += len;
      left -= len;
      ++r.packets;
      first = false;
    }
    if (slots[i].in_burst) burst_bits = bits;
    out.requests.push_back(r);
  }
  std::stable_sort(out.packets.begin(), out.packets.end(),
                   [](const Packet& a, const Packet& b) { return a.t_arrive_nic < b.t_arrive_nic; });
  return out;
}

std::optional<MessageDescriptor> IotServerApp::on_event(const Event& e, TcpLayer& tcp) const {
  if (e.kind != EventKind::Readable) return std::nullopt;
  if (cfg_.use_priority_recv && e.priority == Priority::High) {
    if (auto m = tcp.recv_priority(e.flow)) return m;
  }
  return tcp.recv_message(e.flow);
}

WorkSegment IotServerApp::segment_for(const MessageDescriptor& m) const {
  const Nanos d = m.header.service_ns;
  return WorkSegment{d, cfg_.explicit_checkpoints ? cfg_.checkpoint_interval : std::max<Nanos>(d, 1)};
}

std::size_t IotServerApp::respond(const MessageDescriptor& m, Priority label, TcpLayer& tcp, Driver& driver,
                                  RequestId id) const {
  return tcp.send(m.flow, cfg_.response_bytes, label, driver, id);
}

}  // namespace qstack
