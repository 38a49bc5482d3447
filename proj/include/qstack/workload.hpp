#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qstack/core.hpp"
#include "qstack/driver.hpp"
#include "qstack/events.hpp"
#include "qstack/nic.hpp"
#include "qstack/tcp.hpp"

namespace qstack {

struct RequestClass {
  std::string name;
  double fraction = 1.0;
  Nanos service_ns = us(1);
  Priority priority = Priority::Low;
  std::uint32_t request_bytes = 64;
};

enum class ArrivalPattern { Poisson, Uniform, Burst };

std::string_view to_string(ArrivalPattern a);
ArrivalPattern arrival_from_string(std::string_view s);

/// Offered rate (requests/s) from `at` onward; used for load steps.
struct RateStep {
  Nanos at = 0;
  double rate = 0;
};

/// A fixed arrival used instead of the random process.
struct ScriptedRequest {
  Nanos at = 0;
  std::uint32_t class_index = 0;
  FlowId flow = 0;
};

struct WorkloadSpec {
  std::uint32_t num_connections = 1000;
  std::vector<RequestClass> classes{RequestClass{"default", 1.0, us(1), Priority::Low, 64}};
  ArrivalPattern arrival = ArrivalPattern::Poisson;
  double rate = 10'000;                 // requests/s for Poisson/Uniform
  std::vector<RateStep> rate_steps;     // overrides `rate` piecewise when non-empty
  double bursts_per_s = 0;              // Burst pattern
  std::uint32_t burst_size = 0;
  Nanos compress_window = 0;            // squeeze each second's traffic into this window (0 = off)
  Nanos duration = ms(100);
  std::uint64_t seed = 1;
  std::uint32_t response_bytes = 128;
  double link_gbps = 10.0;
  std::uint32_t mss = 1460;
  std::vector<ScriptedRequest> script;  // non-empty: replaces arrival/rate/class draws

  /// Throws InvalidConfig when fractions do not sum to 1 or times are not positive.
  void validate() const;
};

struct RequestInfo {
  RequestId id = 0;
  FlowId flow = 0;
  std::uint32_t class_index = 0;
  Priority priority = Priority::Low;
  Nanos service_ns = 0;
  std::uint32_t bytes = 0;
  std::uint64_t seq_start = 0;
  std::uint32_t packets = 0;
  Nanos t_first = 0;
};

struct ArrivalSchedule {
  std::vector<RequestInfo> requests;  // indexed by RequestId
  std::vector<Packet> packets;        // sorted by t_arrive_nic (scheduled arrival)
};

/// Seeded open-loop schedule. Classes are assigned by exact quota then
/// shuffled; each request is split by MSS with its header in packet one.
ArrivalSchedule generate(const WorkloadSpec& spec);

/// Wire time of one frame carrying `payload` bytes (Ethernet + IP + TCP
/// headers, 64 B minimum frame, preamble and inter-frame gap).
std::uint64_t wire_bits(std::uint32_t payload);

/// Arrival instants of n back-to-back frames of `frame_bytes` at line rate.
std::vector<Nanos> line_rate_schedule(std::size_t n, std::uint32_t frame_bytes = 64, double gbps = 10.0);

/// mt19937_64 with hand-rolled distributions; the std distributions are
/// implementation-defined and would make schedules library-dependent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform01();                         // [0, 1)
  std::uint64_t below(std::uint64_t bound);   // [0, bound)
  double exponential(double rate);

 private:
  std::mt19937_64 engine_;
};

/// The built-in IoT-router style server: on a Readable event pull one
/// complete request (priority path first for High events when enabled),
/// serve it for its declared service time, answer with a fixed-size reply.
struct IotServerConfig {
  bool use_priority_recv = true;
  std::uint32_t response_bytes = 128;
  Nanos checkpoint_interval = us(10);
  bool explicit_checkpoints = true;  // false: checks only at API calls
};

class IotServerApp {
 public:
  using Config = IotServerConfig;

  explicit IotServerApp(Config cfg = {}) : cfg_(cfg) {}
  const Config& config() const { return cfg_; }

  std::optional<MessageDescriptor> on_event(const Event& e, TcpLayer& tcp) const;
  WorkSegment segment_for(const MessageDescriptor& m) const;
  std::size_t respond(const MessageDescriptor& m, Priority label, TcpLayer& tcp, Driver& driver, RequestId id) const;

 private:
  Config cfg_;
};

}  // namespace qstack
