#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qstack/fastpath.hpp"
#include "qstack/metrics.hpp"
#include "qstack/resource.hpp"
#include "qstack/workload.hpp"

namespace qstack {

enum class ExtractionMode { None, Driver, Tcp, Both };

std::string_view to_string(ExtractionMode m);
ExtractionMode extraction_from_string(std::string_view s);

struct PriorityFeatures {
  bool event_prio = true;      // High-before-Low event channels
  bool ooo_prio = true;        // separate High receive buffer + recv_priority
  bool driver_prio = true;     // split driver rx/tx buffers
  bool diffluence = false;     // High and Low events of a flow go to different apps
  bool priority_yield = false;  // priority check inside fastcalldown
};

/// Explicit coroutine placement for the initial plan.
struct Placement {
  std::vector<CoreId> stack_core;
  std::vector<CoreId> app_core;
};

struct SimConfig {
  std::uint32_t cores = 1;
  std::uint32_t queues = 1;  // one RSS group per queue
  std::size_t queue_capacity = NicQueue::kDefaultCapacity;
  std::size_t nic_batch = 32;
  FcdThresholds thresholds;
  bool fastcalldown = true;  // explicit checkpoints inside app work
  Nanos checkpoint_interval = us(10);
  ExtractionMode extraction = ExtractionMode::None;
  PriorityFeatures features;
  std::uint32_t diffluence_high_app = 0;
  std::uint32_t diffluence_low_app = 1;
  std::uint32_t K = 1;
  std::uint32_t M = 1;
  std::optional<Placement> placement;
  bool dynamic = false;
  Policy policy = Policy::defaults();
  Nanos period = ms(10);
  Nanos grace = ms(50);  // simulated time after the workload ends
  WorkloadSpec workload;
  TcpConfig tcp;
  Nanos driver_extraction_ns = 100;
  std::size_t driver_buffer_capacity = std::numeric_limits<std::size_t>::max();

  /// Throws InvalidConfig on inconsistent settings.
  void validate() const;
};

struct RequestRecord {
  RequestId id = 0;
  FlowId flow = 0;
  std::uint32_t class_index = 0;
  Priority priority = Priority::Low;  // declared in the header
  Nanos t_enter = 0;                  // first packet at the NIC
  Nanos t_event = kNever;             // first readiness event emitted
  Nanos t_service_start = kNever;
  Nanos t_service_end = kNever;
  Nanos t_leave = kNever;             // last response packet transmitted
  std::uint32_t response_left = 0;
  bool done = false;
};

struct TimelineRow {
  Nanos period_end = 0;
  double load_pct = 0;
  std::uint32_t K = 0;
  std::uint32_t M = 0;
  std::string roles;
  std::optional<Nanos> p99_high;
  std::optional<Nanos> p99_low;
  std::optional<Nanos> p99_all;
  std::uint64_t drops = 0;
  double eta = 0;
};

struct PlanChange {
  Nanos at = 0;
  ResourcePlan plan;
};

struct CoreStats {
  CoreRole role = CoreRole::Idle;
  CoreAccount account;
  std::uint64_t explicit_checks = 0;
  std::uint64_t implicit_checks = 0;
  Nanos explicit_check_ns = 0;
  std::uint64_t drains = 0;
  std::uint64_t tcp_batches = 0;
  std::uint64_t budget_yields = 0;
  std::uint64_t priority_yields = 0;
  Nanos max_run_ns = 0;  // longest continuous run of one task
};

struct QueueStats {
  std::uint64_t enqueued = 0;
  std::uint64_t dequeued = 0;
  std::uint64_t drops = 0;
  Nanos first_drop_at = kNever;
};

/// Final TCP-layer labels of request packets, split by declared class.
struct LabelStats {
  std::uint64_t high_request_packets = 0;
  std::uint64_t high_request_packets_high = 0;
  std::uint64_t high_request_first_high = 0;
  std::uint64_t high_request_rest_high = 0;
  std::uint64_t high_requests_seen = 0;
  std::uint64_t low_request_packets_high = 0;
};

struct SimReport {
  Nanos end_time = 0;
  std::uint64_t offered = 0;
  std::uint64_t completed = 0;
  Metrics by_class;
  LatencyHistogram high;
  LatencyHistogram low;
  LatencyHistogram all;
  std::vector<QueueStats> queues;
  std::uint64_t drops = 0;
  Nanos first_drop_at = kNever;
  std::vector<CoreStats> cores;
  double eta = 0;
  std::uint64_t events_emitted = 0;
  std::uint64_t events_delivered = 0;
  std::uint64_t events_orphaned = 0;
  std::uint64_t events_pending = 0;
  std::uint64_t binding_conflicts = 0;
  std::uint64_t tcp_ignored = 0;
  std::uint64_t driver_drops = 0;
  LabelStats labels;
  std::vector<PlanChange> plan_changes;
  std::vector<TimelineRow> timeline;
  std::vector<RequestRecord> requests;
};

/// Single-threaded engine: cores step in virtual time, lowest clock first
/// (ties by core id); the resource manager acts at period boundaries.
class Simulation {
 public:
  explicit Simulation(SimConfig cfg);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  SimReport run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qstack
