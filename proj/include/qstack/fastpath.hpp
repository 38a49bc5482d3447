#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "qstack/driver.hpp"
#include "qstack/tcp.hpp"

namespace qstack {

struct FcdThresholds {
  Nanos nic_check_interval = us(200);
  Nanos tcp_process_interval = us(50);
  Nanos coroutine_budget = ms(10);
  Nanos check_cost = 22;
  bool priority_check = false;
};

/// Per-core timestamps of the last NIC drain and TCP batch.
struct FcdState {
  Nanos last_nic_check = 0;
  Nanos last_tcp_process = 0;
};

enum class FcdAction : std::uint8_t { None = 0, DrainNic = 1, TcpBatch = 2, Reschedule = 4, PriorityYield = 8 };

class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr void add(FcdAction a) { bits_ |= static_cast<std::uint8_t>(a); }
  constexpr bool has(FcdAction a) const { return bits_ & static_cast<std::uint8_t>(a); }
  constexpr bool none() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  std::string to_string() const;

 private:
  std::uint8_t bits_ = 0;
};

struct CheckContext {
  Nanos now = 0;
  Nanos run_start = 0;                  // dispatch time of the running task
  bool hosts_stack = true;              // a stack coroutine lives on this core
  bool running_serves_low = false;      // running task is executing a Low request
  bool high_pending_elsewhere = false;  // another task on the core has a High event
};

/// The fastcalldown decision: read the clock, compare against thresholds,
/// update the per-core timestamps for actions that fire. Non-triggering
/// calls cost thresholds.check_cost; callers charge action work separately.
ActionSet fastcalldown_check(const FcdThresholds& th, FcdState& state, const CheckContext& ctx);

/// NIC-check cost over one period with n requests: fastcalldown issues
/// `calls_per_request` timestamp checks per request plus one empty NIC
/// poll; coroutine mode yields and polls the NIC after every request.
struct CostComparison {
  Nanos fastcalldown_ns = 0;
  Nanos coroutine_mode_ns = 0;
  bool fastcalldown_cheaper() const { return fastcalldown_ns < coroutine_mode_ns; }
};

CostComparison cost_compare(std::int64_t n_requests, Nanos empty_check_cost = 100, Nanos check_cost = 22,
                            std::int64_t calls_per_request = 3, Nanos yield_cost = 6);

enum class Layer { Nic, Driver, Tcp, EventFramework };

using Callup = std::variant<DriverExtractionFn, TcpExtractionFn>;

/// Binds application classifiers to stack layers.
class CallupRegistry {
 public:
  CallupRegistry(std::shared_ptr<DriverExtraction> driver, TcpLayer& tcp) : driver_(std::move(driver)), tcp_(tcp) {}

  /// Driver callbacks are global (flow must be empty); Tcp callbacks are
  /// per flow. Nic and EventFramework have no extraction point.
  void register_callup(Layer layer, std::optional<FlowId> flow, Callup callback);

 private:
  std::shared_ptr<DriverExtraction> driver_;
  TcpLayer& tcp_;
};

}  // namespace qstack
