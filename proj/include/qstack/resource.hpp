#pragma once

#include <map>
#include <string>
#include <vector>

#include "qstack/core.hpp"

namespace qstack {

/// Per-core role assignment plus coroutine placement.
struct ResourcePlan {
  std::uint32_t K = 1;  // live stack coroutines
  std::uint32_t M = 1;  // live app coroutines
  std::vector<CoreRole> roles;
  std::vector<CoreId> stack_core;            // size K
  std::vector<CoreId> app_core;              // size M
  std::vector<std::uint32_t> group_to_stack;  // RSS group -> stack index

  bool operator==(const ResourcePlan&) const = default;
  std::string describe() const;
};

/// Default placement: K=M=1 is one Shared core; otherwise stacks get one
/// StackOnly core each and apps are packed two per AppOnly core. When the
/// core pool is too small, every core becomes Shared.
ResourcePlan build_plan(std::uint32_t K, std::uint32_t M, std::uint32_t num_cores, std::uint32_t num_groups);

/// Throws InvalidPlan if the plan references coroutines beyond the pools or
/// breaks the role/placement invariants.
void validate_plan(const ResourcePlan& plan, std::uint32_t stack_pool, std::uint32_t app_pool, std::uint32_t num_cores);

struct PolicyRow {
  double load_pct_max = 100;
  std::uint32_t K = 1;
  std::uint32_t M = 1;
};

struct Policy {
  std::vector<PolicyRow> rows;
  std::uint32_t max_rows_per_period = 1;  // step limit toward the target row
  double reference_rps = 200'000;         // offered rate counted as 100%
  double overload_busy_ratio = 0.9;
  std::uint32_t overload_periods = 2;

  /// Step table: <=12% one shared core, <=50% (2,4), above that (3,6).
  static Policy defaults();
  std::size_t row_for(double load_pct) const;
  /// Row whose (K, M) equals the plan's, else the first row not below it.
  std::size_t row_of(std::uint32_t K, std::uint32_t M) const;
};

/// Statistics of one completed period.
struct PeriodSample {
  Nanos start = 0;
  Nanos end = 0;
  std::uint64_t requests_offered = 0;
  std::vector<Nanos> core_app_busy;        // service ns per core
  std::vector<std::uint64_t> core_backlog;  // queued events + buffered packets at period end
};

struct LoadSummary {
  double load_pct = 0;
  std::vector<bool> overloaded;
  std::vector<bool> idle_eligible;
};

struct MigrationReport {
  std::vector<std::uint32_t> suspended_apps;
  std::vector<std::uint32_t> woken_apps;
  std::vector<std::uint32_t> moved_apps;
  std::vector<std::uint32_t> suspended_stacks;
  std::vector<std::uint32_t> woken_stacks;
  std::vector<std::uint32_t> moved_stacks;
  std::vector<std::uint32_t> remapped_groups;

  bool empty() const;
};

/// What changes between two plans; the engine carries it out.
MigrationReport diff_plans(const ResourcePlan& from, const ResourcePlan& to);

/// Dynamic detect: turn period statistics into plans.
class ResourceManager {
 public:
  ResourceManager(Policy policy, std::uint32_t num_cores, std::uint32_t num_groups)
      : policy_(std::move(policy)), num_cores_(num_cores), num_groups_(num_groups) {}

  const Policy& policy() const { return policy_; }

  LoadSummary collect(const PeriodSample& s) const;
  /// Table step toward the load's row; when the row holds, a core flagged
  /// overloaded for policy.overload_periods consecutive periods sheds one
  /// app coroutine to the least busy core.
  ResourcePlan decide(const LoadSummary& summary, const ResourcePlan& current);

 private:
  Policy policy_;
  std::uint32_t num_cores_;
  std::uint32_t num_groups_;
  std::vector<std::uint32_t> overload_streak_;
};

}  // namespace qstack
