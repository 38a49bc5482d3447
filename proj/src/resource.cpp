#include "qstack/resource.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>

namespace qstack {

std::string ResourcePlan::describe() const {
  std::ostringstream os;
  os << "K=" << K << " M=" << M << " roles=";
  for (std::size_t c = 0; c < roles.size(); ++c) {
    if (c) os << ',';
    switch (roles[c]) {
      case CoreRole::Idle: os << '-'; break;
      case CoreRole::AppOnly: os << 'A'; break;
      case CoreRole::StackOnly: os << 'S'; break;
      case CoreRole::Shared: os << "A+S"; break;
    }
  }
  return os.str();
}

namespace {

void assign_roles(ResourcePlan& p, std::uint32_t num_cores) {
  std::vector<bool> has_stack(num_cores, false), has_app(num_cores, false);
  for (CoreId c : p.stack_core) has_stack[c] = true;
  for (CoreId c : p.app_core) has_app[c] = true;
  p.roles.assign(num_cores, CoreRole::Idle);
  for (CoreId c = 0; c < num_cores; ++c) {
    if (has_stack[c] && has_app[c]) p.roles[c] = CoreRole::Shared;
    else if (has_stack[c]) p.roles[c] = CoreRole::StackOnly;
    else if (has_app[c]) p.roles[c] = CoreRole::AppOnly;
  }
}

}  // namespace

ResourcePlan build_plan(std::uint32_t K, std::uint32_t M, std::uint32_t num_cores, std::uint32_t num_groups) {
  if (K == 0 || M == 0 || num_cores == 0) throw Error(ErrorCode::InvalidPlan, "plan needs K, M and cores >= 1");
  ResourcePlan p;
  p.K = K;
  p.M = M;
  const std::uint32_t app_cores = (M + 1) / 2;
  if (K == 1 && M == 1) {
    p.stack_core = {0};
    p.app_core = {0};
  } else if (K + app_cores <= num_cores) {
    for (std::uint32_t s = 0; s < K; ++s) p.stack_core.push_back(s);
    for (std::uint32_t a = 0; a < M; ++a) p.app_core.push_back(K + a / 2);
  } else {
    const std::uint32_t used = std::min(num_cores, std::max(K, app_cores));
    for (std::uint32_t s = 0; s < K; ++s) p.stack_core.push_back(s % used);
    for (std::uint32_t a = 0; a < M; ++a) p.app_core.push_back(a % used);
  }
  p.group_to_stack.resize(num_groups);
  for (std::uint32_t g = 0; g < num_groups; ++g) p.group_to_stack[g] = g % K;
  assign_roles(p, num_cores);
  return p;
}

void validate_plan(const ResourcePlan& p, std::uint32_t stack_pool, std::uint32_t app_pool, std::uint32_t num_cores) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidPlan, why); };
  if (p.K == 0) fail("no live stack coroutine");
  if (p.K > stack_pool) fail("plan references stack coroutine beyond the pool");
  if (p.M > app_pool) fail("plan references app coroutine beyond the pool");
  if (p.stack_core.size() != p.K || p.app_core.size() != p.M) fail("placement size mismatch");
  if (p.roles.size() != num_cores) fail("role vector size mismatch");
  for (CoreId c : p.stack_core)
    if (c >= num_cores) fail("stack placed on unknown core");
  for (CoreId c : p.app_core)
    if (c >= num_cores) fail("app placed on unknown core");
  for (auto s : p.group_to_stack)
    if (s >= p.K) fail("RSS group mapped to a dead stack coroutine");
  std::vector<int> stacks(num_cores, 0), apps(num_cores, 0);
  for (CoreId c : p.stack_core) ++stacks[c];
  for (CoreId c : p.app_core) ++apps[c];
  for (CoreId c = 0; c < num_cores; ++c) {
    switch (p.roles[c]) {
      case CoreRole::Idle:
        if (stacks[c] || apps[c]) fail("idle core hosts coroutines");
        break;
      case CoreRole::StackOnly:
        if (stacks[c] != 1 || apps[c]) fail("StackOnly core must host exactly one stack");
        break;
      case CoreRole::AppOnly:
        if (stacks[c] || apps[c] < 1) fail("AppOnly core must host apps only");
        break;
      case CoreRole::Shared:
        if (stacks[c] != 1 || apps[c] < 1) fail("Shared core needs one stack and at least one app");
        break;
    }
  }
}

Policy Policy::defaults() {
  Policy p;
  p.rows = {PolicyRow{12, 1, 1}, PolicyRow{50, 2, 4}, PolicyRow{1e9, 3, 6}};
  return p;
}

std::size_t Policy::row_for(double load_pct) const {
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (load_pct <= rows[i].load_pct_max) return i;
  return rows.empty() ? 0 : rows.size() - 1;
}

std::size_t Policy::row_of(std::uint32_t K, std::uint32_t M) const {
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].K == K && rows[i].M == M) return i;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].K + rows[i].M >= K + M) return i;
  return rows.empty() ? 0 : rows.size() - 1;
}

bool MigrationReport::empty() const {
  return suspended_apps.empty() && woken_apps.empty() && moved_apps.empty() && suspended_stacks.empty() &&
         woken_stacks.empty() && moved_stacks.empty() && remapped_groups.empty();
}

MigrationReport diff_plans(const ResourcePlan& from, const ResourcePlan& to) {
  MigrationReport r;
  for (std::uint32_t a = 0; a < std::max(from.M, to.M); ++a) {
    bool was = a < from.M, is = a < to.M;
    if (was && !is) r.suspended_apps.push_back(a);
    else if (!was && is) r.woken_apps.push_back(a);
    else if (was && is && from.app_core[a] != to.app_core[a]) r.moved_apps.push_back(a);
  }
  for (std::uint32_t s = 0; s < std::max(from.K, to.K); ++s) {
    bool was = s < from.K, is = s < to.K;
    if (was && !is) r.suspended_stacks.push_back(s);
    else if (!was && is) r.woken_stacks.push_back(s);
    else if (was && is && from.stack_core[s] != to.stack_core[s]) r.moved_stacks.push_back(s);
  }
  for (std::uint32_t g = 0; g < to.group_to_stack.size(); ++g)
    if (g >= from.group_to_stack.size() || from.group_to_stack[g] != to.group_to_stack[g]) r.remapped_groups.push_back(g);
  return r;
}

LoadSummary ResourceManager::collect(const PeriodSample& s) const {
  LoadSummary out;
  const Nanos len = std::max<Nanos>(s.end - s.start, 1);
  const double rps = static_cast<double>(s.requests_offered) * 1e9 / static_cast<double>(len);
  out.load_pct = 100.0 * rps / policy_.reference_rps;
  const std::size_t n = s.core_app_busy.size();
  out.overloaded.resize(n);
  out.idle_eligible.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double ratio = static_cast<double>(s.core_app_busy[c]) / static_cast<double>(len);
    out.overloaded[c] = ratio >= policy_.overload_busy_ratio;
    const std::uint64_t backlog = c < s.core_backlog.size() ? s.core_backlog[c] : 0;
    out.idle_eligible[c] = s.core_app_busy[c] == 0 && backlog == 0;
  }
  return out;
}

ResourcePlan ResourceManager::decide(const LoadSummary& summary, const ResourcePlan& current) {
  overload_streak_.resize(summary.overloaded.size(), 0);
  for (std::size_t c = 0; c < summary.overloaded.size(); ++c)
    overload_streak_[c] = summary.overloaded[c] ? overload_streak_[c] + 1 : 0;

  if (!policy_.rows.empty()) {
    const std::size_t target = policy_.row_for(summary.load_pct);
    const std::size_t cur = policy_.row_of(current.K, current.M);
    const auto step = static_cast<std::ptrdiff_t>(std::max<std::uint32_t>(policy_.max_rows_per_period, 1));
    auto next = static_cast<std::ptrdiff_t>(cur);
    const auto tgt = static_cast<std::ptrdiff_t>(target);
    if (tgt > next) next = std::min(tgt, next + step);
    else if (tgt < next) next = std::max(tgt, next - step);
    const auto& row = policy_.rows[static_cast<std::size_t>(next)];
    if (row.K != current.K || row.M != current.M) {
      std::fill(overload_streak_.begin(), overload_streak_.end(), 0);
      return build_plan(row.K, row.M, num_cores_, num_groups_);
    }
  }

  // Same row: shed one app coroutine from a persistently overloaded core.
  for (CoreId c = 0; c < overload_streak_.size(); ++c) {
    if (overload_streak_[c] < policy_.overload_periods) continue;
    std::vector<std::uint32_t> apps_here;
    for (std::uint32_t a = 0; a < current.M; ++a)
      if (current.app_core[a] == c) apps_here.push_back(a);
    if (apps_here.empty()) continue;
    const bool shared = current.roles[c] == CoreRole::Shared;
    if (apps_here.size() < 2 && !shared) continue;

    // Destination: an idle core first, else the AppOnly core with fewest apps.
    std::optional<CoreId> dest;
    for (CoreId d = 0; d < current.roles.size() && !dest; ++d)
      if (current.roles[d] == CoreRole::Idle) dest = d;
    if (!dest) {
      std::size_t best = SIZE_MAX;
      for (CoreId d = 0; d < current.roles.size(); ++d) {
        if (d == c || current.roles[d] != CoreRole::AppOnly || summary.overloaded[d]) continue;
        auto cnt = static_cast<std::size_t>(std::count(current.app_core.begin(), current.app_core.end(), d));
        if (cnt < best) best = cnt, dest = d;
      }
    }
    if (!dest) continue;

    ResourcePlan next = current;
    next.app_core[apps_here.back()] = *dest;
    assign_roles(next, static_cast<std::uint32_t>(current.roles.size()));
    overload_streak_[c] = 0;
    return next;
  }
  return current;
}

}  // namespace qstack
