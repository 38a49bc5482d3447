#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "qstack/types.hpp"

namespace qstack {

enum class CoreRole { Idle, AppOnly, StackOnly, Shared };
enum class TaskKind { Stack, App };
enum class TaskState { Runnable, Running, Suspended };

std::string_view to_string(CoreRole r);

struct Task {
  TaskId id = 0;
  TaskKind kind = TaskKind::App;
  CoreId core = 0;
  TaskState state = TaskState::Runnable;
  Nanos run_start = 0;
  Priority priority_binding = Priority::Unset;  // Unset means Any
};

/// A slice of virtual CPU work with an explicit checkpoint cadence.
struct WorkSegment {
  Nanos duration = 0;
  Nanos checkpoint_interval = 1;
};

/// Per-core cycle accounting. busy excludes idle polling, total includes it.
struct CoreAccount {
  Nanos app_ns = 0;
  Nanos stack_ns = 0;
  Nanos fcd_ns = 0;
  Nanos spin_ns = 0;

  Nanos busy_ns() const { return app_ns + stack_ns + fcd_ns; }
  Nanos total_ns() const { return busy_ns() + spin_ns; }
};

/// Hooks the engine supplies to dispatch.
struct DispatchHints {
  std::function<bool(TaskId)> has_work;          // default: every non-suspended task
  std::function<bool(TaskId)> has_high_pending;  // only consulted when prefer_high
  bool prefer_high = false;
  bool stack_deadline_expired = false;
};

class Core {
 public:
  explicit Core(CoreId id = 0) : id_(id) {}

  CoreId id() const { return id_; }
  CoreRole role() const { return role_; }
  void set_role(CoreRole r) { role_ = r; }

  const std::vector<TaskId>& run_queue() const { return run_queue_; }
  void attach(TaskId t);
  void detach(TaskId t);
  bool hosts(TaskId t) const;

  /// Round-robin selection among eligible tasks. Expired NIC-check
  /// deadlines put the stack task first; with prefer_high a task holding a
  /// pending High event wins over plain round-robin. Marks the selection
  /// Running with run_start = now.
  std::optional<TaskId> dispatch(std::vector<Task>& tasks, Nanos now, const DispatchHints& hints = {});

  CoreAccount& account() { return account_; }
  const CoreAccount& account() const { return account_; }

 private:
  CoreId id_;
  CoreRole role_ = CoreRole::Idle;
  std::vector<TaskId> run_queue_;
  std::size_t cursor_ = 0;  // index after the last dispatched entry
  CoreAccount account_;
};

/// Steps a WorkSegment one checkpoint interval at a time.
class SegmentRunner {
 public:
  SegmentRunner() = default;
  explicit SegmentRunner(WorkSegment seg) : seg_(seg), remaining_(seg.duration) {}

  bool done() const { return remaining_ == 0; }
  Nanos remaining() const { return remaining_; }
  const WorkSegment& segment() const { return seg_; }

  /// Length of the next chunk; the checkpoint follows it.
  Nanos next_chunk() const { return std::min(remaining_, seg_.checkpoint_interval); }
  void consume(Nanos chunk) { remaining_ -= chunk; }

 private:
  WorkSegment seg_{};
  Nanos remaining_ = 0;
};

/// Runs a whole segment against `now`, invoking `checkpoint` at every
/// interval boundary (including the final one). The callback returns extra
/// nanoseconds it charged. Returns the number of checkpoints invoked.
std::size_t run_segment(Nanos& now, const WorkSegment& seg, const std::function<Nanos(Nanos)>& checkpoint);

}  // namespace qstack
