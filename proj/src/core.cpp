#include "qstack/core.hpp"

#include <algorithm>

namespace qstack {

std::string_view to_string(CoreRole r) {
  switch (r) {
    case CoreRole::Idle: return "Idle";
    case CoreRole::AppOnly: return "AppOnly";
    case CoreRole::StackOnly: return "StackOnly";
    case CoreRole::Shared: return "Shared";
  }
  return "Idle";
}

void Core::attach(TaskId t) {
  if (!hosts(t)) run_queue_.push_back(t);
}

void Core::detach(TaskId t) {
  auto it = std::find(run_queue_.begin(), run_queue_.end(), t);
  if (it == run_queue_.end()) return;
  auto idx = static_cast<std::size_t>(it - run_queue_.begin());
  run_queue_.erase(it);
  if (idx < cursor_) --cursor_;
  if (cursor_ > run_queue_.size()) cursor_ = 0;
}

bool Core::hosts(TaskId t) const { return std::find(run_queue_.begin(), run_queue_.end(), t) != run_queue_.end(); }

std::optional<TaskId> Core::dispatch(std::vector<Task>& tasks, Nanos now, const DispatchHints& hints) {
  const std::size_t n = run_queue_.size();
  if (n == 0) return std::nullopt;

  auto eligible = [&](TaskId id) {
    if (tasks[id].state == TaskState::Suspended) return false;
    return hints.has_work ? hints.has_work(id) : true;
  };
  auto select = [&](std::size_t idx) {
    TaskId id = run_queue_[idx];
    for (TaskId other : run_queue_)
      if (other != id && tasks[other].state == TaskState::Running) tasks[other].state = TaskState::Runnable;
    tasks[id].state = TaskState::Running;
    tasks[id].run_start = now;
    cursor_ = (idx + 1) % n;
    return std::optional<TaskId>{id};
  };

  if (hints.prefer_high && hints.has_high_pending) {
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t idx = (cursor_ + k) % n;
      TaskId id = run_queue_[idx];
      if (tasks[id].kind == TaskKind::App && eligible(id) && hints.has_high_pending(id)) return select(idx);
    }
  }
  if (hints.stack_deadline_expired) {
    for (std::size_t idx = 0; idx < n; ++idx) {
      TaskId id = run_queue_[idx];
      if (tasks[id].kind == TaskKind::Stack && eligible(id)) return select(idx);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t idx = (cursor_ + k) % n;
    if (eligible(run_queue_[idx])) return select(idx);
  }
  return std::nullopt;
}

std::size_t run_segment(Nanos& now, const WorkSegment& seg, const std::function<Nanos(Nanos)>& checkpoint) {
  SegmentRunner runner(seg);
  std::size_t checks = 0;
  while (!runner.done()) {
    Nanos chunk = runner.next_chunk();
    now += chunk;
    runner.consume(chunk);
    now += checkpoint(now);
    ++checks;
  }
  return checks;
}

}  // namespace qstack
