#include "qstack/simulation.hpp"

#include <algorithm>
#include <unordered_map>

namespace qstack {

std::string_view to_string(ExtractionMode m) {
  switch (m) {
    case ExtractionMode::None: return "none";
    case ExtractionMode::Driver: return "driver";
    case ExtractionMode::Tcp: return "tcp";
    case ExtractionMode::Both: return "both";
  }
  return "none";
}

ExtractionMode extraction_from_string(std::string_view s) {
  if (s == "none") return ExtractionMode::None;
  if (s == "driver") return ExtractionMode::Driver;
  if (s == "tcp") return ExtractionMode::Tcp;
  if (s == "both") return ExtractionMode::Both;
  throw Error(ErrorCode::InvalidConfig, "unknown extraction mode: " + std::string(s));
}

void SimConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (cores == 0) fail("cores must be >= 1");
  if (queues == 0 || queues > RssMap::kMaxQueues) fail("queues must be in [1, 16]");
  if (queue_capacity == 0 || nic_batch == 0) fail("queue capacity and NIC batch must be >= 1");
  if (checkpoint_interval <= 0) fail("checkpoint_interval must be > 0");
  if (thresholds.nic_check_interval <= 0 || thresholds.tcp_process_interval <= 0 || thresholds.coroutine_budget <= 0)
    fail("fastcalldown intervals must be > 0");
  if (period <= 0) fail("period must be > 0");
  if (K == 0 || M == 0) fail("K and M must be >= 1");
  if (tcp.max_batch == 0 || tcp.mss == 0) fail("tcp batch and mss must be >= 1");
  if (features.diffluence && (diffluence_high_app >= M || diffluence_low_app >= M))
    fail("diffluence targets must be live app coroutines");
  if (placement) {
    if (placement->stack_core.size() != K || placement->app_core.size() != M) fail("placement size must match K and M");
    for (CoreId c : placement->stack_core)
      if (c >= cores) fail("placement references an unknown core");
    for (CoreId c : placement->app_core)
      if (c >= cores) fail("placement references an unknown core");
  }
  if (dynamic && policy.rows.empty()) fail("dynamic mode needs a policy table");
  workload.validate();
}

namespace {

std::uint64_t request_key(FlowId flow, std::uint64_t seq) { return (static_cast<std::uint64_t>(flow) << 44) ^ seq; }

ResourcePlan plan_from_placement(const Placement& pl, std::uint32_t cores, std::uint32_t groups) {
  ResourcePlan p;
  p.K = static_cast<std::uint32_t>(pl.stack_core.size());
  p.M = static_cast<std::uint32_t>(pl.app_core.size());
  p.stack_core = pl.stack_core;
  p.app_core = pl.app_core;
  p.group_to_stack.resize(groups);
  for (std::uint32_t g = 0; g < groups; ++g) p.group_to_stack[g] = g % p.K;
  std::vector<int> stacks(cores, 0), apps(cores, 0);
  for (CoreId c : p.stack_core) ++stacks[c];
  for (CoreId c : p.app_core) ++apps[c];
  p.roles.assign(cores, CoreRole::Idle);
  for (CoreId c = 0; c < cores; ++c) {
    if (stacks[c] && apps[c]) p.roles[c] = CoreRole::Shared;
    else if (stacks[c]) p.roles[c] = CoreRole::StackOnly;
    else if (apps[c]) p.roles[c] = CoreRole::AppOnly;
  }
  return p;
}

std::string roles_string(const ResourcePlan& p) {
  std::string out;
  for (std::size_t c = 0; c < p.roles.size(); ++c) {
    if (c) out += '|';
    switch (p.roles[c]) {
      case CoreRole::Idle: out += '-'; break;
      case CoreRole::AppOnly: out += 'A'; break;
      case CoreRole::StackOnly: out += 'S'; break;
      case CoreRole::Shared: out += "AS"; break;
    }
  }
  return out;
}

}  // namespace

struct Simulation::Impl {
  struct Job {
    MessageDescriptor msg;
    RequestId request = 0;
    SegmentRunner runner;
  };

  struct AppRt {
    IotServerApp app;
    ConsumerId consumer = 0;
    std::optional<Job> job;
    std::optional<CoreId> core;
    std::optional<CoreId> move_to;
    bool draining = false;
  };

  struct CoreRt {
    Core core;
    Nanos now = 0;
    bool sleeping = true;
    Nanos wake_at = kNever;
    FcdState fcd;
    std::optional<TaskId> running;
    bool yield = false;
    CoreStats stats;
    CoreAccount period_base;
  };

  SimConfig cfg;
  ArrivalSchedule sched;
  RssMap rss;
  std::vector<std::vector<Packet>> arrivals;  // per queue, by arrival time
  std::vector<std::size_t> arrival_cursor;
  std::vector<NicQueue> queues;
  std::vector<Driver> drivers;
  std::shared_ptr<DriverExtraction> dx = std::make_shared<DriverExtraction>();
  TcpLayer tcp;
  EventHub hub;
  ResourceManager rm;
  ResourcePlan plan;

  std::uint32_t stack_pool = 1;
  std::uint32_t app_pool = 1;
  std::vector<Task> tasks;
  std::vector<std::optional<CoreId>> stack_loc;
  std::vector<std::vector<QueueId>> owned;  // per stack
  std::vector<AppRt> apps;
  std::vector<CoreRt> cores;

  std::unordered_map<std::uint64_t, RequestId> request_index;
  std::vector<RequestRecord> records;
  std::vector<Nanos> request_starts;  // sorted t_enter, for offered-load counting

  SimReport report;
  LatencyHistogram period_high, period_low, period_all;
  std::vector<std::uint64_t> period_drop_base;

  Nanos end_time = 0;
  Nanos next_boundary = 0;

  std::optional<CoreId> ctx_core;
  TaskId ctx_task = 0;

  explicit Impl(SimConfig c)
      : cfg(std::move(c)), rss(cfg.queues), tcp(cfg.tcp), rm(cfg.policy, cfg.cores, cfg.queues) {}

  TaskId app_task(std::uint32_t a) const { return stack_pool + a; }
  bool is_stack(TaskId t) const { return t < stack_pool; }

  // ---- setup ----

  void build() {
    cfg.validate();
    sched = generate(cfg.workload);

    tcp.config().priority_receive = cfg.features.ooo_prio;
    hub.set_priority_classes(cfg.features.event_prio);
    dx->cost_ns = cfg.driver_extraction_ns;
    if (cfg.extraction == ExtractionMode::Driver || cfg.extraction == ExtractionMode::Both)
      dx->set(header_keyword_matcher());

    for (QueueId q = 0; q < cfg.queues; ++q) {
      queues.emplace_back(q, cfg.queue_capacity);
      drivers.emplace_back(dx, cfg.driver_buffer_capacity);
      drivers.back().rx().set_classed(cfg.features.driver_prio);
      drivers.back().tx().set_classed(cfg.features.driver_prio);
    }
    arrivals.resize(cfg.queues);
    arrival_cursor.assign(cfg.queues, 0);
    for (const Packet& p : sched.packets) arrivals[rss.queue_of(p.flow)].push_back(p);

    for (FlowId f = 0; f < cfg.workload.num_connections; ++f) {
      tcp.establish(f);
      if (cfg.extraction == ExtractionMode::Tcp || cfg.extraction == ExtractionMode::Both)
        tcp.register_extraction(f, stateful_header_extractor());
    }

    records.resize(sched.requests.size());
    for (const RequestInfo& r : sched.requests) {
      RequestRecord& rec = records[r.id];
      rec.id = r.id;
      rec.flow = r.flow;
      rec.class_index = r.class_index;
      rec.priority = r.priority;
      rec.t_enter = r.t_first;
      request_index[request_key(r.flow, r.seq_start)] = r.id;
      request_starts.push_back(r.t_first);
    }
    std::sort(request_starts.begin(), request_starts.end());

    stack_pool = cfg.K;
    app_pool = cfg.M;
    if (cfg.dynamic)
      for (const auto& row : cfg.policy.rows) {
        stack_pool = std::max(stack_pool, row.K);
        app_pool = std::max(app_pool, row.M);
      }

    for (std::uint32_t s = 0; s < stack_pool; ++s)
      tasks.push_back(Task{s, TaskKind::Stack, 0, TaskState::Suspended, 0, Priority::Unset});
    stack_loc.assign(stack_pool, std::nullopt);
    owned.assign(stack_pool, {});

    IotServerConfig acfg;
    acfg.use_priority_recv = cfg.features.ooo_prio;
    acfg.response_bytes = cfg.workload.response_bytes;
    acfg.checkpoint_interval = cfg.checkpoint_interval;
    acfg.explicit_checkpoints = cfg.fastcalldown;
    for (std::uint32_t a = 0; a < app_pool; ++a) {
      tasks.push_back(Task{app_task(a), TaskKind::App, 0, TaskState::Suspended, 0, Priority::Unset});
      AppRt rt{IotServerApp(acfg), hub.add_consumer(), std::nullopt, std::nullopt, std::nullopt, false};
      apps.push_back(std::move(rt));
    }
    if (cfg.features.diffluence) {
      tasks[app_task(cfg.diffluence_high_app)].priority_binding = Priority::High;
      tasks[app_task(cfg.diffluence_low_app)].priority_binding = Priority::Low;
      for (FlowId f = 0; f < cfg.workload.num_connections; ++f) {
        hub.q_epoll_ctrl(f, apps[cfg.diffluence_high_app].consumer, Priority::High);
        hub.q_epoll_ctrl(f, apps[cfg.diffluence_low_app].consumer, Priority::Low);
      }
    }
    hub.set_default_route([this](FlowId f) -> std::optional<ConsumerId> { return apps[f % plan.M].consumer; });
    hub.set_implicit_check([this](ConsumerId) { implicit_check(); });
    tcp.set_implicit_check([this](FlowId) { implicit_check(); });

    for (CoreId c = 0; c < cfg.cores; ++c) {
      cores.emplace_back();
      cores.back().core = Core(c);
    }

    ResourcePlan initial = cfg.placement ? plan_from_placement(*cfg.placement, cfg.cores, cfg.queues)
                                         : build_plan(cfg.K, cfg.M, cfg.cores, cfg.queues);
    validate_plan(initial, stack_pool, app_pool, cfg.cores);
    plan.K = 0;
    plan.M = 0;
    apply_plan(initial, 0);
    report.plan_changes.push_back(PlanChange{0, plan});

    end_time = cfg.workload.duration + cfg.grace;
    next_boundary = cfg.period;
    period_drop_base.assign(cfg.queues, 0);
  }

  // ---- plan application ----

  void attach_stack(std::uint32_t s, CoreId c) {
    if (stack_loc[s] == c) return;
    if (stack_loc[s]) detach_task(*stack_loc[s], s);
    cores[c].core.attach(s);
    tasks[s].core = c;
    tasks[s].state = TaskState::Runnable;
    stack_loc[s] = c;
  }

  void detach_task(CoreId c, TaskId t) {
    CoreRt& cr = cores[c];
    if (cr.running == t) cr.running.reset();
    cr.core.detach(t);
  }

  void move_app(std::uint32_t a, CoreId to, Nanos at) {
    AppRt& ar = apps[a];
    if (ar.core) detach_task(*ar.core, app_task(a));
    cores[to].core.attach(app_task(a));
    tasks[app_task(a)].core = to;
    tasks[app_task(a)].state = TaskState::Runnable;
    ar.core = to;
    ar.move_to.reset();
    wake(to, at);
  }

  void apply_plan(const ResourcePlan& next, Nanos at) {
    for (std::uint32_t s = 0; s < stack_pool; ++s) owned[s].clear();
    for (QueueId g = 0; g < next.group_to_stack.size(); ++g) owned[next.group_to_stack[g]].push_back(g);

    for (std::uint32_t s = 0; s < stack_pool; ++s) {
      if (s < next.K) {
        attach_stack(s, next.stack_core[s]);
      } else if (stack_loc[s]) {
        detach_task(*stack_loc[s], s);
        tasks[s].state = TaskState::Suspended;
        stack_loc[s].reset();
      }
    }
    for (std::uint32_t a = 0; a < app_pool; ++a) {
      AppRt& ar = apps[a];
      if (a < next.M) {
        ar.draining = false;
        const CoreId target = next.app_core[a];
        if (!ar.core) move_app(a, target, at);
        else if (*ar.core != target) ar.move_to = target;
        else ar.move_to.reset();
      } else if (ar.core) {
        ar.draining = true;
        ar.move_to.reset();
      }
    }
    plan = next;
    for (CoreId c = 0; c < cfg.cores; ++c) {
      cores[c].core.set_role(plan.roles[c]);
      wake(c, at);
    }
    for (std::uint32_t a = 0; a < app_pool; ++a) settle(a, at);
  }

  /// Deferred app transitions: only between requests.
  void settle(std::uint32_t a, Nanos at) {
    AppRt& ar = apps[a];
    if (!ar.core || ar.job) return;
    if (cores[*ar.core].running == app_task(a)) return;
    if (ar.draining && hub.channel(ar.consumer).empty()) {
      detach_task(*ar.core, app_task(a));
      tasks[app_task(a)].state = TaskState::Suspended;
      ar.core.reset();
      ar.draining = false;
    } else if (ar.move_to) {
      move_app(a, *ar.move_to, std::max(at, cores[*ar.core].now));
    }
  }

  // ---- clocks ----

  bool core_active(CoreId c) const { return !cores[c].core.run_queue().empty(); }

  Nanos effective_time(const CoreRt& cr) const { return cr.sleeping ? cr.wake_at : cr.now; }

  void wake(CoreId c, Nanos t) {
    CoreRt& cr = cores[c];
    if (!cr.sleeping) return;
    cr.wake_at = std::min(cr.wake_at, std::max(cr.now, t));
  }

  void spin_to(CoreRt& cr, CoreId c, Nanos t) {
    if (t <= cr.now) return;
    if (core_active(c)) cr.stats.account.spin_ns += t - cr.now;
    cr.now = t;
  }

  // ---- NIC ----

  void inject(QueueId q, Nanos t) {
    auto& arr = arrivals[q];
    auto& cur = arrival_cursor[q];
    while (cur < arr.size() && arr[cur].t_arrive_nic <= t) {
      queues[q].enqueue(arr[cur], arr[cur].t_arrive_nic);
      ++cur;
    }
  }

  Nanos next_arrival(QueueId q) const {
    const auto& arr = arrivals[q];
    return arrival_cursor[q] < arr.size() ? arr[arrival_cursor[q]].t_arrive_nic : kNever;
  }

  std::optional<std::uint32_t> stack_on(CoreId c) const {
    for (TaskId t : cores[c].core.run_queue())
      if (is_stack(t)) return t;
    return std::nullopt;
  }

  bool stack_has_work(std::uint32_t s, Nanos now) const {
    for (QueueId q : owned[s]) {
      if (!queues[q].empty() || next_arrival(q) <= now) return true;
      if (!drivers[q].rx().empty() || !drivers[q].tx().empty()) return true;
    }
    return false;
  }

  void charge_stack(CoreRt& cr, Nanos cost) {
    cr.now += cost;
    cr.stats.account.stack_ns += cost;
  }

  void drain_nic(CoreId c, std::uint32_t s) {
    CoreRt& cr = cores[c];
    cr.fcd.last_nic_check = cr.now;
    ++cr.stats.drains;
    for (QueueId q : owned[s]) {
      for (;;) {
        inject(q, cr.now);
        Nanos cost = 0;
        const std::size_t n = drivers[q].poll_and_classify(queues[q], cfg.nic_batch, cost);
        charge_stack(cr, cost);
        if (n < cfg.nic_batch) break;
      }
    }
  }

  void tcp_batch(CoreId c, std::uint32_t s) {
    CoreRt& cr = cores[c];
    cr.fcd.last_tcp_process = cr.now;
    ++cr.stats.tcp_batches;
    charge_stack(cr, cfg.tcp.timer_check_ns);

    std::vector<Packet> batch;
    const std::size_t max = cfg.tcp.max_batch;
    for (QueueId q : owned[s])
      while (batch.size() < max && drivers[q].rx().high_size() > 0) batch.push_back(*drivers[q].rx().pop());
    for (QueueId q : owned[s])
      while (batch.size() < max && !drivers[q].rx().empty()) batch.push_back(*drivers[q].rx().pop());

    if (!batch.empty()) {
      BatchResult res = tcp.process_batch(batch, s, cr.now);
      charge_stack(cr, res.cost);
      note_labels(batch, res.processed);
      for (std::size_t i = 0; i < res.events.size(); ++i) {
        Event e = res.events[i];
        e.t_emit = cr.now;
        const Packet& p = batch[res.sources[i]];
        if (p.request < records.size()) records[p.request].t_event = std::min(records[p.request].t_event, e.t_emit);
        if (auto consumer = hub.emit(e)) {
          const AppRt& ar = apps[*consumer];
          if (ar.core) wake(*ar.core, e.t_emit);
        }
      }
    }
    flush_tx(c, s);
  }

  void note_labels(const std::vector<Packet>& batch, std::size_t n) {
    LabelStats& ls = report.labels;
    for (std::size_t i = 0; i < std::min(n, batch.size()); ++i) {
      const Packet& p = batch[i];
      if (p.request >= records.size() || p.seq_len == 0) continue;
      const bool high = effective(p.priority) == Priority::High;
      if (records[p.request].priority == Priority::High) {
        ++ls.high_request_packets;
        if (p.has_header) ++ls.high_requests_seen;
        if (high) {
          ++ls.high_request_packets_high;
          ++(p.has_header ? ls.high_request_first_high : ls.high_request_rest_high);
        }
      } else if (high) {
        ++ls.low_request_packets_high;
      }
    }
  }

  void flush_tx(CoreId c, std::uint32_t s) {
    CoreRt& cr = cores[c];
    for (QueueId q : owned[s]) {
      while (auto p = drivers[q].tx_pop()) {
        charge_stack(cr, cfg.tcp.per_packet_ns);
        if (p->request >= records.size()) continue;
        RequestRecord& rec = records[p->request];
        if (rec.done || rec.response_left == 0) continue;
        if (--rec.response_left == 0) complete(rec, cr.now);
      }
    }
  }

  void complete(RequestRecord& rec, Nanos t) {
    rec.done = true;
    rec.t_leave = t;
    const Nanos lat = t - rec.t_enter;
    ++report.completed;
    report.by_class.record(cfg.workload.classes[rec.class_index].name, lat);
    report.all.record(lat);
    period_all.record(lat);
    if (rec.priority == Priority::High) {
      report.high.record(lat);
      period_high.record(lat);
    } else {
      report.low.record(lat);
      period_low.record(lat);
    }
  }

  // ---- fastcalldown ----

  bool high_pending_elsewhere(CoreId c, TaskId self, Nanos now) const {
    for (TaskId t : cores[c].core.run_queue()) {
      if (t == self || is_stack(t)) continue;
      if (hub.channel(apps[t - stack_pool].consumer).has_ready_high(now)) return true;
    }
    return false;
  }

  void checkpoint(CoreId c, TaskId t, bool is_explicit) {
    CoreRt& cr = cores[c];
    const Nanos cost = cfg.thresholds.check_cost;
    cr.now += cost;
    cr.stats.account.fcd_ns += cost;
    if (is_explicit) {
      ++cr.stats.explicit_checks;
      cr.stats.explicit_check_ns += cost;
    } else {
      ++cr.stats.implicit_checks;
    }

    const auto stack = stack_on(c);
    CheckContext ctx;
    ctx.now = cr.now;
    ctx.run_start = tasks[t].run_start;
    ctx.hosts_stack = stack.has_value();
    if (!is_stack(t)) {
      const AppRt& ar = apps[t - stack_pool];
      ctx.running_serves_low = ar.job && effective(ar.job->msg.label) != Priority::High;
      ctx.high_pending_elsewhere = cfg.thresholds.priority_check && high_pending_elsewhere(c, t, cr.now);
    }
    const ActionSet acts = fastcalldown_check(cfg.thresholds, cr.fcd, ctx);
    if (acts.has(FcdAction::DrainNic)) drain_nic(c, *stack);
    if (acts.has(FcdAction::TcpBatch)) tcp_batch(c, *stack);
    if (acts.has(FcdAction::Reschedule)) {
      ++cr.stats.budget_yields;
      cr.yield = true;
    }
    if (acts.has(FcdAction::PriorityYield)) {
      ++cr.stats.priority_yields;
      cr.yield = true;
    }
  }

  void implicit_check() {
    if (ctx_core) checkpoint(*ctx_core, ctx_task, false);
  }

  // ---- dispatch ----

  bool task_has_work(TaskId t, Nanos now) const {
    if (is_stack(t)) return stack_has_work(t, now);
    const AppRt& ar = apps[t - stack_pool];
    return ar.job.has_value() || hub.channel(ar.consumer).has_ready(now);
  }

  std::optional<TaskId> dispatch(CoreId c) {
    CoreRt& cr = cores[c];
    const Nanos now = cr.now;
    DispatchHints hints;
    hints.has_work = [&](TaskId t) { return task_has_work(t, now); };
    hints.prefer_high = cfg.features.priority_yield;
    hints.has_high_pending = [&](TaskId t) {
      return !is_stack(t) && hub.channel(apps[t - stack_pool].consumer).has_ready_high(now);
    };
    if (auto s = stack_on(c))
      hints.stack_deadline_expired =
          now - cr.fcd.last_nic_check >= cfg.thresholds.nic_check_interval && stack_has_work(*s, now);
    auto t = cr.core.dispatch(tasks, now, hints);
    if (t) cr.running = t;
    return t;
  }

  void release(CoreId c) {
    CoreRt& cr = cores[c];
    if (cr.running) {
      cr.stats.max_run_ns = std::max(cr.stats.max_run_ns, cr.now - tasks[*cr.running].run_start);
      if (tasks[*cr.running].state == TaskState::Running) tasks[*cr.running].state = TaskState::Runnable;
    }
    cr.running.reset();
  }

  void sleep(CoreId c) {
    CoreRt& cr = cores[c];
    Nanos wake_at = kNever;
    for (TaskId t : cr.core.run_queue()) {
      if (is_stack(t)) {
        for (QueueId q : owned[t]) wake_at = std::min(wake_at, next_arrival(q));
      } else {
        wake_at = std::min(wake_at, hub.channel(apps[t - stack_pool].consumer).next_emit_time());
      }
    }
    cr.sleeping = true;
    cr.wake_at = std::max(wake_at, cr.now + 1);
  }

  // ---- task bodies ----

  void stack_step(CoreId c, std::uint32_t s) {
    drain_nic(c, s);
    tcp_batch(c, s);
    release(c);
  }

  void start_job(CoreId c, std::uint32_t a, const MessageDescriptor& m) {
    AppRt& ar = apps[a];
    auto it = request_index.find(request_key(m.flow, m.seq_start));
    const RequestId id = it != request_index.end() ? it->second : static_cast<RequestId>(records.size());
    if (id < records.size()) records[id].t_service_start = cores[c].now;
    ar.job = Job{m, id, SegmentRunner(ar.app.segment_for(m))};
  }

  void finish_job(CoreId c, std::uint32_t a) {
    AppRt& ar = apps[a];
    Job job = std::move(*ar.job);
    ar.job.reset();
    CoreRt& cr = cores[c];
    const bool known = job.request < records.size();
    if (known) records[job.request].t_service_end = cr.now;
    const QueueId q = rss.queue_of(job.msg.flow);
    const std::size_t n = ar.app.respond(job.msg, job.msg.label, tcp, drivers[q], job.request);
    if (known) records[job.request].response_left = static_cast<std::uint32_t>(n);
    const auto owner = plan.group_to_stack[rss.group_of(job.msg.flow)];
    if (stack_loc[owner]) wake(*stack_loc[owner], cr.now);
  }

  void app_step(CoreId c, TaskId t) {
    const std::uint32_t a = t - stack_pool;
    CoreRt& cr = cores[c];
    AppRt& ar = apps[a];
    cr.yield = false;
    ctx_core = c;
    ctx_task = t;
    bool idle = false;

    if (ar.job) {
      const Nanos chunk = ar.job->runner.next_chunk();
      cr.now += chunk;
      cr.stats.account.app_ns += chunk;
      ar.job->runner.consume(chunk);
      if (cfg.fastcalldown) checkpoint(c, t, true);
      if (ar.job->runner.done()) finish_job(c, a);
    } else if (auto e = hub.q_get_event(ar.consumer, cr.now)) {
      if (auto m = ar.app.on_event(*e, tcp)) {
        start_job(c, a, *m);
        if (ar.job->runner.done()) finish_job(c, a);
      }
    } else {
      idle = true;
    }

    ctx_core.reset();
    if (idle || cr.yield) {
      release(c);
      settle(a, cr.now);
    } else if (!ar.job && (ar.move_to || ar.draining)) {
      release(c);
      settle(a, cr.now);
    }
  }

  void step(CoreId c) {
    CoreRt& cr = cores[c];
    if (cr.sleeping) {
      spin_to(cr, c, cr.wake_at);
      cr.sleeping = false;
      cr.wake_at = kNever;
    }
    if (!cr.running && !dispatch(c)) {
      sleep(c);
      return;
    }
    const TaskId t = *cr.running;
    if (is_stack(t)) stack_step(c, t);
    else app_step(c, t);
  }

  // ---- periods ----

  std::uint64_t offered_between(Nanos from, Nanos to) const {
    auto lo = std::lower_bound(request_starts.begin(), request_starts.end(), from);
    auto hi = std::lower_bound(request_starts.begin(), request_starts.end(), to);
    return static_cast<std::uint64_t>(hi - lo);
  }

  void on_boundary(Nanos b) {
    for (QueueId q = 0; q < cfg.queues; ++q) inject(q, b);
    for (CoreId c = 0; c < cfg.cores; ++c)
      if (cores[c].sleeping) spin_to(cores[c], c, std::min(b, cores[c].wake_at));

    PeriodSample sample;
    sample.start = b - cfg.period;
    sample.end = b;
    sample.requests_offered = offered_between(sample.start, b);
    Nanos app_delta = 0, total_delta = 0;
    for (CoreId c = 0; c < cfg.cores; ++c) {
      const CoreAccount& now = cores[c].stats.account;
      const CoreAccount& base = cores[c].period_base;
      sample.core_app_busy.push_back(now.app_ns - base.app_ns);
      app_delta += now.app_ns - base.app_ns;
      total_delta += now.total_ns() - base.total_ns();
      std::uint64_t backlog = 0;
      for (TaskId t : cores[c].core.run_queue()) {
        if (is_stack(t)) {
          for (QueueId q : owned[t]) backlog += drivers[q].rx().size() + queues[q].size();
        } else {
          backlog += hub.channel(apps[t - stack_pool].consumer).size();
        }
      }
      sample.core_backlog.push_back(backlog);
      cores[c].period_base = now;
    }
    const LoadSummary summary = rm.collect(sample);

    if (cfg.dynamic) {
      ResourcePlan next = rm.decide(summary, plan);
      if (!(next == plan)) {
        validate_plan(next, stack_pool, app_pool, cfg.cores);
        apply_plan(next, b);
        report.plan_changes.push_back(PlanChange{b, plan});
      }
    }

    TimelineRow row;
    row.period_end = b;
    row.load_pct = summary.load_pct;
    row.K = plan.K;
    row.M = plan.M;
    row.roles = roles_string(plan);
    if (period_high.count()) row.p99_high = period_high.p99();
    if (period_low.count()) row.p99_low = period_low.p99();
    if (period_all.count()) row.p99_all = period_all.p99();
    for (QueueId q = 0; q < cfg.queues; ++q) {
      row.drops += queues[q].drops() - period_drop_base[q];
      period_drop_base[q] = queues[q].drops();
    }
    row.eta = total_delta > 0 ? static_cast<double>(app_delta) / static_cast<double>(total_delta) : 0.0;
    report.timeline.push_back(std::move(row));
    period_high = {};
    period_low = {};
    period_all = {};
  }

  // ---- main loop ----

  SimReport run() {
    build();
    for (;;) {
      std::optional<CoreId> pick;
      Nanos m = kNever;
      for (CoreId c = 0; c < cfg.cores; ++c) {
        const Nanos e = effective_time(cores[c]);
        if (e < m) {
          m = e;
          pick = c;
        }
      }
      if (next_boundary <= std::min(m, end_time)) {
        on_boundary(next_boundary);
        next_boundary += cfg.period;
        continue;
      }
      if (!pick || m >= end_time) break;
      step(*pick);
    }
    return finish();
  }

  SimReport finish() {
    for (QueueId q = 0; q < cfg.queues; ++q) inject(q, end_time);
    report.end_time = end_time;
    report.offered = sched.requests.size();
    for (CoreId c = 0; c < cfg.cores; ++c) {
      CoreRt& cr = cores[c];
      spin_to(cr, c, end_time);
      cr.stats.role = cr.core.role();
      report.cores.push_back(cr.stats);
    }
    Nanos app = 0, total = 0;
    for (const auto& cs : report.cores) {
      app += cs.account.app_ns;
      total += cs.account.total_ns();
    }
    report.eta = total > 0 ? static_cast<double>(app) / static_cast<double>(total) : 0.0;
    for (QueueId q = 0; q < cfg.queues; ++q) {
      const NicQueue& nq = queues[q];
      report.queues.push_back(QueueStats{nq.enqueued(), nq.dequeued(), nq.drops(), nq.first_drop_at()});
      report.drops += nq.drops();
      report.first_drop_at = std::min(report.first_drop_at, nq.first_drop_at());
      report.driver_drops += drivers[q].rx().drops() + drivers[q].tx().drops();
    }
    report.events_emitted = hub.emitted();
    report.events_delivered = hub.delivered();
    report.events_orphaned = hub.orphaned();
    report.events_pending = hub.pending();
    report.binding_conflicts = hub.binding_conflicts();
    report.tcp_ignored = tcp.ignored();
    report.requests = std::move(records);
    return std::move(report);
  }
};

Simulation::Simulation(SimConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Simulation::~Simulation() = default;

SimReport Simulation::run() { return impl_->run(); }

}  // namespace qstack
