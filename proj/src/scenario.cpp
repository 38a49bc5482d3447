#include "qstack/scenario.hpp"

#include <cstdio>
#include <set>
#include <sstream>

namespace qstack {

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); }

// Object reader that rejects keys nobody asked for.
class Obj {
 public:
  Obj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_ + " must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  T get(const char* key, T def) {
    if (!has(key)) return def;
    try {
      return j_.at(key).get<T>();
    } catch (const Json::exception&) {
      invalid(path_ + "." + key + ": wrong type");
    }
  }

  const Json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) invalid("unknown key " + path_ + "." + k);
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Nanos get_ns(Obj& o, const char* key, Nanos def) {
  const auto v = o.get<std::int64_t>(key, def);
  if (v < 0) invalid(o.path(key) + " must be >= 0");
  return v;
}

FcdThresholds read_thresholds(const Json& j) {
  Obj o(j, "thresholds");
  FcdThresholds t;
  t.nic_check_interval = get_ns(o, "nic_check_interval_ns", t.nic_check_interval);
  t.tcp_process_interval = get_ns(o, "tcp_process_interval_ns", t.tcp_process_interval);
  t.coroutine_budget = get_ns(o, "coroutine_budget_ns", t.coroutine_budget);
  t.check_cost = get_ns(o, "check_cost_ns", t.check_cost);
  t.priority_check = o.get<bool>("priority_check", t.priority_check);
  o.finish();
  return t;
}

PriorityFeatures read_features(const Json& j) {
  Obj o(j, "features");
  PriorityFeatures f;
  f.event_prio = o.get<bool>("event_prio", f.event_prio);
  f.ooo_prio = o.get<bool>("ooo_prio", f.ooo_prio);
  f.driver_prio = o.get<bool>("driver_prio", f.driver_prio);
  f.diffluence = o.get<bool>("diffluence", f.diffluence);
  f.priority_yield = o.get<bool>("priority_yield", f.priority_yield);
  o.finish();
  return f;
}

Policy read_policy(const Json& j) {
  Obj o(j, "policy");
  Policy p = Policy::defaults();
  if (o.has("rows")) {
    p.rows.clear();
    const Json& rows = o.at("rows");
    if (!rows.is_array()) invalid("policy.rows must be an array");
    for (const auto& r : rows) {
      Obj ro(r, "policy.rows[]");
      PolicyRow row;
      row.load_pct_max = ro.get<double>("load_pct_max", row.load_pct_max);
      row.K = ro.get<std::uint32_t>("K", row.K);
      row.M = ro.get<std::uint32_t>("M", row.M);
      ro.finish();
      if (row.K == 0 || row.M == 0) invalid("policy rows need K, M >= 1");
      p.rows.push_back(row);
    }
  }
  p.reference_rps = o.get<double>("reference_rps", p.reference_rps);
  p.max_rows_per_period = o.get<std::uint32_t>("max_rows_per_period", p.max_rows_per_period);
  p.overload_busy_ratio = o.get<double>("overload_busy_ratio", p.overload_busy_ratio);
  p.overload_periods = o.get<std::uint32_t>("overload_periods", p.overload_periods);
  o.finish();
  if (p.reference_rps <= 0) invalid("policy.reference_rps must be positive");
  return p;
}

TcpConfig read_tcp(const Json& j) {
  Obj o(j, "tcp");
  TcpConfig t;
  t.per_packet_ns = get_ns(o, "per_packet_ns", t.per_packet_ns);
  t.batch_overhead_ns = get_ns(o, "batch_overhead_ns", t.batch_overhead_ns);
  t.extraction_ns = get_ns(o, "extraction_ns", t.extraction_ns);
  t.timer_check_ns = get_ns(o, "timer_check_ns", t.timer_check_ns);
  t.max_batch = o.get<std::size_t>("max_batch", t.max_batch);
  t.mss = o.get<std::uint32_t>("mss", t.mss);
  t.receive_window = o.get<std::uint64_t>("receive_window", t.receive_window);
  o.finish();
  return t;
}

WorkloadSpec read_workload(const Json& j) {
  Obj o(j, "workload");
  WorkloadSpec w;
  w.num_connections = o.get<std::uint32_t>("num_connections", w.num_connections);
  if (o.has("classes")) {
    w.classes.clear();
    const Json& cs = o.at("classes");
    if (!cs.is_array()) invalid("workload.classes must be an array");
    for (const auto& c : cs) {
      Obj co(c, "workload.classes[]");
      RequestClass rc;
      rc.name = co.get<std::string>("name", rc.name);
      rc.fraction = co.get<double>("fraction", rc.fraction);
      rc.service_ns = get_ns(co, "service_ns", rc.service_ns);
      rc.priority = priority_from_string(co.get<std::string>("priority", "Low"));
      rc.request_bytes = co.get<std::uint32_t>("request_bytes", rc.request_bytes);
      co.finish();
      w.classes.push_back(rc);
    }
  }
  w.arrival = arrival_from_string(o.get<std::string>("arrival", std::string(to_string(w.arrival))));
  w.rate = o.get<double>("rate", w.rate);
  if (o.has("rate_steps")) {
    for (const auto& s : o.at("rate_steps")) {
      Obj so(s, "workload.rate_steps[]");
      RateStep st;
      st.at = get_ns(so, "at_ns", 0);
      st.rate = so.get<double>("rate", 0.0);
      so.finish();
      w.rate_steps.push_back(st);
    }
  }
  w.bursts_per_s = o.get<double>("bursts_per_s", w.bursts_per_s);
  w.burst_size = o.get<std::uint32_t>("burst_size", w.burst_size);
  w.compress_window = get_ns(o, "compress_window_ns", w.compress_window);
  w.duration = get_ns(o, "duration_ns", w.duration);
  w.seed = o.get<std::uint64_t>("seed", w.seed);
  w.response_bytes = o.get<std::uint32_t>("response_bytes", w.response_bytes);
  w.link_gbps = o.get<double>("link_gbps", w.link_gbps);
  w.mss = o.get<std::uint32_t>("mss", w.mss);
  if (o.has("script")) {
    for (const auto& s : o.at("script")) {
      Obj so(s, "workload.script[]");
      ScriptedRequest r;
      r.at = get_ns(so, "at_ns", 0);
      r.class_index = so.get<std::uint32_t>("class", 0);
      r.flow = so.get<FlowId>("flow", 0);
      so.finish();
      w.script.push_back(r);
    }
  }
  o.finish();
  return w;
}

Json latency_json(const LatencyHistogram& h) {
  Json j;
  j["count"] = h.count();
  if (h.count() == 0) return j;
  j["p50_ns"] = h.p50();
  j["p99_ns"] = h.p99();
  j["mean_ns"] = h.mean();
  j["max_ns"] = h.max();
  j["p99_meaningful"] = h.count() >= kMinP99Samples;
  return j;
}

std::string role_name(CoreRole r) { return std::string(to_string(r)); }

Json roles_json(const ResourcePlan& p) {
  Json a = Json::array();
  for (CoreRole r : p.roles) a.push_back(role_name(r));
  return a;
}

// ---- presets ----

Json cls(const char* name, double fraction, Nanos service, const char* prio, std::uint32_t bytes) {
  return Json{{"name", name}, {"fraction", fraction}, {"service_ns", service}, {"priority", prio}, {"request_bytes", bytes}};
}

Json base_preset(const char* name) {
  return Json{{"name", name},
              {"cores", 1},
              {"queues", 1},
              {"queue_capacity", 4096},
              {"fastcalldown", true},
              {"checkpoint_interval_ns", us(10)},
              {"thresholds",
               {{"nic_check_interval_ns", us(200)},
                {"tcp_process_interval_ns", us(50)},
                {"coroutine_budget_ns", ms(10)},
                {"check_cost_ns", 22},
                {"priority_check", false}}},
              {"extraction", "none"},
              {"features",
               {{"event_prio", true},
                {"ooo_prio", true},
                {"driver_prio", true},
                {"diffluence", false},
                {"priority_yield", false}}},
              {"plan", {{"K", 1}, {"M", 1}}},
              {"dynamic", false},
              {"period_ns", ms(10)},
              {"grace_ns", ms(50)},
              {"assertions", Json::object()}};
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"exp1", "exp2", "exp3", "exp4", "exp5", "exp6"};
  return names;
}

Json preset_json(std::string_view name) {
  if (name == "exp1") {
    // Dynamic detect: load step from 10% to 75% of a 200 KRPS reference.
    Json j = base_preset("exp1");
    j["cores"] = 8;
    j["queues"] = 12;
    j["dynamic"] = true;
    j["grace_ns"] = ms(20);
    j["policy"] = {{"rows",
                    {{{"load_pct_max", 12}, {"K", 1}, {"M", 1}},
                     {{"load_pct_max", 50}, {"K", 2}, {"M", 4}},
                     {{"load_pct_max", 1e9}, {"K", 3}, {"M", 6}}}},
                   {"reference_rps", 200000},
                   {"max_rows_per_period", 1},
                   {"overload_busy_ratio", 0.9},
                   {"overload_periods", 2}};
    j["workload"] = {{"num_connections", 1000},
                     {"classes", {cls("iot", 1.0, us(1), "Low", 64)}},
                     {"arrival", "poisson"},
                     {"rate_steps", {{{"at_ns", 0}, {"rate", 20000}}, {{"at_ns", ms(50)}, {"rate", 150000}}}},
                     {"duration_ns", ms(100)},
                     {"seed", 1}};
    j["assertions"] = {{"drops_max", 0}};
    return j;
  }
  if (name == "exp2") {
    // One shared core; bursts of short requests with rare 1 ms ones.
    Json j = base_preset("exp2");
    j["workload"] = {{"num_connections", 1000},
                     {"classes", {cls("short", 0.995, us(1), "Low", 64), cls("long", 0.005, ms(1), "Low", 64)}},
                     {"arrival", "burst"},
                     {"bursts_per_s", 14},
                     {"burst_size", 8000},
                     {"duration_ns", ms(1000)},
                     {"seed", 1}};
    j["assertions"] = {{"drops_max", 0}};
    return j;
  }
  if (name == "exp3") {
    // Cross-packet labelling: 4096 B requests span three packets.
    Json j = base_preset("exp3");
    j["extraction"] = "tcp";
    j["workload"] = {{"num_connections", 1000},
                     {"classes", {cls("high", 0.05, us(100), "High", 4096), cls("low", 0.95, us(100), "Low", 4096)}},
                     {"arrival", "burst"},
                     {"bursts_per_s", 150},
                     {"burst_size", 50},
                     {"duration_ns", ms(2000)},
                     {"seed", 1}};
    return j;
  }
  if (name == "exp4") {
    // Co-located latency-critical and best-effort services.
    Json j = base_preset("exp4");
    j["cores"] = 2;
    j["extraction"] = "driver";
    j["plan"] = {{"K", 1}, {"M", 2}, {"stack_cores", {0}}, {"app_cores", {0, 1}}};
    j["features"]["priority_yield"] = true;
    j["thresholds"]["priority_check"] = true;
    j["workload"] = {{"num_connections", 1000},
                     {"classes", {cls("lc", 0.9, us(1), "High", 64), cls("be", 0.1, us(100), "Low", 64)}},
                     {"arrival", "burst"},
                     {"bursts_per_s", 200},
                     {"burst_size", 100},
                     {"duration_ns", ms(1000)},
                     {"seed", 1}};
    return j;
  }
  if (name == "exp5") {
    // Extraction layer: single-packet requests, 10 us service, 5% High.
    Json j = base_preset("exp5");
    j["extraction"] = "driver";
    j["workload"] = {{"num_connections", 1000},
                     {"classes", {cls("high", 0.05, us(10), "High", 64), cls("low", 0.95, us(10), "Low", 64)}},
                     {"arrival", "burst"},
                     {"bursts_per_s", 150},
                     {"burst_size", 400},
                     {"duration_ns", ms(1000)},
                     {"seed", 1}};
    return j;
  }
  if (name == "exp6") {
    // Priority diffluence: 1 ms Low requests move to a second core.
    Json j = base_preset("exp6");
    j["cores"] = 2;
    j["extraction"] = "driver";
    j["plan"] = {{"K", 1}, {"M", 2}, {"stack_cores", {0}}, {"app_cores", {0, 1}}};
    j["features"]["diffluence"] = true;
    j["diffluence"] = {{"high_app", 0}, {"low_app", 1}};
    j["workload"] = {{"num_connections", 1000},
                     {"classes", {cls("short", 0.995, us(1), "High", 64), cls("long", 0.005, ms(1), "Low", 64)}},
                     {"arrival", "burst"},
                     {"bursts_per_s", 2000},
                     {"burst_size", 30},
                     {"duration_ns", ms(1000)},
                     {"seed", 1}};
    j["assertions"] = {{"p99_high_max_ns", us(100)}};
    return j;
  }
  throw Error(ErrorCode::UnknownPreset, "unknown preset '" + std::string(name) + "'");
}

void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) invalid("override must look like key=value: " + std::string(assignment));
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  Json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& key = parts[i];
    if (key.empty()) invalid("empty path segment in override: " + path);
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        invalid("array index expected in override path: " + path);
      }
      if (idx >= node->size()) invalid("array index out of range in override path: " + path);
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) *node = Json::object();
      node = &(*node)[key];
    }
    if (last) *node = value;
  }
}

Scenario scenario_from_json(const Json& doc) {
  Scenario sc;
  try {
    Obj o(doc, "scenario");
    SimConfig& c = sc.config;
    sc.name = o.get<std::string>("name", "scenario");
    c.cores = o.get<std::uint32_t>("cores", c.cores);
    c.queues = o.get<std::uint32_t>("queues", c.queues);
    c.queue_capacity = o.get<std::size_t>("queue_capacity", c.queue_capacity);
    c.nic_batch = o.get<std::size_t>("nic_batch", c.nic_batch);
    c.fastcalldown = o.get<bool>("fastcalldown", c.fastcalldown);
    c.checkpoint_interval = get_ns(o, "checkpoint_interval_ns", c.checkpoint_interval);
    if (o.has("thresholds")) c.thresholds = read_thresholds(o.at("thresholds"));
    c.extraction = extraction_from_string(o.get<std::string>("extraction", "none"));
    if (o.has("features")) c.features = read_features(o.at("features"));
    if (o.has("diffluence")) {
      Obj d(o.at("diffluence"), "diffluence");
      c.diffluence_high_app = d.get<std::uint32_t>("high_app", c.diffluence_high_app);
      c.diffluence_low_app = d.get<std::uint32_t>("low_app", c.diffluence_low_app);
      d.finish();
    }
    if (o.has("plan")) {
      Obj p(o.at("plan"), "plan");
      c.K = p.get<std::uint32_t>("K", c.K);
      c.M = p.get<std::uint32_t>("M", c.M);
      const bool has_s = p.has("stack_cores"), has_a = p.has("app_cores");
      if (has_s != has_a) invalid("plan.stack_cores and plan.app_cores go together");
      if (has_s)
        c.placement = Placement{p.get<std::vector<CoreId>>("stack_cores", {}), p.get<std::vector<CoreId>>("app_cores", {})};
      p.finish();
    }
    c.dynamic = o.get<bool>("dynamic", c.dynamic);
    if (o.has("policy")) c.policy = read_policy(o.at("policy"));
    c.period = get_ns(o, "period_ns", c.period);
    c.grace = get_ns(o, "grace_ns", c.grace);
    if (o.has("tcp")) c.tcp = read_tcp(o.at("tcp"));
    if (o.has("driver")) {
      Obj d(o.at("driver"), "driver");
      c.driver_extraction_ns = get_ns(d, "extraction_ns", c.driver_extraction_ns);
      c.driver_buffer_capacity = d.get<std::size_t>("buffer_capacity", c.driver_buffer_capacity);
      d.finish();
    }
    if (o.has("workload")) c.workload = read_workload(o.at("workload"));
    if (o.has("assertions")) {
      sc.assertions = o.at("assertions");
      if (!sc.assertions.is_object()) invalid("assertions must be an object");
      static const std::set<std::string> known{"drops_max",      "drops_min",    "p99_high_max_ns", "p99_high_min_ns",
                                               "p99_all_max_ns", "eta_min",      "orphaned_max",    "completed_min_fraction"};
      for (const auto& [k, v] : sc.assertions.items())
        if (!known.count(k) || !v.is_number()) invalid("bad assertion '" + k + "'");
    }
    o.finish();
    c.validate();
  } catch (const Json::exception& e) {
    invalid(std::string("bad scenario JSON: ") + e.what());
  }
  return sc;
}

Json report_to_json(const Scenario& sc, const SimReport& r) {
  Json j;
  j["scenario"] = sc.name;
  j["seed"] = sc.config.workload.seed;
  j["end_time_ns"] = r.end_time;
  j["requests"] = {{"offered", r.offered}, {"completed", r.completed}, {"incomplete", r.offered - r.completed}};

  Json lat;
  lat["all"] = latency_json(r.all);
  lat["high"] = latency_json(r.high);
  lat["low"] = latency_json(r.low);
  Json classes = Json::object();
  for (const auto& [name, h] : r.by_class.classes()) classes[name] = latency_json(h);
  lat["classes"] = classes;
  j["latency"] = lat;

  Json queues = Json::array();
  for (const auto& q : r.queues)
    queues.push_back({{"enqueued", q.enqueued}, {"dequeued", q.dequeued}, {"drops", q.drops}});
  j["nic"] = {{"drops", r.drops},
              {"first_drop_ns", r.first_drop_at == kNever ? Json(nullptr) : Json(r.first_drop_at)},
              {"queues", queues}};
  j["driver_drops"] = r.driver_drops;

  Nanos app = 0, total = 0;
  Json cores = Json::array();
  for (std::size_t c = 0; c < r.cores.size(); ++c) {
    const CoreStats& cs = r.cores[c];
    app += cs.account.app_ns;
    total += cs.account.total_ns();
    cores.push_back({{"id", c},
                     {"role", role_name(cs.role)},
                     {"app_ns", cs.account.app_ns},
                     {"stack_ns", cs.account.stack_ns},
                     {"fcd_ns", cs.account.fcd_ns},
                     {"spin_ns", cs.account.spin_ns},
                     {"explicit_checks", cs.explicit_checks},
                     {"implicit_checks", cs.implicit_checks},
                     {"drains", cs.drains},
                     {"tcp_batches", cs.tcp_batches},
                     {"budget_yields", cs.budget_yields},
                     {"max_run_ns", cs.max_run_ns},
                     {"priority_yields", cs.priority_yields}});
  }
  j["cores"] = cores;
  j["cpu"] = {{"app_ns", app}, {"total_ns", total}, {"eta", r.eta}};

  j["events"] = {{"emitted", r.events_emitted},
                 {"delivered", r.events_delivered},
                 {"orphaned", r.events_orphaned},
                 {"pending", r.events_pending},
                 {"binding_conflicts", r.binding_conflicts}};
  j["tcp"] = {{"ignored", r.tcp_ignored}};
  j["labels"] = {{"high_request_packets", r.labels.high_request_packets},
                 {"high_request_packets_high", r.labels.high_request_packets_high},
                 {"high_request_first_high", r.labels.high_request_first_high},
                 {"high_request_rest_high", r.labels.high_request_rest_high},
                 {"high_requests_seen", r.labels.high_requests_seen},
                 {"low_request_packets_high", r.labels.low_request_packets_high}};

  Json changes = Json::array();
  for (const auto& pc : r.plan_changes)
    changes.push_back({{"at_ns", pc.at}, {"K", pc.plan.K}, {"M", pc.plan.M}, {"roles", roles_json(pc.plan)}});
  j["plan_changes"] = changes;
  j["periods"] = r.timeline.size();
  return j;
}

std::string timeline_csv(const SimReport& r) {
  std::string out(kTimelineHeader);
  out += '\n';
  auto opt = [](const std::optional<Nanos>& v) { return v ? std::to_string(*v) : std::string(); };
  char buf[64];
  for (const auto& row : r.timeline) {
    out += std::to_string(row.period_end);
    std::snprintf(buf, sizeof buf, ",%.3f,", row.load_pct);
    out += buf;
    out += std::to_string(row.K) + ',' + std::to_string(row.M) + ',' + row.roles + ',';
    out += opt(row.p99_high) + ',' + opt(row.p99_low) + ',' + opt(row.p99_all) + ',';
    out += std::to_string(row.drops);
    std::snprintf(buf, sizeof buf, ",%.6f\n", row.eta);
    out += buf;
  }
  return out;
}

std::vector<std::string> check_assertions(const Json& a, const SimReport& r) {
  std::vector<std::string> failed;
  auto num = [&](const char* key) { return a.at(key).get<double>(); };
  auto p99 = [](const LatencyHistogram& h) { return h.count() ? static_cast<double>(h.p99()) : -1.0; };
  for (const auto& [key, v] : a.items()) {
    if (!v.is_number()) {
      failed.push_back(key + ": value must be a number");
      continue;
    }
    const double lim = num(key.c_str());
    std::string msg;
    if (key == "drops_max") {
      if (static_cast<double>(r.drops) > lim) msg = "drops " + std::to_string(r.drops);
    } else if (key == "drops_min") {
      if (static_cast<double>(r.drops) < lim) msg = "drops " + std::to_string(r.drops);
    } else if (key == "p99_high_max_ns") {
      if (p99(r.high) < 0 || p99(r.high) > lim) msg = "p99 high " + std::to_string(p99(r.high));
    } else if (key == "p99_high_min_ns") {
      if (p99(r.high) < lim) msg = "p99 high " + std::to_string(p99(r.high));
    } else if (key == "p99_all_max_ns") {
      if (p99(r.all) < 0 || p99(r.all) > lim) msg = "p99 all " + std::to_string(p99(r.all));
    } else if (key == "eta_min") {
      if (r.eta < lim) msg = "eta " + std::to_string(r.eta);
    } else if (key == "orphaned_max") {
      if (static_cast<double>(r.events_orphaned) > lim) msg = "orphaned " + std::to_string(r.events_orphaned);
    } else if (key == "completed_min_fraction") {
      const double f = r.offered ? static_cast<double>(r.completed) / static_cast<double>(r.offered) : 1.0;
      if (f < lim) msg = "completed fraction " + std::to_string(f);
    } else {
      msg = "unknown assertion";
    }
    if (!msg.empty()) failed.push_back(key + ": " + msg);
  }
  return failed;
}

}  // namespace qstack
