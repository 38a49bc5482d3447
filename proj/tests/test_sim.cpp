#include <doctest.h>

#include <numeric>

#include "qstack/scenario.hpp"
#include "qstack/simulation.hpp"

using namespace qstack;

namespace {

SimConfig steady(std::uint32_t cores = 2) {
  SimConfig c;
  c.cores = cores;
  c.queues = 2;
  c.K = 1;
  c.M = 2;
  c.workload.rate = 50'000;
  c.workload.duration = ms(20);
  c.grace = ms(5);
  return c;
}

}  // namespace

TEST_CASE("engine runs are deterministic") {
  auto a = Simulation(steady()).run(), b = Simulation(steady()).run();
  REQUIRE(a.requests.size() == b.requests.size());
  for (std::size_t i = 0; i < a.requests.size(); ++i) {
    CHECK(a.requests[i].t_leave == b.requests[i].t_leave);
    CHECK(a.requests[i].t_service_start == b.requests[i].t_service_start);
  }
  CHECK(a.eta == b.eta);
}

TEST_CASE("clock conservation and accounting identity") {
  auto r = Simulation(steady()).run();
  Nanos busy = 0, app = 0, total = 0;
  for (const auto& c : r.cores) {
    busy += c.account.busy_ns();
    app += c.account.app_ns;
    total += c.account.total_ns();
    CHECK(c.account.total_ns() <= r.end_time);
  }
  CHECK(busy <= static_cast<Nanos>(r.cores.size()) * r.end_time);
  CHECK(r.eta == doctest::Approx(CpuAccount{app, total}.efficiency()));
  CHECK(r.completed == r.offered);
  CHECK(r.events_emitted == r.events_delivered + r.events_pending + r.events_orphaned);
  for (const auto& q : r.queues) CHECK(q.enqueued == q.dequeued + q.drops);
  for (const auto& rec : r.requests) {
    CHECK(rec.done);
    CHECK(rec.t_leave >= rec.t_enter);
    CHECK(rec.t_service_start >= rec.t_event);
    CHECK(rec.t_service_end - rec.t_service_start >= (rec.class_index == 0 ? us(1) : 0));
  }
}

TEST_CASE("efficiency stays at or below one when service saturates the core") {
  SimConfig c;
  c.workload.arrival = ArrivalPattern::Uniform;
  c.workload.rate = 9'800;
  c.workload.classes = {{"busy", 1.0, us(100), Priority::Low, 64}};
  c.workload.duration = ms(30);
  c.grace = ms(1);
  auto r = Simulation(c).run();
  CHECK(r.eta <= 1.0);
  CHECK(r.eta > 0.9);
}

TEST_CASE("no task runs past its budget plus one checkpoint") {
  SimConfig c;
  c.cores = 2;
  c.M = 1;
  c.placement = Placement{{0}, {1}};
  c.thresholds.coroutine_budget = ms(2);
  c.workload.classes = {{"long", 1.0, ms(7), Priority::Low, 64}};
  c.workload.script = {{0, 0, 0}};
  c.workload.duration = ms(1);
  c.grace = ms(10);
  auto r = Simulation(c).run();
  REQUIRE(r.completed == 1);
  CHECK(r.cores[1].budget_yields >= 3);
  CHECK(r.cores[1].max_run_ns >= ms(2));
  CHECK(r.cores[1].max_run_ns <= ms(2) + c.checkpoint_interval + c.thresholds.check_cost);
}

TEST_CASE("1 ms service with 10 us checkpoints makes 100 explicit checks") {
  SimConfig c;
  c.workload.classes = {{"long", 1.0, ms(1), Priority::Low, 64}};
  c.workload.script = {{0, 0, 0}};
  c.workload.duration = ms(1);
  c.grace = ms(2);
  auto r = Simulation(c).run();
  REQUIRE(r.completed == 1);
  CHECK(r.cores[0].explicit_checks == 100);
  CHECK(r.cores[0].explicit_check_ns == 100 * 22);
}

TEST_CASE("dynamic plans: requests survive every migration") {
  auto sc = scenario_from_json(preset_json("exp1"));
  auto r = Simulation(sc.config).run();
  CHECK(r.completed == r.offered);
  CHECK(r.events_orphaned == 0);
  CHECK(r.drops == 0);
  bool grew = false, shrank = false;
  for (std::size_t i = 1; i < r.plan_changes.size(); ++i) {
    grew |= r.plan_changes[i].plan.M > r.plan_changes[i - 1].plan.M;
    shrank |= r.plan_changes[i].plan.M < r.plan_changes[i - 1].plan.M;
    for (auto s : r.plan_changes[i].plan.group_to_stack) CHECK(s < r.plan_changes[i].plan.K);
  }
  CHECK(grew);
  CHECK(shrank);
}
