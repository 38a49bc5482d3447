#include <doctest.h>

#include "qstack/resource.hpp"

using namespace qstack;

namespace {

PeriodSample sample(std::uint64_t requests, std::uint32_t cores = 8, Nanos busy = 0) {
  PeriodSample s;
  s.start = 0;
  s.end = ms(10);
  s.requests_offered = requests;
  s.core_app_busy.assign(cores, busy);
  s.core_backlog.assign(cores, 0);
  return s;
}

}  // namespace

TEST_CASE("collect turns offered requests into load percent") {
  ResourceManager rm(Policy::defaults(), 8, 8);
  // 20 KRPS over 10 ms = 200 requests.
  CHECK(rm.collect(sample(200)).load_pct == doctest::Approx(10.0));
  CHECK(rm.collect(sample(1500)).load_pct == doctest::Approx(75.0));
  auto idle = rm.collect(sample(0));
  CHECK(idle.load_pct == 0.0);
  for (bool b : idle.idle_eligible) CHECK(b);
  for (bool b : idle.overloaded) CHECK_FALSE(b);
}

TEST_CASE("default plans") {
  auto one = build_plan(1, 1, 8, 8);
  CHECK(one.roles[0] == CoreRole::Shared);
  for (CoreId c = 1; c < 8; ++c) CHECK(one.roles[c] == CoreRole::Idle);
  CHECK(one.describe() == "K=1 M=1 roles=A+S,-,-,-,-,-,-,-");

  auto big = build_plan(3, 6, 8, 12);
  CHECK(big.stack_core == std::vector<CoreId>{0, 1, 2});
  CHECK(big.app_core == std::vector<CoreId>{3, 3, 4, 4, 5, 5});
  for (std::uint32_t g = 0; g < 12; ++g) CHECK(big.group_to_stack[g] == g % 3);
  validate_plan(big, 3, 6, 8);

  auto packed = build_plan(2, 4, 2, 2);
  validate_plan(packed, 2, 4, 2);
  CHECK(packed.roles[0] == CoreRole::Shared);
  CHECK(packed.roles[1] == CoreRole::Shared);
}

TEST_CASE("decide follows the step table one row per period") {
  ResourceManager rm(Policy::defaults(), 8, 8);
  auto plan = build_plan(1, 1, 8, 8);
  auto p = rm.decide(rm.collect(sample(200)), plan);
  CHECK(p == plan);
  CHECK(p.K == 1);
  CHECK(p.M == 1);

  p = rm.decide(rm.collect(sample(1500)), p);
  CHECK(p.K == 2);
  CHECK(p.M == 4);
  p = rm.decide(rm.collect(sample(1500)), p);
  CHECK(p.K == 3);
  CHECK(p.M == 6);
  p = rm.decide(rm.collect(sample(1500)), p);
  CHECK(p.K == 3);

  p = rm.decide(rm.collect(sample(0)), p);
  CHECK(p.M == 4);
}

TEST_CASE("two consecutive overloaded periods migrate an app") {
  Policy pol = Policy::defaults();
  ResourceManager rm(pol, 8, 8);
  auto plan = build_plan(2, 4, 8, 8);  // apps on cores 2,2,3,3
  auto s = sample(500);
  s.core_app_busy[2] = ms(10);
  auto p = rm.decide(rm.collect(s), plan);
  CHECK(p == plan);
  p = rm.decide(rm.collect(s), p);
  CHECK(p != plan);
  auto rep = diff_plans(plan, p);
  REQUIRE(rep.moved_apps.size() == 1);
  CHECK(plan.app_core[rep.moved_apps[0]] == 2);
  CHECK(p.app_core[rep.moved_apps[0]] == 4);  // first idle core
  validate_plan(p, 2, 4, 8);
}

TEST_CASE("plan diffs") {
  auto six = build_plan(3, 6, 8, 8), four = build_plan(2, 4, 8, 8);
  auto shrink = diff_plans(six, four);
  CHECK(shrink.suspended_apps == std::vector<std::uint32_t>{4, 5});
  CHECK(shrink.suspended_stacks == std::vector<std::uint32_t>{2});
  CHECK_FALSE(shrink.remapped_groups.empty());
  for (auto g : shrink.remapped_groups) CHECK(six.group_to_stack[g] != four.group_to_stack[g]);
  CHECK(diff_plans(six, six).empty());
  auto grow = diff_plans(four, six);
  CHECK(grow.woken_apps == std::vector<std::uint32_t>{4, 5});
}

TEST_CASE("validate_plan rejects dead references") {
  auto p = build_plan(2, 4, 8, 8);
  CHECK_THROWS_AS(validate_plan(p, 1, 4, 8), Error);
  auto bad = p;
  bad.group_to_stack[0] = 5;
  try {
    validate_plan(bad, 2, 4, 8);
    FAIL("expected InvalidPlan");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidPlan);
  }
  auto idle = p;
  idle.roles[2] = CoreRole::Idle;
  CHECK_THROWS_AS(validate_plan(idle, 2, 4, 8), Error);
}

TEST_CASE("every group maps to a live stack in all table plans") {
  for (const auto& row : Policy::defaults().rows) {
    auto p = build_plan(row.K, row.M, 8, 12);
    for (auto s : p.group_to_stack) CHECK(s < p.K);
  }
}
