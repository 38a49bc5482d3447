#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "qstack/scenario.hpp"

using namespace qstack;

TEST_CASE("every preset parses") {
  for (const auto& n : preset_names()) {
    auto sc = scenario_from_json(preset_json(n));
    CHECK(sc.name == n);
    sc.config.validate();
  }
  try {
    preset_json("exp9");
    FAIL("expected UnknownPreset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownPreset);
  }
}

TEST_CASE("exp3 preset: 5% High at 100 us with 4096 and 1024 B variants") {
  auto j = preset_json("exp3");
  auto sc = scenario_from_json(j);
  const auto& cl = sc.config.workload.classes;
  REQUIRE(cl.size() == 2);
  CHECK(cl[0].fraction == 0.05);
  CHECK(cl[0].priority == Priority::High);
  CHECK(cl[0].service_ns == us(100));
  CHECK(cl[0].request_bytes == 4096);
  apply_override(j, "workload.classes.0.request_bytes=1024");
  apply_override(j, "workload.classes.1.request_bytes=1024");
  auto small = scenario_from_json(j);
  CHECK(small.config.workload.classes[0].request_bytes == 1024);
}

TEST_CASE("exp6 and exp1 presets") {
  auto six = scenario_from_json(preset_json("exp6"));
  CHECK(six.config.features.diffluence);
  CHECK(six.config.workload.classes[0].fraction == 0.995);
  CHECK(six.config.workload.classes[1].fraction == 0.005);
  CHECK(six.config.workload.classes[1].service_ns == ms(1));

  auto one = scenario_from_json(preset_json("exp1"));
  CHECK(one.config.policy.reference_rps == 200'000);
  REQUIRE(one.config.workload.rate_steps.size() == 2);
  CHECK(100 * one.config.workload.rate_steps[0].rate / 200'000 == 10);
  CHECK(100 * one.config.workload.rate_steps[1].rate / 200'000 == 75);
}

TEST_CASE("overrides") {
  Json j = preset_json("exp2");
  apply_override(j, "fastcalldown=false");
  apply_override(j, "workload.seed=7");
  apply_override(j, "name=renamed");
  apply_override(j, "thresholds.check_cost_ns=30");
  auto sc = scenario_from_json(j);
  CHECK_FALSE(sc.config.fastcalldown);
  CHECK(sc.config.workload.seed == 7);
  CHECK(sc.name == "renamed");
  CHECK(sc.config.thresholds.check_cost == 30);
  CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), Error);
}

TEST_CASE("strict reader rejects unknown keys and bad values") {
  Json j = preset_json("exp2");
  j["fastcalldwn"] = true;
  try {
    scenario_from_json(j);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
  Json k = preset_json("exp2");
  k["extraction"] = "nic";
  CHECK_THROWS_AS(scenario_from_json(k), Error);
  Json m = preset_json("exp2");
  m["workload"]["classes"][0]["fraction"] = 0.5;
  CHECK_THROWS_AS(scenario_from_json(m), Error);
}

TEST_CASE("report and timeline rendering") {
  Json j = preset_json("exp1");
  apply_override(j, "workload.duration_ns=30000000");
  apply_override(j, "workload.rate_steps.1.at_ns=10000000");
  auto sc = scenario_from_json(j);
  auto r = Simulation(sc.config).run();
  auto a = report_to_json(sc, r).dump(2);
  auto b = report_to_json(sc, Simulation(sc.config).run()).dump(2);
  CHECK(a == b);
  auto csv = timeline_csv(r);
  CHECK(csv.rfind(std::string(kTimelineHeader), 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.timeline.size() + 1);

  CHECK(check_assertions(Json{{"drops_max", 0}}, r).empty());
  CHECK(check_assertions(Json{{"drops_min", 1}}, r).size() == 1);
  CHECK(check_assertions(Json{{"latency_max", 1}}, r).size() == 1);
  j["assertions"] = {{"latency_max", 1}};
  CHECK_THROWS_AS(scenario_from_json(j), Error);
}

TEST_CASE("shipped scenario files parse") {
  namespace fs = std::filesystem;
  int n = 0;
  for (const auto& e : fs::directory_iterator(QSTACK_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    std::ifstream in(e.path());
    auto sc = scenario_from_json(Json::parse(in));
    CHECK_MESSAGE(!sc.name.empty(), e.path().string());
    ++n;
  }
  CHECK(n >= 6);
}
