// qstack: scenario runner for the simulator.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qstack/scenario.hpp"

namespace fs = std::filesystem;
using namespace qstack;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitAssert = 3;

Json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, path + " is not valid JSON");
  return j;
}

std::string fmt_us(const LatencyHistogram& h) {
  if (!h.count()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", static_cast<double>(h.p99()) / 1000.0);
  return buf;
}

void print_summary(const Scenario& sc, const SimReport& r) {
  std::printf("scenario   %s (seed %llu)\n", sc.name.c_str(), static_cast<unsigned long long>(sc.config.workload.seed));
  std::printf("requests   %llu offered, %llu completed\n", static_cast<unsigned long long>(r.offered),
              static_cast<unsigned long long>(r.completed));
  std::printf("%-10s %10s %12s\n", "class", "count", "p99 (us)");
  std::printf("%-10s %10llu %12s\n", "all", static_cast<unsigned long long>(r.all.count()), fmt_us(r.all).c_str());
  std::printf("%-10s %10llu %12s\n", "high", static_cast<unsigned long long>(r.high.count()), fmt_us(r.high).c_str());
  std::printf("%-10s %10llu %12s\n", "low", static_cast<unsigned long long>(r.low.count()), fmt_us(r.low).c_str());
  for (const auto& [name, h] : r.by_class.classes())
    std::printf("%-10s %10llu %12s\n", name.c_str(), static_cast<unsigned long long>(h.count()), fmt_us(h).c_str());
  std::printf("nic drops  %llu\n", static_cast<unsigned long long>(r.drops));
  std::printf("eta        %.4f\n", r.eta);
  std::printf("plans      %zu\n", r.plan_changes.size());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + p.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qstack: deterministic network-stack scheduling simulator"};
  app.require_subcommand(1);

  std::string scenario_path, preset_for_run, out_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool assert_mode = false;
  auto* run = app.add_subcommand("run", "run a scenario file and write report.json / timeline.csv");
  run->add_option("scenario", scenario_path, "scenario JSON file");
  run->add_option("--preset", preset_for_run, "run a named preset instead of a file");
  run->add_option("--seed", seed, "workload seed");
  run->add_option("--set", sets, "override, key.path=value (repeatable)");
  run->add_flag("--assert", assert_mode, "exit non-zero when a scenario assertion fails");
  run->add_option("--out", out_dir, "output directory");

  std::string preset_name, preset_out;
  std::vector<std::string> preset_sets;
  auto* preset = app.add_subcommand("preset", "print the canonical scenario JSON of an experiment");
  preset->add_option("name", preset_name, "exp1 .. exp6")->required();
  preset->add_option("--set", preset_sets, "override, key.path=value (repeatable)");
  preset->add_option("-o,--output", preset_out, "write to file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*preset) {
      Json j = preset_json(preset_name);
      for (const auto& s : preset_sets) apply_override(j, s);
      scenario_from_json(j);  // reject overrides that break the config
      const std::string text = j.dump(2) + "\n";
      if (preset_out.empty()) std::cout << text;
      else write_text(preset_out, text);
      return 0;
    }

    if (scenario_path.empty() == preset_for_run.empty()) {
      std::cerr << "run: give either a scenario file or --preset\n";
      return kExitInvalid;
    }
    Json doc = scenario_path.empty() ? preset_json(preset_for_run) : load_file(scenario_path);
    for (const auto& s : sets) apply_override(doc, s);
    if (seed) doc["workload"]["seed"] = *seed;
    const Scenario sc = scenario_from_json(doc);

    Simulation sim(sc.config);
    const SimReport report = sim.run();
    print_summary(sc, report);

    const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
    fs::create_directories(dir);
    write_text(dir / "report.json", report_to_json(sc, report).dump(2) + "\n");
    write_text(dir / "timeline.csv", timeline_csv(report));

    if (assert_mode) {
      const auto failed = check_assertions(sc.assertions, report);
      for (const auto& f : failed) std::cerr << "assertion failed: " << f << "\n";
      if (!failed.empty()) return kExitAssert;
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
