#include "coopallee/error.hpp"
#include "coopallee/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace coopallee;

int main(int argc, char** argv) {
  CLI::App app{"Bifurcation toolkit for a prey-predator model with Allee effect and hunting cooperation"};
  app.require_subcommand(1);

  std::string out_dir = "out";
  std::uint64_t seed = 0;
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "seed for randomized spot checks")->capture_default_str();

  std::string file;
  auto* run = app.add_subcommand("run", "run one scenario file");
  run->add_option("file", file, "scenario file")->required();

  const char* env = std::getenv("COOPALLEE_SCENARIOS");
  std::string dir = env ? env : "scenarios";
  std::string filter;
  int workers = 1;
  auto* all = app.add_subcommand("reproduce-all", "run every bundled scenario and compare with expected values");
  all->add_option("--scenarios", dir, "scenario directory")->capture_default_str();
  all->add_option("--filter", filter, "run only the scenario with this name");
  all->add_option("--workers", workers, "concurrent scenarios")->check(CLI::Range(1, 256))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*run) {
    std::string name = fs::path(file).stem().string();
    try {
      name = Scenario::load(file).name;
    } catch (const Error&) {
      // reported by run_scenario_file below
    }
    const RunReport rep = run_scenario_file(file, (fs::path(out_dir) / name).string(), seed);
    if (!rep.error.empty()) {
      std::cerr << rep.to_json().dump(2) << "\n";
      return rep.exit_code;
    }
    std::cout << summary_table({rep});
    return rep.exit_code;
  }

  try {
    const auto reports = reproduce_all(dir, out_dir, filter, workers, seed);
    std::cout << summary_table(reports);
    nlohmann::json j = nlohmann::json::array();
    bool ok = true;
    for (const auto& r : reports) {
      j.push_back(r.to_json());
      ok &= r.exit_code == 0;
    }
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "summary.json") << j.dump(2) << "\n";
    return ok ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"exit_code", 2}}.dump(2) << "\n";
    return 2;
  }
}
