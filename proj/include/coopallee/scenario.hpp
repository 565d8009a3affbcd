#pragma once

#include "coopallee/config.hpp"
#include "coopallee/output.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace coopallee {

// One reproduction recipe: model parameters, a task selector, task options and expectations
// (`expect.<value> = x`, optional `tol.<value> = t`).
struct Scenario {
  std::string name;
  std::string task;
  std::string source_dir = ".";  // base for relative paths inside the file
  Config cfg;

  static Scenario parse(const std::string& text, const std::string& fallback_name,
                        const std::string& source_dir = ".");
  static Scenario load(const std::string& path);
};

const std::vector<std::string>& task_names();

struct TaskOutput {
  ArtifactSet artifacts;
  nlohmann::json values = nlohmann::json::object();  // scalar results compared against expectations
};

// Checks keys and required parameters without running anything. Throws ConfigError.
void validate(const Scenario& sc);

TaskOutput run_task(const Scenario& sc, std::uint64_t seed = 0);

struct Check {
  std::string key;
  nlohmann::json expected, actual;
  double tol = 0.0;
  bool pass = false;
};

std::vector<Check> check_expectations(const Scenario& sc, const nlohmann::json& values);

struct RunReport {
  std::string name;
  int exit_code = 0;  // 0 ok, 1 domain error or failed expectation, 2 configuration error
  std::string error;
  std::vector<Check> checks;
  double seconds = 0.0;
  nlohmann::json to_json() const;
};

// Runs one scenario file and writes its artifacts and manifest under out_dir only on completion.
RunReport run_scenario_file(const std::string& path, const std::string& out_dir, std::uint64_t seed = 0);

// Every *.conf in dir (sorted), optionally only the one named `filter`, each into out_dir/<name>.
std::vector<RunReport> reproduce_all(const std::string& dir, const std::string& out_dir,
                                     const std::string& filter = "", int workers = 1,
                                     std::uint64_t seed = 0);

std::string summary_table(const std::vector<RunReport>& reports);

}  // namespace coopallee
