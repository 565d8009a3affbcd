#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "coopallee/error.hpp"
#include "coopallee/output.hpp"
#include "coopallee/scenario.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <set>
#include <sys/wait.h>
#include <unistd.h>

using namespace coopallee;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path bundled() {
  const char* env = std::getenv("COOPALLEE_SCENARIOS");
  return env ? fs::path(env) : fs::path("scenarios");
}

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("coopallee-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kBase = "r = 1.1\na = 0.23\nm = 0.31\nc = 0.25\n";

}  // namespace

TEST_CASE("malformed configurations exit 2 and write nothing") {
  TempDir tmp;
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"no-equals", std::string("task = equilibria\n") + kBase + "p 1.4\n"},
      {"unknown-key", std::string("task = equilibria\n") + kBase + "sweep.p_lo = 1\n"},
      {"unknown-task", std::string("task = bifurcate\n") + kBase},
      {"bad-number", std::string("task = equilibria\n") + kBase + "p = 1.4x\n"},
      {"duplicate", std::string("task = equilibria\n") + kBase + "c = 3\n"},
      {"missing-model", "task = equilibria\nc = 1\n"},
      {"missing-option", std::string("task = sweep\n") + kBase + "sweep.p_lo = 1\n"},
      {"orphan-tol", std::string("task = equilibria\n") + kBase + "tol.p_H = 1e-3\n"},
      {"bad-stepper", std::string("task = pde\n") + kBase + "p = 1.4\nd1 = 1\nd2 = 1\npde.t_end = 1\npde.stepper = euler\n"},
      {"negative-rate", "task = equilibria\nr = -1\na = 0.23\nm = 0.31\nc = 0.25\n"},
  };
  for (const auto& [name, text] : bad) {
    CAPTURE(name);
    const auto out = tmp.path / ("out-" + name);
    const RunReport rep = run_scenario_file(tmp.write(name + ".conf", text).string(), out.string());
    CHECK(rep.exit_code == 2);
    CHECK_FALSE(rep.error.empty());
    CHECK_FALSE(fs::exists(out));
  }
  const RunReport missing = run_scenario_file((tmp.path / "absent.conf").string(), (tmp.path / "x").string());
  CHECK(missing.exit_code == 2);
}

TEST_CASE("domain errors exit 1 and write nothing") {
  TempDir tmp;
  // p above 1/(1 - a) leaves no interior equilibrium for the PDE to start from.
  const auto f = tmp.write("dom.conf", std::string("task = pde\n") + kBase +
                                           "p = 5\nd1 = 1\nd2 = 1\npde.t_end = 1\n");
  const auto out = tmp.path / "out";
  const RunReport rep = run_scenario_file(f.string(), out.string());
  CHECK(rep.exit_code == 1);
  CHECK(rep.error.find("DomainError") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
  CHECK(rep.to_json().at("exit_code") == 1);
}

TEST_CASE("failed expectations exit 1 with the comparison recorded") {
  TempDir tmp;
  const auto f = tmp.write("eq.conf", std::string("task = equilibria\n") + kBase +
                                          "p = 1.4\nexpect.u_star = 0.5\ntol.u_star = 1e-3\nexpect.regime = weak\n");
  const RunReport rep = run_scenario_file(f.string(), (tmp.path / "out").string());
  CHECK(rep.exit_code == 1);
  REQUIRE(rep.checks.size() == 2);
  for (const auto& c : rep.checks) {
    if (c.key == "u_star") {
      CHECK_FALSE(c.pass);
      CHECK(c.actual.get<double>() == doctest::Approx(0.6882).epsilon(1e-3));
    }
  }
  const json checks = json::parse(slurp(tmp.path / "out" / "checks.json"));
  CHECK(checks.at("checks").size() == 2);
}

TEST_CASE("runs are byte-identical and the manifest covers every file") {
  TempDir tmp;
  const std::string text = std::string("task = phase\n") + kBase + "p = 1.6\nphase.grid = 4\n";
  const auto f = tmp.write("det.conf", text);
  const auto a = tmp.path / "a", b = tmp.path / "b";
  REQUIRE(run_scenario_file(f.string(), a.string()).exit_code == 0);
  REQUIRE(run_scenario_file(f.string(), b.string()).exit_code == 0);

  std::set<std::string> on_disk;
  for (const auto& e : fs::directory_iterator(a)) on_disk.insert(e.path().filename().string());
  for (const auto& name : on_disk) {
    CAPTURE(name);
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(on_disk.count("manifest.json"));
  CHECK(on_disk.count("values.json"));
  CHECK(on_disk.count("basins.csv"));

  const json man = json::parse(slurp(a / "manifest.json"));
  std::set<std::string> listed;
  for (const auto& item : man.at("artifacts")) {
    const std::string name = item.at("file");
    listed.insert(name);
    const std::string bytes = slurp(a / name);
    CHECK(item.at("sha256") == sha256_hex(bytes));
    CHECK(item.at("bytes") == bytes.size());
  }
  on_disk.erase("manifest.json");
  CHECK(listed == on_disk);
  for (const auto& e : fs::directory_iterator(a)) CHECK(e.path().extension() != ".part");
}

TEST_CASE("numbers are written with full precision") {
  TempDir tmp;
  const auto f = tmp.write("eq.conf", std::string("task = equilibria\n") + kBase + "p = 1.4\n");
  REQUIRE(run_scenario_file(f.string(), (tmp.path / "out").string()).exit_code == 0);
  const json v = json::parse(slurp(tmp.path / "out" / "values.json"));
  std::istringstream csv(slurp(tmp.path / "out" / "equilibria.csv"));
  std::string header, line;
  std::getline(csv, header);
  bool found = false;
  while (std::getline(csv, line)) {
    if (line.rfind("Interior", 0) != 0 && line.rfind("interior", 0) != 0) continue;
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    const double u = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    if (u == v.at("u_star").get<double>()) found = true;
  }
  CHECK(found);
}

TEST_CASE("reproduce_all honours the filter and reports runtimes") {
  TempDir tmp;
  tmp.write("one.conf", std::string("task = equilibria\n") + kBase + "p = 1.4\nexpect.interior_count = 1\n");
  tmp.write("two.conf", std::string("task = hetero\n") + kBase);
  const auto reps = reproduce_all(tmp.path.string(), (tmp.path / "out").string(), "one", 2);
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].name == "one");
  CHECK(reps[0].exit_code == 0);
  CHECK(reps[0].seconds >= 0.0);
  CHECK(fs::exists(tmp.path / "out" / "one" / "manifest.json"));
  CHECK_FALSE(fs::exists(tmp.path / "out" / "two"));

  const auto both = reproduce_all(tmp.path.string(), (tmp.path / "all").string(), "", 2);
  REQUIRE(both.size() == 2);
  CHECK(both[1].exit_code == 2);
  const std::string table = summary_table(both);
  CHECK(table.find("seconds") != std::string::npos);
  CHECK(table.find("one") != std::string::npos);
  CHECK(table.find("FAIL") != std::string::npos);
}

TEST_CASE("bundled sweep puts the Hopf row at the threshold") {
  TempDir tmp;
  const RunReport rep = run_scenario_file((bundled() / "fig-c025-hopf.conf").string(), tmp.path.string());
  REQUIRE(rep.exit_code == 0);
  std::istringstream csv(slurp(tmp.path / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("p,hopf,", 0) == 0);
  int hopf_rows = 0;
  while (std::getline(csv, line)) {
    const auto c1 = line.find(',');
    if (line.substr(c1 + 1, 2) != "1,") continue;
    ++hopf_rows;
    CHECK(std::abs(std::stod(line.substr(0, c1)) - 1.5432) < 1e-3);
  }
  CHECK(hopf_rows == 1);
}

TEST_CASE("bundled crossing-set scenario matches the four endpoints") {
  TempDir tmp;
  const RunReport rep = run_scenario_file((bundled() / "appendix-c-omega0.conf").string(), tmp.path.string());
  REQUIRE(rep.exit_code == 0);
  const json doc = json::parse(slurp(tmp.path / "crossing_sets.json"));
  const auto& iv = doc.at("sets").at(0).at("intervals");
  REQUIRE(doc.at("sets").at(0).at("n") == 0);
  REQUIRE(iv.size() == 2);
  const double want[2][2] = {{0.0636, 0.1184}, {0.3781, 0.5602}};
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) CHECK(std::abs(iv[i][k].get<double>() - want[i][k]) < 1e-3);
}

TEST_CASE("every bundled scenario validates") {
  int n = 0;
  for (const auto& e : fs::directory_iterator(bundled())) {
    if (e.path().extension() != ".conf") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(Scenario::load(e.path().string()));
    ++n;
  }
  CHECK(n >= 30);
  std::set<std::string> tasks;
  for (const auto& e : fs::directory_iterator(bundled()))
    if (e.path().extension() == ".conf") tasks.insert(Scenario::load(e.path().string()).task);
  CHECK(tasks.size() == task_names().size());
}

TEST_CASE("command line exit codes") {
  TempDir tmp;
  const std::string cli = COOPALLEE_CLI;
  auto run = [&](const std::string& args) {
    const int st = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  const auto good = tmp.write("good.conf", std::string("task = equilibria\n") + kBase + "p = 1.4\n");
  const auto bad = tmp.write("bad.conf", "task = equilibria\nbogus\n");
  CHECK(run("--out " + (tmp.path / "o").string() + " run " + good.string()) == 0);
  CHECK(fs::exists(tmp.path / "o" / "good" / "manifest.json"));
  CHECK(run("--out " + (tmp.path / "p").string() + " run " + bad.string()) == 2);
  CHECK_FALSE(fs::exists(tmp.path / "p" / "bad"));
  CHECK(run("--no-such-flag") == 2);
}
