#include "coopallee/scenario.hpp"

#include "coopallee/delay.hpp"
#include "coopallee/equilibria.hpp"
#include "coopallee/error.hpp"
#include "coopallee/normal_form.hpp"
#include "coopallee/ode.hpp"
#include "coopallee/pde.hpp"
#include "coopallee/phase.hpp"
#include "coopallee/turing.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace coopallee {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kCommonKeys = {"name", "task", "r", "a", "c", "m", "p",
                                           "d1", "d2", "l", "tau1", "tau2"};

const std::map<std::string, std::set<std::string>> kTaskKeys = {
    {"equilibria", {}},
    {"sweep", {"sweep.p_lo", "sweep.p_hi", "sweep.steps", "cycle.transient", "cycle.return_tol"}},
    {"phase", {"phase.grid", "phase.u_step", "phase.v_step", "phase.orbit_time", "basin.horizon"}},
    {"heteroclinic", {"het.tol", "het.scan"}},
    {"homoclinic", {"hom.tol", "hom.scan"}},
    {"turing", {"turing.d1_lo", "turing.d1_hi", "turing.n_max", "turing.samples", "turing.th_d1", "turing.th_n"}},
    {"pde",
     {"pde.N", "pde.t_end", "pde.dt", "pde.stepper", "pde.sample_every", "pde.record_from", "pde.tail",
      "pde.init", "pde.k", "pde.u0", "pde.v0", "pde.u_offset", "pde.v_offset", "pde.u_amp", "pde.v_amp"}},
    {"switching", {"delay.tau1_max", "delay.tau2_max", "delay.samples"}},
    {"stability-map", {"delay.tau1_max", "delay.tau2_max", "delay.samples", "map.nx", "map.ny", "map.spot_checks"}},
    {"double-hopf", {"delay.tau1_max", "delay.tau2_max", "delay.samples"}},
    {"normal-form",
     {"nf.file", "nf.B11", "nf.B21", "nf.B13", "nf.B23", "nf.B2100", "nf.B1011", "nf.B0021", "nf.B1110",
      "nf.window", "nf.tau_star", "nf.rho"}},
};

const std::set<std::string>& options_for(const std::string& task) {
  auto it = kTaskKeys.find(task == "dde" ? "pde" : task);
  if (it == kTaskKeys.end()) throw Error(ErrorCode::ConfigError, "unknown task '" + task + "'");
  return it->second;
}

bool needs_model(const std::string& task) { return task != "normal-form"; }
bool needs_diffusion(const std::string& task) {
  return task == "pde" || task == "dde" || task == "switching" || task == "stability-map" || task == "double-hopf";
}

void require(const Config& cfg, const std::string& key, const std::string& task) {
  if (!cfg.has(key)) throw Error(ErrorCode::ConfigError, "task '" + task + "' needs '" + key + "'");
}

std::vector<double> linspace(double lo, double hi, long n) {
  std::vector<double> x;
  for (long i = 0; i < n; ++i) x.push_back(n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1));
  return x;
}

json num_or_null(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

Equilibrium primary_or_throw(const ModelParams& q) {
  auto eq = primary_equilibrium(q);
  if (!eq) throw Error(ErrorCode::DomainError, "no interior equilibrium at these parameters");
  return *eq;
}

Stepper parse_stepper(const std::string& s) {
  if (s == "auto") return Stepper::Auto;
  if (s == "rk4") return Stepper::ExplicitRK4;
  if (s == "imex") return Stepper::SemiImplicit;
  throw Error(ErrorCode::ConfigError, "pde.stepper must be auto, rk4 or imex");
}

const char* stepper_name(Stepper s) {
  switch (s) {
    case Stepper::Auto: return "auto";
    case Stepper::ExplicitRK4: return "rk4";
    case Stepper::SemiImplicit: return "imex";
  }
  return "?";
}

// ---------------------------------------------------------------------------------------------

void task_equilibria(const Scenario& sc, TaskOutput& out) {
  const ModelParams q = model_params(sc.cfg);
  std::vector<Equilibrium> all = boundary_equilibria(q);
  const auto interior = interior_equilibria(q);
  all.insert(all.end(), interior.begin(), interior.end());
  Table t{{"kind", "u", "v", "trace", "det", "classification"}, {}};
  for (const auto& e : all)
    t.add({std::string(to_string(e.kind)), e.u(), e.v(), e.trace, e.det, std::string(to_string(e.classification))});
  out.artifacts.add_csv("equilibria.csv", t);
  out.values["interior_count"] = interior.size();
  out.values["regime"] = to_string(cooperation_regime(q));
  if (auto eq = primary_equilibrium(q)) {
    out.values["u_star"] = eq->u();
    out.values["v_star"] = eq->v();
    out.values["classification"] = to_string(eq->classification);
  }
  const auto th = thresholds(q);
  out.values["p_H"] = th.p_H;
  out.values["p_top"] = th.p_top;
  out.values["lyapunov_a"] = th.lyapunov_a;
  out.values["lyapunov_sign"] = th.lyapunov_a < 0 ? -1 : 1;
  if (th.p_SN) out.values["p_SN"] = *th.p_SN;
  out.artifacts.add_json("thresholds.json", {{"p_H", th.p_H},
                                             {"p_SN", num_or_null(th.p_SN)},
                                             {"p_top", th.p_top},
                                             {"lyapunov_a", th.lyapunov_a}});
}

void task_sweep(const Scenario& sc, TaskOutput& out) {
  const ModelParams q = model_params(sc.cfg);
  const double lo = sc.cfg.number("sweep.p_lo"), hi = sc.cfg.number("sweep.p_hi");
  const long steps = sc.cfg.integer_or("sweep.steps", 41);
  if (!(hi > lo) || steps < 2) throw Error(ErrorCode::ConfigError, "sweep needs p_lo < p_hi and steps >= 2");
  const HopfPoint hopf = hopf_point(q);
  std::vector<double> grid = linspace(lo, hi, steps);
  if (hopf.p > lo && hopf.p < hi) grid.push_back(hopf.p);
  std::sort(grid.begin(), grid.end());
  CycleOptions co;
  co.transient = sc.cfg.number_or("cycle.transient", co.transient);
  co.return_tol = sc.cfg.number_or("cycle.return_tol", co.return_tol);
  const auto rows = bifurcation_sweep(q, grid, co);

  Table t{{"p", "hopf", "u", "v", "trace", "det", "classification", "period", "v_min", "v_max", "error"}, {}};
  Series vs{"v*", {}, {}, "", false}, vmin{"cycle v min", {}, {}, "", true}, vmax{"cycle v max", {}, {}, "", true};
  for (const auto& r : rows) {
    const double nan = std::nan("");
    const auto& e = r.equilibrium;
    t.add({r.p, (long long)(r.p == hopf.p), e ? e->u() : nan, e ? e->v() : nan, e ? e->trace : nan,
           e ? e->det : nan, e ? std::string(to_string(e->classification)) : std::string("none"),
           r.cycle ? r.cycle->period : nan, r.cycle ? r.cycle->v_min : nan, r.cycle ? r.cycle->v_max : nan,
           r.error});
    vs.x.push_back(r.p);
    vs.y.push_back(e ? e->v() : nan);
    if (r.cycle) {
      vmin.x.push_back(r.p), vmin.y.push_back(r.cycle->v_min);
      vmax.x.push_back(r.p), vmax.y.push_back(r.cycle->v_max);
    }
  }
  out.artifacts.add_csv("sweep.csv", t);
  out.artifacts.add("sweep.svg", LinePlot{"predator level against p", "p", "v", {vs, vmin, vmax}, {}, {}, {}}.svg());
  const double a = first_lyapunov(q.with_p(hopf.p));
  out.values["p_H"] = hopf.p;
  out.values["omega_H"] = hopf.omega;
  out.values["lyapunov_a"] = a;
  out.values["lyapunov_sign"] = a < 0 ? -1 : 1;
  out.values["rows_with_cycle"] = std::count_if(rows.begin(), rows.end(), [](auto& r) { return bool(r.cycle); });
}

void task_phase(const Scenario& sc, TaskOutput& out) {
  const ModelParams q = model_params(sc.cfg);
  const long n = sc.cfg.integer_or("phase.grid", 10);
  const double du = sc.cfg.number_or("phase.u_step", 0.1), dv = sc.cfg.number_or("phase.v_step", 0.03);
  BasinOptions bo;
  bo.horizon = sc.cfg.number_or("basin.horizon", bo.horizon);
  const double orbit_time = sc.cfg.number_or("phase.orbit_time", 200.0);

  Table t{{"u0", "v0", "basin"}, {}};
  std::map<std::string, long> counts;
  for (Basin b : {Basin::ToE0, Basin::ToE1, Basin::ToEstar, Basin::ToCycle, Basin::Undecided}) counts[to_string(b)] = 0;
  std::map<Basin, Series> markers;
  const char* colors[] = {"#444444", "#1f77b4", "#2ca02c", "#d62728", "#ff7f0e"};
  std::vector<Series> orbits;
  for (long i = 1; i <= n; ++i)
    for (long j = 1; j <= n; ++j) {
      const State s0(du * i, dv * j);
      const Basin b = basin_classify(s0, q, bo);
      t.add({s0(0), s0(1), std::string(to_string(b))});
      ++counts[to_string(b)];
      auto& m = markers[b];
      if (m.label.empty()) m = Series{to_string(b), {}, {}, colors[int(b)], true};
      m.x.push_back(s0(0));
      m.y.push_back(s0(1));
      if (i % 3 == 1 && j % 3 == 1) {
        const Orbit o = integrate(s0, q, orbit_time, 1e-9);
        Series s{"", {}, {}, "#bbbbbb", false};
        for (const auto& st : o.states) s.x.push_back(st(0)), s.y.push_back(st(1));
        orbits.push_back(std::move(s));
      }
    }
  out.artifacts.add_csv("basins.csv", t);
  std::string inventory;
  for (const auto& [k, v] : counts) {
    out.values["count_" + k] = v;
    if (v > 0) inventory += (inventory.empty() ? "" : "+") + k;
  }
  out.values["inventory"] = inventory;

  const Nullclines nc(q);
  Series f{"prey nullcline", {}, {}, "#000000", false}, g{"predator nullcline", {}, {}, "#9467bd", false};
  for (double u : linspace(q.a, 1.0, 200)) f.x.push_back(u), f.y.push_back(nc.f(u));
  for (double u : linspace(1.0 / (q.p * (1 + q.c * dv * n)), std::min(1.0, 1.0 / q.p), 200))
    if (u < 1.0 / q.p) g.x.push_back(u), g.y.push_back(nc.g(u));
  std::vector<Series> all = orbits;
  all.push_back(f);
  all.push_back(g);
  for (auto& [b, m] : markers) all.push_back(m);
  LinePlot plot{"phase portrait", "u", "v", all, {}, std::make_pair(0.0, du * (n + 1)),
                std::make_pair(0.0, dv * (n + 1))};
  out.artifacts.add("phase.svg", plot.svg());
}

void task_heteroclinic(const Scenario& sc, TaskOutput& out) {
  const ModelParams q = model_params(sc.cfg);
  const double p = heteroclinic_threshold(q, sc.cfg.number_or("het.tol", 1e-8));
  out.values["p_hetero"] = p;
  if (sc.cfg.has("het.scan")) {
    const auto s = sc.cfg.numbers("het.scan");
    if (s.size() != 3) throw Error(ErrorCode::ConfigError, "het.scan = p_lo, p_hi, steps");
    Table t{{"p", "stable_height", "unstable_height", "gap"}, {}};
    for (double pp : linspace(s[0], s[1], long(s[2]))) {
      const double hs = stable_height(q.with_p(pp)), hu = unstable_height(q.with_p(pp));
      t.add({pp, hs, hu, hu - hs});
    }
    out.artifacts.add_csv("heteroclinic_scan.csv", t);
  }
  out.artifacts.add_json("heteroclinic.json", {{"p_hetero", p}});
}

void task_homoclinic(const Scenario& sc, TaskOutput& out) {
  const ModelParams q = model_params(sc.cfg);
  const double p = homoclinic_threshold(q, sc.cfg.number_or("hom.tol", 1e-7));
  out.values["p_hom"] = p;
  if (sc.cfg.has("hom.scan")) {
    const auto s = sc.cfg.numbers("hom.scan");
    if (s.size() != 3) throw Error(ErrorCode::ConfigError, "hom.scan = p_lo, p_hi, steps");
    Table t{{"p", "gap"}, {}};
    for (double pp : linspace(s[0], s[1], long(s[2]))) t.add({pp, homoclinic_gap(q.with_p(pp))});
    out.artifacts.add_csv("homoclinic_scan.csv", t);
  }
  out.artifacts.add_json("homoclinic.json", {{"p_hom", p}});
}

void task_turing(const Scenario& sc, TaskOutput& out) {
  const ModelParams q = model_params(sc.cfg);
  const double l = sc.cfg.number_or("l", 2.0);
  const Equilibrium eq = primary_or_throw(q);
  const auto curve = turing_curve(q, eq, sc.cfg.number("turing.d1_lo"), sc.cfg.number("turing.d1_hi"),
                                  int(sc.cfg.integer_or("turing.n_max", 64)),
                                  int(sc.cfg.integer_or("turing.samples", 400)), l);
  Table t{{"n", "d1", "d2"}, {}};
  std::vector<Series> series;
  std::set<int> modes;
  for (const auto& seg : curve.segments) {
    Series s{"", seg.d1, seg.d2, "", false};
    for (std::size_t i = 0; i < seg.d1.size(); ++i) t.add({(long long)seg.n, seg.d1[i], seg.d2[i]});
    modes.insert(seg.n);
    series.push_back(std::move(s));
  }
  out.artifacts.add_csv("turing_curve.csv", t);
  out.artifacts.add("turing_curve.svg", LinePlot{"Turing bifurcation curve", "d1", "d2", series, {}, {}, {}}.svg());
  json segs = json::array();
  for (const auto& seg : curve.segments) segs.push_back({{"n", seg.n}, {"d1_lo", seg.d1_lo}, {"d1_hi", seg.d1_hi}});
  out.artifacts.add_json("turing_segments.json", {{"segments", segs}, {"junctions", curve.junctions}, {"n_used", curve.n_used}});
  out.values["segments"] = curve.segments.size();
  out.values["mode_min"] = *modes.begin();
  out.values["mode_max"] = *modes.rbegin();
  out.values["n_used"] = curve.n_used;

  if (sc.cfg.has("turing.th_d1") || sc.cfg.has("turing.th_n")) {
    const auto th = turing_hopf_point(q, sc.cfg.number("turing.th_d1"), int(sc.cfg.integer("turing.th_n")), l);
    if (!th) throw Error(ErrorCode::DomainError, "no Turing-Hopf point for this mode");
    out.values["th_p"] = th->p;
    out.values["th_d2"] = th->d2;
    out.values["th_omega"] = th->omega;
    out.artifacts.add_json("turing_hopf.json", {{"p", th->p}, {"d2", th->d2}, {"omega", th->omega}, {"n", th->n}});
  }
  if (auto diff = diffusion_params(sc.cfg)) {
    const auto n = first_unstable_mode(q, *diff, eq);
    out.values["first_unstable_mode"] = n ? json(*n) : json(nullptr);
  }
}

void task_pde(const Scenario& sc, TaskOutput& out, bool delayed) {
  const ModelParams q = model_params(sc.cfg);
  const DiffusionParams diff = *diffusion_params(sc.cfg);
  const Equilibrium eq = primary_or_throw(q);
  const int N = int(sc.cfg.integer_or("pde.N", 200));
  const double t_end = sc.cfg.number("pde.t_end");
  const std::string init = sc.cfg.text_or("pde.init", "cosine");
  // Base state: absolute pde.u0/pde.v0 if given, else E* plus the offsets.
  const double u0 = sc.cfg.number_or("pde.u0", eq.u()) + sc.cfg.number_or("pde.u_offset", 0.0);
  const double v0 = sc.cfg.number_or("pde.v0", eq.v()) + sc.cfg.number_or("pde.v_offset", 0.0);
  Field f0;
  if (init == "constant") f0 = Field::constant(N, diff.l, State(u0, v0));
  else if (init == "cosine")
    f0 = Field::cosine(N, diff.l, u0, sc.cfg.number_or("pde.u_amp", 0.01), v0, sc.cfg.number_or("pde.v_amp", 0.0),
                       sc.cfg.number_or("pde.k", 1.0));
  else throw Error(ErrorCode::ConfigError, "pde.init must be constant or cosine");

  RdOptions o;
  o.dt = sc.cfg.number_or("pde.dt", 0.0);
  o.stepper = parse_stepper(sc.cfg.text_or("pde.stepper", "auto"));
  o.sample_every = sc.cfg.number_or("pde.sample_every", 0.5);
  o.record_from = sc.cfg.number_or("pde.record_from", 0.0);
  const Trajectory tr = delayed ? simulate_rd_delays(q, diff, *delay_params(sc.cfg), f0, t_end, o)
                                : simulate_rd(q, diff, f0, t_end, o);
  const auto dg = diagnose(tr, sc.cfg.number_or("pde.tail", 500.0));

  const Field& last = tr.frames.back();
  const Eigen::VectorXd x = last.grid();
  Table fin{{"x", "u", "v"}, {}};
  for (long i = 0; i < x.size(); ++i) fin.add({x(i), last.u(i), last.v(i)});
  out.artifacts.add_csv("final.csv", fin);
  Table ser{{"t", "u_mean", "v_mean", "u_min", "u_max", "u_left"}, {}};
  for (const auto& f : tr.frames)
    ser.add({f.time, f.u.mean(), f.v.mean(), f.u.minCoeff(), f.u.maxCoeff(), f.u(0)});
  out.artifacts.add_csv("series.csv", ser);

  // u(x, t) map, thinned to at most 400 columns and 200 rows.
  const long cols = std::min<long>(400, long(tr.frames.size()));
  const long rows = std::min<long>(200, long(x.size()));
  HeatMap hm{"u(x, t)", "t", "x", Eigen::MatrixXd(cols, rows), tr.frames.front().time, last.time, 0.0, diff.length(), false};
  for (long i = 0; i < cols; ++i) {
    const auto& f = tr.frames[std::size_t(i * (long(tr.frames.size()) - 1) / std::max(1L, cols - 1))];
    for (long j = 0; j < rows; ++j) hm.values(i, j) = f.u(j * (x.size() - 1) / std::max(1L, rows - 1));
  }
  out.artifacts.add("u_map.svg", hm.svg());
  Series su{"u", {x.data(), x.data() + x.size()}, {last.u.data(), last.u.data() + last.u.size()}, "", false};
  Series sv{"v", {x.data(), x.data() + x.size()}, {last.v.data(), last.v.data() + last.v.size()}, "", false};
  out.artifacts.add("final.svg", LinePlot{"final profile", "x", "density", {su, sv}, {}, {}, {}}.svg());

  const json diag = {{"kind", to_string(dg.kind)},
                     {"dominant_mode", dg.dominant_mode},
                     {"period", num_or_null(dg.period)},
                     {"time_variation", dg.time_variation},
                     {"spatial_range", dg.spatial_range},
                     {"dt", tr.dt},
                     {"stepper", stepper_name(tr.stepper)}};
  out.artifacts.add_json("diagnosis.json", diag);
  for (auto it = diag.begin(); it != diag.end(); ++it) out.values[it.key()] = it.value();
  out.values["distance_to_equilibrium"] =
      std::max((last.u.array() - eq.u()).abs().maxCoeff(), (last.v.array() - eq.v()).abs().maxCoeff());
}

DelayAnalysis delay_analysis(const Scenario& sc) {
  const ModelParams q = model_params(sc.cfg);
  const DiffusionParams diff = *diffusion_params(sc.cfg);
  return analyze_delays(q, diff, sc.cfg.number("delay.tau1_max"), sc.cfg.number("delay.tau2_max"),
                        int(sc.cfg.integer_or("delay.samples", 4000)));
}

std::string curve_name(const CurveId& id) {
  return "n" + std::to_string(id.n) + " j" + std::to_string(id.j) + " " + to_string(id.branch) + "(" +
         std::to_string(id.j1) + "," + std::to_string(id.j2) + ")";
}

std::vector<Series> curve_series(const DelayAnalysis& da) {
  std::vector<Series> s;
  const char* mode_colors[] = {"#000000", "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  for (const auto& c : da.curves) {
    Series x{"", {}, {}, mode_colors[c.id.n % 6], false};
    for (const auto& p : c.points) x.x.push_back(p.tau1), x.y.push_back(p.tau2);
    s.push_back(std::move(x));
  }
  return s;
}

void task_switching(const Scenario& sc, TaskOutput& out) {
  const DelayAnalysis da = delay_analysis(sc);
  json sets = json::array();
  for (const auto& cs : da.sets) {
    json iv = json::array();
    for (std::size_t i = 0; i < cs.intervals.size(); ++i) {
      iv.push_back({cs.intervals[i].first, cs.intervals[i].second});
      const std::string k = "omega_n" + std::to_string(cs.n) + "_" + std::to_string(i + 1);
      out.values[k + "_lo"] = cs.intervals[i].first;
      out.values[k + "_hi"] = cs.intervals[i].second;
    }
    out.values["intervals_n" + std::to_string(cs.n)] = cs.intervals.size();
    sets.push_back({{"n", cs.n}, {"intervals", iv}, {"open_at_zero", cs.open_at_zero}, {"omega_max", cs.omega_max}});
  }
  json reports = json::array();
  for (const auto& m : da.modes) reports.push_back({{"n", m.n}, {"ok", m.report.ok()}, {"summary", m.report.summary()}});
  out.artifacts.add_json("crossing_sets.json", {{"modes_analysed", da.modes.size()}, {"sets", sets}, {"preconditions", reports}});
  out.values["modes_analysed"] = da.modes.size();

  Table t{{"n", "j", "branch", "j1", "j2", "omega", "tau1", "tau2"}, {}};
  double worst = 0.0;
  std::size_t points = 0;
  for (const auto& c : da.curves)
    for (const auto& p : c.points) {
      t.add({(long long)c.id.n, (long long)c.id.j, std::string(to_string(c.id.branch)), (long long)c.id.j1,
             (long long)c.id.j2, p.omega, p.tau1, p.tau2});
      worst = std::max(worst, std::abs(da.modes[c.id.n].D(cplx(0, p.omega), p.tau1, p.tau2)));
      ++points;
    }
  out.artifacts.add_csv("curves.csv", t);
  out.artifacts.add("curves.svg", LinePlot{"stability switching curves", "tau1", "tau2", curve_series(da), {},
                                           std::make_pair(0.0, da.tau1_max), std::make_pair(0.0, da.tau2_max)}.svg());
  out.values["curves"] = da.curves.size();
  out.values["curve_points"] = points;
  out.values["max_residual"] = worst;
}

void task_stability_map(const Scenario& sc, TaskOutput& out, std::uint64_t seed) {
  const DelayAnalysis da = delay_analysis(sc);
  const int nx = int(sc.cfg.integer_or("map.nx", 100)), ny = int(sc.cfg.integer_or("map.ny", 100));
  const StabilityMap map = stability_map(da, nx, ny);
  Table t{{"i", "j", "tau1", "tau2", "count"}, {}};
  long stable = 0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const auto c = map.cell_center(i, j);
      t.add({(long long)i, (long long)j, c(0), c(1), (long long)map.counts(i, j)});
      stable += map.counts(i, j) == 0;
    }
  out.artifacts.add_csv("stability_map.csv", t);
  HeatMap hm{"unstable roots", "tau1", "tau2", map.counts.cast<double>(), 0, da.tau1_max, 0, da.tau2_max, true};
  out.artifacts.add("stability_map.svg", hm.svg());

  const int k = int(sc.cfg.integer_or("map.spot_checks", 5));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pi(0, nx - 1), pj(0, ny - 1);
  json spots = json::array();
  int agree = 0;
  for (int s = 0; s < k; ++s) {
    const int i = pi(rng), j = pj(rng);
    const auto c = map.cell_center(i, j);
    int ap = 0;
    for (const auto& m : da.modes) ap += argument_principle_count(m, c(0), c(1));
    agree += ap == map.counts(i, j);
    spots.push_back({{"i", i}, {"j", j}, {"path", map.counts(i, j)}, {"argument_principle", ap}});
  }
  out.artifacts.add_json("spot_checks.json", {{"seed", seed}, {"cells", spots}});
  out.values["count_origin"] = map.counts(0, 0);
  out.values["stable_cells"] = stable;
  out.values["max_count"] = map.counts.maxCoeff();
  out.values["reroutes"] = map.reroutes;
  out.values["spot_checks"] = k;
  out.values["spot_agree"] = agree;
}

void task_double_hopf(const Scenario& sc, TaskOutput& out) {
  const DelayAnalysis da = delay_analysis(sc);
  const auto pts = double_hopf_points(da);
  json list = json::array();
  for (const auto& p : pts)
    list.push_back({{"tau1", p.tau1}, {"tau2", p.tau2}, {"omega1", p.omega1}, {"omega2", p.omega2},
                    {"n1", p.n1}, {"n2", p.n2}, {"curve1", curve_name(p.curve1)}, {"curve2", curve_name(p.curve2)}});
  out.artifacts.add_json("double_hopf.json", {{"points", list}});
  out.values["hh_count"] = pts.size();
  if (!pts.empty()) {
    out.values["hh_tau1"] = pts[0].tau1;
    out.values["hh_tau2"] = pts[0].tau2;
    out.values["hh_omega1"] = pts[0].omega1;
    out.values["hh_omega2"] = pts[0].omega2;
    out.values["hh_n1"] = pts[0].n1;
    out.values["hh_n2"] = pts[0].n2;
  }
  auto series = curve_series(da);
  Series hh{"double Hopf", {}, {}, "#d62728", true};
  for (const auto& p : pts) hh.x.push_back(p.tau1), hh.y.push_back(p.tau2);
  series.push_back(hh);
  out.artifacts.add("double_hopf.svg", LinePlot{"double Hopf points", "tau1", "tau2", series, {},
                                                std::make_pair(0.0, da.tau1_max), std::make_pair(0.0, da.tau2_max)}.svg());
}

NormalFormCoeffs coeffs_from(const Scenario& sc) {
  if (sc.cfg.has("nf.file")) {
    const fs::path p = fs::path(sc.source_dir) / sc.cfg.text("nf.file");
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return NormalFormCoeffs::from_json(ss.str());
  }
  json doc;
  for (const char* k : {"B11", "B21", "B13", "B23", "B2100", "B1011", "B0021", "B1110"})
    doc[k] = sc.cfg.number(std::string("nf.") + k);
  return NormalFormCoeffs::from_json(doc.dump());
}

void task_normal_form(const Scenario& sc, TaskOutput& out) {
  const NormalFormCoeffs nf = coeffs_from(sc);
  const auto up = unfolding_from_coeffs(nf, 0, 0);
  const Eigen::Matrix2d A = unfolding_matrix(nf);
  Window w;
  if (sc.cfg.has("nf.window")) {
    const auto v = sc.cfg.numbers("nf.window");
    if (v.size() != 4) throw Error(ErrorCode::ConfigError, "nf.window = s1_lo, s1_hi, s2_lo, s2_hi");
    w = {v[0], v[1], v[2], v[3]};
  }
  const auto bs = bifurcation_set(nf, w);
  out.values["eps1"] = up.eps1;
  out.values["eps2"] = up.eps2;
  out.values["b"] = up.b;
  out.values["c"] = up.c;
  out.values["d"] = up.d;
  out.values["d_minus_bc"] = up.d - up.b * up.c;
  out.values["regions"] = bs.regions.size();
  out.artifacts.add_json("unfolding.json", {{"eps1", up.eps1}, {"eps2", up.eps2}, {"b", up.b}, {"c", up.c},
                                            {"d", up.d}, {"d_minus_bc", up.d - up.b * up.c},
                                            {"nu_of_sigma", {{A(0, 0), A(0, 1)}, {A(1, 0), A(1, 1)}}}});

  std::optional<Eigen::Vector2d> tau_star;
  if (sc.cfg.has("nf.tau_star")) {
    const auto v = sc.cfg.numbers("nf.tau_star");
    if (v.size() != 2) throw Error(ErrorCode::ConfigError, "nf.tau_star = tau1, tau2");
    tau_star = Eigen::Vector2d(v[0], v[1]);
  }
  const double rho = sc.cfg.number_or("nf.rho", 0.05);

  json regions = json::array();
  Table fps{{"region", "kind", "r1", "r2", "stability", "stability_as_written", "residual"}, {}};
  std::vector<Polygon> polys;
  for (const auto& r : bs.regions) {
    json poly = json::array(), portrait = json::array();
    for (const auto& v : r.polygon) poly.push_back({v(0), v(1)});
    for (const auto& [k, s] : r.portrait) portrait.push_back({{"kind", to_string(k)}, {"stability", to_string(s)}});
    json entry = {{"name", r.name}, {"inventory", r.inventory()}, {"angle_lo", r.angle_lo}, {"angle_hi", r.angle_hi},
                  {"sample", {r.sample(0), r.sample(1)}}, {"portrait", portrait}, {"polygon", poly}};
    if (tau_star) {
      const Eigen::Vector2d t = *tau_star + rho * r.sample;
      entry["sample_delays"] = {t(0), t(1)};
    }
    regions.push_back(entry);
    out.values["inventory_" + r.name] = r.inventory();
    const auto u = unfolding_from_coeffs(nf, r.sample(0), r.sample(1));
    for (const auto& fp : amplitude_fixed_points(u))
      fps.add({r.name, std::string(to_string(fp.kind)), fp.r1, fp.r2, std::string(to_string(fp.stability)),
               std::string(to_string(fp.stability_as_written)), fp.residual});
    polys.push_back({r.name + ": " + r.inventory(), r.polygon, ""});
  }
  out.artifacts.add_json("regions.json", {{"window", {w.s1_lo, w.s1_hi, w.s2_lo, w.s2_hi}}, {"regions", regions}});
  out.artifacts.add_csv("fixed_points.csv", fps);
  out.artifacts.add("regions.svg", LinePlot{"bifurcation set", "sigma1", "sigma2", {}, polys,
                                            std::make_pair(w.s1_lo, w.s1_hi), std::make_pair(w.s2_lo, w.s2_hi)}.svg());
}

int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::InvalidParams ? 2 : 1;
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {"equilibria", "sweep", "phase", "heteroclinic",
                                                 "homoclinic", "turing", "pde", "switching",
                                                 "stability-map", "double-hopf", "normal-form", "dde"};
  return names;
}

Scenario Scenario::parse(const std::string& text, const std::string& fallback_name, const std::string& source_dir) {
  Scenario sc;
  sc.cfg = Config::parse(text);
  sc.name = sc.cfg.text_or("name", fallback_name);
  sc.task = sc.cfg.text("task");
  sc.source_dir = source_dir;
  validate(sc);
  return sc;
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path p(path);
  return parse(ss.str(), p.stem().string(), p.parent_path().empty() ? "." : p.parent_path().string());
}

void validate(const Scenario& sc) {
  const auto& opts = options_for(sc.task);
  for (const auto& k : sc.cfg.keys_with_prefix("")) {
    if (kCommonKeys.count(k) || opts.count(k)) continue;
    if (k.rfind("expect.", 0) == 0 && k.size() > 7) continue;
    if (k.rfind("tol.", 0) == 0) {
      if (!sc.cfg.has("expect." + k.substr(4)))
        throw Error(ErrorCode::ConfigError, "'" + k + "' has no matching expect key");
      sc.cfg.number(k);
      continue;
    }
    throw Error(ErrorCode::ConfigError, "unknown key '" + k + "' for task '" + sc.task + "'");
  }
  if (sc.name.empty() || sc.name.find_first_of("/\\ ") != std::string::npos)
    throw Error(ErrorCode::ConfigError, "scenario name must be a single path component");
  if (needs_model(sc.task)) model_params(sc.cfg);
  if (needs_diffusion(sc.task)) {
    require(sc.cfg, "d1", sc.task);
    require(sc.cfg, "d2", sc.task);
    diffusion_params(sc.cfg);
  }
  const auto& t = sc.task;
  if (t == "dde") {
    require(sc.cfg, "tau1", sc.task);
    require(sc.cfg, "tau2", sc.task);
    delay_params(sc.cfg);
  }
  if (t == "pde" || t == "dde") require(sc.cfg, "pde.t_end", t);
  if (t == "sweep") require(sc.cfg, "sweep.p_lo", t), require(sc.cfg, "sweep.p_hi", t);
  if (t == "turing") require(sc.cfg, "turing.d1_lo", t), require(sc.cfg, "turing.d1_hi", t);
  if (t == "switching" || t == "stability-map" || t == "double-hopf")
    require(sc.cfg, "delay.tau1_max", t), require(sc.cfg, "delay.tau2_max", t);
  if (t == "normal-form" && !sc.cfg.has("nf.file"))
    for (const char* k : {"B11", "B21", "B13", "B23", "B2100", "B1011", "B0021", "B1110"})
      require(sc.cfg, std::string("nf.") + k, t);
  // Numeric options must parse.
  for (const auto& k : opts)
    if (sc.cfg.has(k) && k != "pde.stepper" && k != "pde.init" && k != "nf.file" && k != "het.scan" &&
        k != "hom.scan" && k != "nf.window" && k != "nf.tau_star")
      sc.cfg.number(k);
}

TaskOutput run_task(const Scenario& sc, std::uint64_t seed) {
  validate(sc);
  TaskOutput out;
  const auto& t = sc.task;
  if (t == "equilibria") task_equilibria(sc, out);
  else if (t == "sweep") task_sweep(sc, out);
  else if (t == "phase") task_phase(sc, out);
  else if (t == "heteroclinic") task_heteroclinic(sc, out);
  else if (t == "homoclinic") task_homoclinic(sc, out);
  else if (t == "turing") task_turing(sc, out);
  else if (t == "pde") task_pde(sc, out, false);
  else if (t == "dde") task_pde(sc, out, true);
  else if (t == "switching") task_switching(sc, out);
  else if (t == "stability-map") task_stability_map(sc, out, seed);
  else if (t == "double-hopf") task_double_hopf(sc, out);
  else if (t == "normal-form") task_normal_form(sc, out);
  out.artifacts.add("scenario.conf", sc.cfg.serialize());
  out.artifacts.add_json("values.json", out.values);
  return out;
}

std::vector<Check> check_expectations(const Scenario& sc, const json& values) {
  std::vector<Check> checks;
  for (const auto& key : sc.cfg.keys_with_prefix("expect.")) {
    Check c;
    c.key = key.substr(7);
    const std::string& raw = sc.cfg.text(key);
    c.tol = sc.cfg.number_or("tol." + c.key, 0.0);
    char* end = nullptr;
    const double x = std::strtod(raw.c_str(), &end);
    const bool numeric = end && *end == '\0' && end != raw.c_str();
    c.expected = numeric ? json(x) : json(raw);
    c.actual = values.contains(c.key) ? values.at(c.key) : json(nullptr);
    if (numeric && c.actual.is_number())
      c.pass = std::abs(c.actual.get<double>() - x) <= c.tol;
    else if (!numeric && c.actual.is_string())
      c.pass = c.actual.get<std::string>() == raw;
    checks.push_back(std::move(c));
  }
  return checks;
}

json RunReport::to_json() const {
  json cs = json::array();
  for (const auto& c : checks)
    cs.push_back({{"key", c.key}, {"expected", c.expected}, {"actual", c.actual}, {"tol", c.tol}, {"pass", c.pass}});
  json j = {{"name", name}, {"exit_code", exit_code}, {"checks", cs}, {"seconds", seconds}};
  if (!error.empty()) j["error"] = error;
  return j;
}

RunReport run_scenario_file(const std::string& path, const std::string& out_dir, std::uint64_t seed) {
  RunReport rep;
  rep.name = fs::path(path).stem().string();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Scenario sc = Scenario::load(path);
    rep.name = sc.name;
    TaskOutput out = run_task(sc, seed);
    rep.checks = check_expectations(sc, out.values);
    json cs = json::array();
    for (const auto& c : rep.checks)
      cs.push_back({{"key", c.key}, {"expected", c.expected}, {"actual", c.actual}, {"tol", c.tol}, {"pass", c.pass}});
    if (!rep.checks.empty()) out.artifacts.add_json("checks.json", {{"checks", cs}});
    out.artifacts.commit(out_dir);
    rep.exit_code = std::all_of(rep.checks.begin(), rep.checks.end(), [](const Check& c) { return c.pass; }) ? 0 : 1;
  } catch (const Error& e) {
    rep.exit_code = exit_code_for(e);
    rep.error = e.what();
  } catch (const nlohmann::json::exception& e) {
    rep.exit_code = 2;
    rep.error = e.what();
  } catch (const std::exception& e) {
    rep.exit_code = 1;
    rep.error = e.what();
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::vector<RunReport> reproduce_all(const std::string& dir, const std::string& out_dir, const std::string& filter,
                                     int workers, std::uint64_t seed) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::ConfigError, "no scenario directory " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".conf") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (!filter.empty()) {
    std::vector<fs::path> keep;
    for (const auto& f : files) {
      std::string name = f.stem().string();
      try {
        name = Scenario::load(f.string()).name;
      } catch (const Error&) {
      }
      if (name == filter || f.stem() == filter) keep.push_back(f);
    }
    if (keep.empty()) throw Error(ErrorCode::ConfigError, "no scenario named '" + filter + "'");
    files = keep;
  }

  std::vector<RunReport> reports(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      std::string name = files[i].stem().string();
      try {
        name = Scenario::load(files[i].string()).name;
      } catch (const Error&) {
      }
      reports[i] = run_scenario_file(files[i].string(), (fs::path(out_dir) / name).string(), seed);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::max(1, workers); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return reports;
}

std::string summary_table(const std::vector<RunReport>& reports) {
  std::ostringstream s;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-6s %9s  %s\n", "scenario", "status", "seconds", "detail");
  s << line;
  for (const auto& r : reports) {
    std::string detail = r.error;
    if (detail.empty()) {
      int failed = 0;
      for (const auto& c : r.checks)
        if (!c.pass) {
          ++failed;
          if (!detail.empty()) detail += "; ";
          detail += c.key + ": got " + c.actual.dump() + ", expected " + c.expected.dump();
        }
      if (!failed) detail = std::to_string(r.checks.size()) + " checks";
    }
    std::snprintf(line, sizeof line, "%-28s %-6s %9.2f  ", r.name.c_str(), r.exit_code == 0 ? "PASS" : "FAIL",
                  r.seconds);
    s << line << detail << "\n";
  }
  return s.str();
}

}  // namespace coopallee
