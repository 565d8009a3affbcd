#include "coopallee/phase.hpp"

#include "coopallee/error.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include <cmath>

namespace coopallee {

namespace {

PlanarField field(const ModelParams& q) {
  return [q](const State& s) { return rhs(s, q); };
}

bool in_box(const State& s) { return s(0) >= -0.1 && s(0) <= 2.0 && s(1) >= -0.1 && s(1) <= 10.0; }

double bisect_on(const std::function<double(double)>& h, double lo, double hi, double width) {
  auto tol = [width](double x, double y) { return std::abs(x - y) <= width; };
  auto r = boost::math::tools::bisect(h, lo, hi, tol);
  return 0.5 * (r.first + r.second);
}

const Equilibrium& find_kind(const std::vector<Equilibrium>& eqs, EquilibriumKind kind) {
  for (const auto& e : eqs)
    if (e.kind == kind) return e;
  throw Error(ErrorCode::NotApplicable, std::string("no equilibrium of kind ") + to_string(kind));
}

}  // namespace

const char* to_string(Basin b) {
  switch (b) {
    case Basin::ToE0: return "ToE0";
    case Basin::ToE1: return "ToE1";
    case Basin::ToEstar: return "ToEstar";
    case Basin::ToCycle: return "ToCycle";
    case Basin::Undecided: return "Undecided";
  }
  return "Unknown";
}

State saddle_eigenvector(const Equilibrium& saddle, ManifoldStability stability, const ModelParams& q) {
  const Mat2<double> J = jacobian(saddle.point, q);
  Eigen::EigenSolver<Mat2<double>> es(J);
  const auto lam = es.eigenvalues();
  if (std::abs(lam(0).imag()) > 0.0 || lam(0).real() * lam(1).real() >= 0.0)
    throw Error(ErrorCode::NotApplicable, "equilibrium is not a saddle");
  const int want = (stability == ManifoldStability::Unstable) == (lam(0).real() > 0.0) ? 0 : 1;
  State w = es.eigenvectors().col(want).real().normalized();
  if (w(1) < -1e-14 || (std::abs(w(1)) <= 1e-14 && w(0) < 0.0)) w = -w;
  return w;
}

ManifoldBranch saddle_manifold(const Equilibrium& saddle, ManifoldStability stability, Side side,
                               const ModelParams& q, const ManifoldOptions& opt) {
  ManifoldBranch b;
  b.saddle = saddle;
  b.stability = stability;
  const State w = saddle_eigenvector(saddle, stability, q);
  const double eps = opt.seed * std::max(1.0, saddle.point.norm());
  b.seed_offset = (side == Side::PlusEig ? eps : -eps) * w;

  SolveOptions so;
  so.t_end = opt.t_budget;
  so.tol = opt.tol;
  so.direction = stability == ManifoldStability::Unstable ? Direction::Forward : Direction::Backward;
  std::vector<Event> events;
  int nullcline_event = -1, section_event = -1;
  if (opt.stop_at_nullcline) {
    nullcline_event = static_cast<int>(events.size());
    events.push_back({[q](const State& s) { return q.p * s(0) * (1.0 + q.c * s(1)) - 1.0; }, 0});
  }
  if (opt.section_u) {
    section_event = static_cast<int>(events.size());
    const double us = *opt.section_u;
    events.push_back({[us](const State& s) { return s(0) - us; }, 0});
  }
  so.on_event = [&](const EventHit& hit) {
    if (hit.index == section_event) return hit.state(1) > opt.section_vmin;
    return true;
  };
  so.stop = [](double, const State& s) { return !in_box(s); };

  const SolveResult res = solve(field(q), saddle.point + b.seed_offset, so, events);
  b.polyline = res.orbit.states;
  if (res.stopped_at) {
    if (res.stopped_at->index == nullcline_event) {
      b.stop = ManifoldStop::Nullcline;
      b.crossing_height = res.stopped_at->state(1);
    } else {
      b.stop = ManifoldStop::Section;
      b.crossing_height = res.stopped_at->state(1);
    }
  } else if (!res.reached_end) {
    b.stop = ManifoldStop::LeftBox;
  } else {
    b.stop = ManifoldStop::Budget;
    if (opt.budget_is_error) throw Error(ErrorCode::NoEvent, "manifold branch met no event within the time budget");
  }
  return b;
}

double stable_height(const ModelParams& q, const ManifoldOptions& opt) {
  const auto eqs = boundary_equilibria(q);
  const auto& ea = find_kind(eqs, EquilibriumKind::Allee);
  const auto b = saddle_manifold(ea, ManifoldStability::Stable, Side::PlusEig, q, opt);
  if (!b.crossing_height) throw Error(ErrorCode::NoEvent, "stable manifold of E_a does not meet g");
  return *b.crossing_height;
}

double unstable_height(const ModelParams& q, const ManifoldOptions& opt) {
  const auto eqs = boundary_equilibria(q);
  const auto& e1 = find_kind(eqs, EquilibriumKind::CarryingCapacity);
  const auto b = saddle_manifold(e1, ManifoldStability::Unstable, Side::PlusEig, q, opt);
  if (!b.crossing_height) throw Error(ErrorCode::NoEvent, "unstable manifold of E_1 does not meet g");
  return *b.crossing_height;
}

double heteroclinic_threshold(const ModelParams& family, double tol) {
  family.validate();
  auto h = [&](double p) {
    const ModelParams q = family.with_p(p);
    return stable_height(q) - unstable_height(q);
  };
  // Samples cluster near p = 1 where the threshold sits for strong cooperation.
  // Below p = 1.01 the unstable eigenvalue m(p-1) of E_1 is too slow for the budget.
  const double lo = 0.01, hi = 1.0 / family.a - 1.0 - 1e-3;
  constexpr int kSamples = 80;
  double prev_p = NAN, prev_h = NAN;
  for (int i = 0; i <= kSamples; ++i) {
    const double p = 1.0 + lo * std::pow(hi / lo, static_cast<double>(i) / kSamples);
    double hv = NAN;
    try {
      hv = h(p);
    } catch (const Error&) {
      hv = NAN;
    }
    if (std::isfinite(prev_h) && std::isfinite(hv) && prev_h > 0.0 && hv <= 0.0)
      return bisect_on(h, prev_p, p, tol);
    if (i == 0 && std::isfinite(hv) && hv < 0.0)
      throw Error(ErrorCode::NoSignChange, "unstable manifold of E_1 starts above the stable manifold of E_a");
    prev_p = p;
    prev_h = hv;
  }
  throw Error(ErrorCode::NoSignChange, "S(p) - U(p) does not change sign on (1, 1/a)");
}

double homoclinic_gap(const ModelParams& q) {
  const auto eqs = interior_equilibria(q);
  if (eqs.size() != 2) throw Error(ErrorCode::NotApplicable, "homoclinic gap needs two interior equilibria");
  const auto& estar = find_kind(eqs, EquilibriumKind::InteriorPrimary);
  const auto& saddle = find_kind(eqs, EquilibriumKind::InteriorSaddle);

  ManifoldOptions opt;
  opt.stop_at_nullcline = false;
  opt.section_u = estar.u();
  opt.section_vmin = estar.v();
  const auto up = saddle_manifold(saddle, ManifoldStability::Unstable, Side::PlusEig, q, opt);
  // The left stable branch: the side whose eigenvector points to smaller u.
  const State ws = saddle_eigenvector(saddle, ManifoldStability::Stable, q);
  const Side left = ws(0) < 0.0 ? Side::PlusEig : Side::MinusEig;
  const auto st = saddle_manifold(saddle, ManifoldStability::Stable, left, q, opt);
  if (up.stop != ManifoldStop::Section || st.stop != ManifoldStop::Section)
    throw Error(ErrorCode::NoEvent, "a branch of E_R* left the box before the section");
  return *up.crossing_height - *st.crossing_height;
}

double homoclinic_threshold(const ModelParams& family, double tol) {
  family.validate();
  if (cooperation_regime(family) != Regime::Strong)
    throw Error(ErrorCode::NotApplicable, "homoclinic cycle needs strong cooperation");
  const double lo = saddle_node_point(family) + 1e-4, hi = 1.0 - 1e-4;
  auto gap = [&](double p) { return homoclinic_gap(family.with_p(p)); };
  constexpr int kSamples = 40;
  double prev_p = NAN, prev_g = NAN;
  for (int i = 0; i <= kSamples; ++i) {
    const double p = lo + (hi - lo) * i / kSamples;
    double g = NAN;
    try {
      g = gap(p);
    } catch (const Error&) {
      g = NAN;
    }
    if (std::isfinite(prev_g) && std::isfinite(g) && prev_g < 0.0 && g >= 0.0)
      return bisect_on(gap, prev_p, p, tol);
    prev_p = p;
    prev_g = g;
  }
  throw Error(ErrorCode::NoSignChange, "homoclinic gap does not change sign on (p_SN, 1)");
}

std::optional<LimitCycle> limit_cycle(const ModelParams& q, const State& init, const CycleOptions& opt) {
  const auto estar = primary_equilibrium(q);
  if (!estar) return std::nullopt;
  const PlanarField f = field(q);

  State x = init;
  if (opt.transient > 0.0) {
    SolveOptions so;
    so.t_end = opt.transient;
    so.tol = opt.tol;
    so.record = false;
    so.stop = [](double, const State& s) { return !in_box(s); };
    const auto res = solve(f, x, so);
    x = res.final_state;
    if (!res.reached_end) return std::nullopt;
  }
  auto near_equilibrium = [&](const State& s) {
    std::vector<Equilibrium> eqs = boundary_equilibria(q);
    for (const auto& e : interior_equilibria(q)) eqs.push_back(e);
    for (const auto& e : eqs)
      if ((s - e.point).norm() < 1e-6) return true;
    return false;
  };
  if (near_equilibrium(x)) return std::nullopt;

  // Upward crossings (u increasing) of the section u = u*.
  std::vector<double> times, heights;
  State last = x;
  std::optional<LimitCycle> found;
  bool converged_to_point = false;
  SolveOptions so;
  so.t_end = opt.budget;
  so.tol = opt.tol;
  so.record = false;
  so.stop = [](double, const State& s) { return !in_box(s); };
  so.on_event = [&](const EventHit& hit) {
    times.push_back(hit.t);
    heights.push_back(hit.state(1));
    last = hit.state;
    const std::size_t k = heights.size();
    if (static_cast<long>(k) >= opt.max_crossings) return true;
    if (k < 3) return false;
    const double d1 = heights[k - 1] - heights[k - 2];
    const double d0 = heights[k - 2] - heights[k - 3];
    if (std::abs(d1) >= opt.return_tol) return false;
    // Aitken limit of the return sequence separates a focus from a cycle.
    double limit = heights[k - 1];
    if (std::abs(d1 - d0) > 0.0) limit -= d1 * d1 / (d1 - d0);
    if (std::abs(limit - estar->v()) < 1e-5) {
      converged_to_point = true;
      return true;
    }
    LimitCycle c;
    c.period = times[k - 1] - times[k - 2];
    c.section_point = hit.state;
    c.return_residual = std::abs(d1);
    found = c;
    return true;
  };
  const std::vector<Event> section = {{[u = estar->u()](const State& s) { return s(0) - u; }, +1}};
  const auto res = solve(f, x, so, section);
  if (converged_to_point) return std::nullopt;
  if (!found) {
    if (!res.reached_end && !res.stopped_at) return std::nullopt;  // escaped the box
    if (heights.size() < 3 || near_equilibrium(res.final_state)) return std::nullopt;
    throw Error(ErrorCode::Inconclusive, "return map did not settle within the crossing budget");
  }

  // v-extrema over one period: zeros of dv/dt.
  double vmin = found->section_point(1), vmax = vmin;
  SolveOptions po;
  po.t_end = found->period;
  po.tol = opt.tol;
  po.record = false;
  po.on_event = [&](const EventHit& hit) {
    vmin = std::min(vmin, hit.state(1));
    vmax = std::max(vmax, hit.state(1));
    return false;
  };
  const std::vector<Event> extrema = {{[q](const State& s) { return rhs(s, q)(1); }, 0}};
  const auto pr = solve(f, found->section_point, po, extrema);
  found->return_residual = std::max(found->return_residual, (pr.final_state - found->section_point).norm());
  found->v_min = vmin;
  found->v_max = vmax;
  return found;
}

Basin basin_classify(const State& init, const ModelParams& q, const BasinOptions& opt) {
  SolveOptions so;
  so.t_end = opt.horizon;
  so.tol = opt.tol;
  so.record = false;
  so.stop = [](double, const State& s) { return !in_box(s); };
  SolveResult res;
  try {
    res = solve(field(q), init, so);
  } catch (const Error&) {
    return Basin::Undecided;
  }
  if (!res.reached_end) return Basin::Undecided;
  const State x = res.final_state;
  if (x.norm() < opt.proximity) return Basin::ToE0;
  if ((x - State(1.0, 0.0)).norm() < opt.proximity) return Basin::ToE1;
  const auto estar = primary_equilibrium(q);
  if (estar && (x - estar->point).norm() < opt.proximity) return Basin::ToEstar;
  try {
    CycleOptions co;
    co.transient = 0.0;
    co.max_crossings = 2000;
    co.budget = 5e4;
    if (limit_cycle(q, x, co)) return Basin::ToCycle;
  } catch (const Error&) {
  }
  return Basin::Undecided;
}

std::vector<SweepRow> bifurcation_sweep(const ModelParams& family, const std::vector<double>& p_grid,
                                        const CycleOptions& opt) {
  std::vector<SweepRow> rows;
  std::optional<double> p_H;
  try {
    p_H = hopf_point(family).p;
  } catch (const Error&) {
  }
  for (double p : p_grid) {
    SweepRow row;
    row.p = p;
    const ModelParams q = family.with_p(p);
    try {
      row.equilibrium = primary_equilibrium(q);
      if (row.equilibrium && p_H && p > *p_H) {
        const State init = row.equilibrium->point + State(1e-3, 0.0);
        row.cycle = limit_cycle(q, init, opt);
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace coopallee
