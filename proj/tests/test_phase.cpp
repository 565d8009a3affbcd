#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "coopallee/error.hpp"
#include "coopallee/phase.hpp"

#include <cmath>

using namespace coopallee;

namespace {

ModelParams base(double c, double p = 1.4) {
  ModelParams q;
  q.c = c;
  q.p = p;
  return q;
}

const Equilibrium& boundary(const ModelParams& q, EquilibriumKind kind, std::vector<Equilibrium>& store) {
  store = boundary_equilibria(q);
  for (const auto& e : store)
    if (e.kind == kind) return e;
  throw std::logic_error("missing equilibrium");
}

}  // namespace

TEST_CASE("equilibrium is invariant under integration") {
  const ModelParams q = base(0.25, 1.4);
  const auto e = primary_equilibrium(q);
  const Orbit o = integrate(e->point, q, 100.0, 1e-10);
  for (const State& s : o.states) CHECK((s - e->point).norm() < 1e-8);
  CHECK(o.times.back() == doctest::Approx(100.0));
}

TEST_CASE("orbit times are monotone in both directions") {
  const ModelParams q = base(0.25, 1.4);
  const Orbit f = integrate(State(0.5, 0.1), q, 20.0, 1e-9);
  for (std::size_t i = 1; i < f.times.size(); ++i) CHECK(f.times[i] > f.times[i - 1]);
  const Orbit b = integrate(State(0.5, 0.1), q, 5.0, 1e-9, Direction::Backward);
  for (std::size_t i = 1; i < b.times.size(); ++i) CHECK(b.times[i] < b.times[i - 1]);
  // Backward then forward returns to the start.
  const Orbit back = integrate(b.states.back(), q, 5.0, 1e-11);
  CHECK((back.states.back() - State(0.5, 0.1)).norm() < 1e-7);
  CHECK_THROWS_AS(integrate(State(0.5, 0.1), q, 1.0, 1e-2), Error);
}

TEST_CASE("global attraction examples") {
  const Orbit o = integrate(State(0.5, 0.4), base(0.25, 3.2), 2000.0, 1e-9);
  CHECK(o.states.back().norm() < 1e-4);

  const ModelParams q = base(0.25, 1.2);
  const auto ms = saddle_manifold(boundary_equilibria(q)[1], ManifoldStability::Stable, Side::PlusEig, q);
  // A point slightly below the stable manifold of E_a.
  const State below = ms.polyline[ms.polyline.size() / 2] - State(0.0, 0.01);
  const Orbit o2 = integrate(below, q, 3000.0, 1e-9);
  CHECK((o2.states.back() - primary_equilibrium(q)->point).norm() < 1e-4);
  CHECK(basin_classify(below + State(0.0, 0.02), q) == Basin::ToE0);
}

TEST_CASE("fixed-step integrator converges at fifth order") {
  const ModelParams q = base(0.25, 1.4);
  const State x0(0.5, 0.2);
  const State ref = integrate_fixed_step(x0, q, 10.0, 1.0 / 1024);
  const double e1 = (integrate_fixed_step(x0, q, 10.0, 0.2) - ref).norm();
  const double e2 = (integrate_fixed_step(x0, q, 10.0, 0.1) - ref).norm();
  const double order = std::log2(e1 / e2);
  CHECK(order > 4.5);
  CHECK(order < 5.6);
}

TEST_CASE("adaptive error shrinks with tolerance") {
  const ModelParams q = base(0.25, 1.4);
  const State x0(0.5, 0.2);
  const State ref = integrate(x0, q, 50.0, 1e-12).states.back();
  double prev = INFINITY;
  for (double tol : {1e-6, 5e-7, 2.5e-7, 1.25e-7}) {
    const double err = (integrate(x0, q, 50.0, tol).states.back() - ref).norm();
    CHECK(err < prev);
    // Error per unit step with local extrapolation scales roughly linearly in tol.
    if (std::isfinite(prev)) {
      CHECK(prev / err > 1.3);
      CHECK(prev / err < 3.5);
    }
    prev = err;
  }
}

TEST_CASE("stable manifold of E_a leaves along the predicted slope") {
  const ModelParams q = base(0.25, 1.4);
  std::vector<Equilibrium> eqs;
  const auto& ea = boundary(q, EquilibriumKind::Allee, eqs);
  const auto b = saddle_manifold(ea, ManifoldStability::Stable, Side::PlusEig, q);
  CHECK((b.polyline.front() - ea.point).norm() < 1e-5);
  const State d = b.polyline[1] - ea.point;
  const double k1 = q.r * (1 - q.a) - q.m * (q.p * q.a - 1) / q.a;
  CHECK(d(1) / d(0) == doctest::Approx(k1).epsilon(1e-3));
  REQUIRE(b.crossing_height);
  CHECK(b.stop == ManifoldStop::Nullcline);

  // Above the prey nullcline until it meets g.
  const Nullclines nc(q);
  for (const State& s : b.polyline)
    if (s(0) >= q.a + 1e-4 && s(0) <= 1.0) CHECK(s(1) >= nc.f(s(0)) - 1e-9);
}

TEST_CASE("unstable manifold of E_a stays on the u-axis") {
  const ModelParams q = base(0.25, 0.9);
  std::vector<Equilibrium> eqs;
  const auto& ea = boundary(q, EquilibriumKind::Allee, eqs);
  ManifoldOptions opt;
  opt.stop_at_nullcline = false;
  opt.budget_is_error = false;
  opt.t_budget = 200.0;
  const auto b = saddle_manifold(ea, ManifoldStability::Unstable, Side::PlusEig, q, opt);
  for (const State& s : b.polyline) CHECK(std::abs(s(1)) < 1e-9);
  CHECK(b.polyline.back()(0) > 0.99);
}

TEST_CASE("manifold heights are monotone and above v*") {
  const ModelParams family = base(0.25);
  double prev_s = INFINITY, prev_u = -INFINITY, prev_h = INFINITY;
  for (double p = 1.05; p < 4.3; p += 0.25) {
    const ModelParams q = family.with_p(p);
    const double S = stable_height(q), U = unstable_height(q);
    const double vstar = primary_equilibrium(q)->v();
    CHECK(S >= vstar - 1e-9);
    CHECK(U >= vstar - 1e-9);
    CHECK(S < prev_s);
    CHECK(U > prev_u);
    CHECK(S - U < prev_h);
    prev_s = S;
    prev_u = U;
    prev_h = S - U;
  }
}

TEST_CASE("manifold height is insensitive to the seed") {
  const ModelParams q = base(0.25, 1.5);
  ManifoldOptions a, b;
  b.seed = 2e-6;
  CHECK(std::abs(stable_height(q, a) - stable_height(q, b)) < 1e-5);
  CHECK(std::abs(unstable_height(q, a) - unstable_height(q, b)) < 1e-5);
}

TEST_CASE("heteroclinic thresholds") {
  CHECK(heteroclinic_threshold(base(0.25)) == doctest::Approx(1.6491031).epsilon(1e-6));
  CHECK(heteroclinic_threshold(base(3.0)) == doctest::Approx(1.2068492).epsilon(1e-6));
  CHECK(heteroclinic_threshold(base(5.0)) == doctest::Approx(1.0566390).epsilon(1e-6));
  const double ps = heteroclinic_threshold(base(0.25));
  const ModelParams q = base(0.25, ps);
  CHECK(std::abs(stable_height(q) - unstable_height(q)) < 1e-4);
  try {
    heteroclinic_threshold(base(8.0));
    FAIL("expected NoSignChange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSignChange);
  }
}

TEST_CASE("homoclinic threshold") {
  const double ph = homoclinic_threshold(base(8.0));
  CHECK(ph == doctest::Approx(0.8919475).epsilon(1e-5));
  CHECK(homoclinic_gap(base(8.0, ph - 0.01)) < 0.0);
  CHECK(homoclinic_gap(base(8.0, ph + 0.005)) > 0.0);
  CHECK_THROWS_AS(homoclinic_threshold(base(0.25)), Error);
  // Just below p_hom the cycle lives inside the stable manifold of E_R*.
  const ModelParams q = base(8.0, ph - 0.002);
  const auto e = primary_equilibrium(q);
  const auto c = limit_cycle(q, e->point + State(1e-3, 0.0));
  REQUIRE(c);
  const auto eqs = interior_equilibria(q);
  CHECK(c->v_min > eqs[1].v());
  CHECK(c->v_min - eqs[1].v() < 0.005);
}

TEST_CASE("limit cycles") {
  const ModelParams family = base(0.25);
  const auto c155 = limit_cycle(family.with_p(1.55), State(0.6, 0.15));
  REQUIRE(c155);
  CHECK(c155->return_residual < 1e-6);
  const auto c1645 = limit_cycle(family.with_p(1.645), State(0.6, 0.15));
  REQUIRE(c1645);
  CHECK(c1645->period > c155->period);
  CHECK(!limit_cycle(family.with_p(1.2), State(0.7, 0.1)));
}

TEST_CASE("cycle attracts perturbed section points") {
  const ModelParams q = base(0.25, 1.6);
  const auto c = limit_cycle(q, State(0.6, 0.15));
  REQUIRE(c);
  CycleOptions opt;
  opt.transient = 500.0;
  for (double d : {-1e-3, 1e-3}) {
    const auto c2 = limit_cycle(q, c->section_point + State(0.0, d), opt);
    REQUIRE(c2);
    CHECK(std::abs(c2->section_point(1) - c->section_point(1)) < 1e-5);
    CHECK(c2->period == doctest::Approx(c->period).epsilon(1e-5));
  }
}

TEST_CASE("basin classification examples") {
  CHECK(basin_classify(State(0.5, 0.6), base(0.25, 1.2)) == Basin::ToE0);
  CHECK(basin_classify(State(0.8, 0.05), base(0.25, 0.9)) == Basin::ToE1);
  // Three basins under strong cooperation with p_SN < p < 1.
  const ModelParams q = base(3.0, 0.96);
  CHECK(basin_classify(State(0.75, 0.1), q) == Basin::ToEstar);
  CHECK(basin_classify(State(0.95, 0.02), q) == Basin::ToE1);
  CHECK(basin_classify(State(0.6, 0.3), q) == Basin::ToE0);
  CHECK(basin_classify(State(0.6, 0.15), base(0.25, 1.6)) == Basin::ToCycle);
}

TEST_CASE("bifurcation sweeps") {
  const ModelParams weak = base(0.25);
  std::vector<double> grid;
  for (double p = 1.50; p < 1.649; p += 0.01) grid.push_back(p);
  const auto rows = bifurcation_sweep(weak, grid);
  double prev_amp = 0.0;
  const double p_h = hopf_point(weak).p;
  for (const auto& r : rows) {
    CHECK(r.error.empty());
    if (r.p < p_h) {
      CHECK(!r.cycle);
      continue;
    }
    REQUIRE(r.cycle);
    const double amp = r.cycle->v_max - r.cycle->v_min;
    CHECK(amp > prev_amp);
    prev_amp = amp;
  }

  const ModelParams strong = base(8.0);
  const auto near = bifurcation_sweep(strong, {0.835, 0.8915});
  REQUIRE(near[1].cycle);
  const double v_saddle = interior_equilibria(strong.with_p(0.8915))[1].v();
  CHECK(near[1].cycle->v_min - v_saddle < 0.002);
  CHECK(near[0].cycle->v_min - interior_equilibria(strong.with_p(0.835))[1].v() > 0.03);
}
