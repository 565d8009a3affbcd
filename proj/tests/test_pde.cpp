#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "coopallee/equilibria.hpp"
#include "coopallee/error.hpp"
#include "coopallee/ode.hpp"
#include "coopallee/pde.hpp"
#include "coopallee/phase.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace coopallee;

namespace {

ModelParams base(double c, double p) {
  ModelParams q;
  q.c = c;
  q.p = p;
  return q;
}

double sup_diff(const Field& a, const Field& b) {
  return std::max((a.u - b.u).lpNorm<Eigen::Infinity>(), (a.v - b.v).lpNorm<Eigen::Infinity>());
}

// Coarse-to-fine restriction / linear prolongation between nested grids.
Field resample(const Field& f, int N) {
  Field g = f;
  const int M = f.intervals();
  g.u.resize(N + 1);
  g.v.resize(N + 1);
  for (int i = 0; i <= N; ++i) {
    const double s = double(i) * M / N;
    const int j = std::min(int(s), M - 1);
    const double w = s - j;
    g.u(i) = (1 - w) * f.u(j) + w * f.u(j + 1);
    g.v(i) = (1 - w) * f.v(j) + w * f.v(j + 1);
  }
  return g;
}

const DiffusionParams kTuring{1.496, 0.000688, 2.0};

Field turing_pattern(int N) {
  RdOptions o;
  o.dt = 0.05;
  o.record_from = 10000.0;
  const auto tr = simulate_rd(base(0.25, 1.4), kTuring,
                              Field::cosine(N, 2.0, 0.6, 0.1, 0.08, -0.02, 2.0), 10000.0, o);
  return tr.frames.back();
}

}  // namespace

TEST_CASE("field construction") {
  const Field f = Field::cosine(40, 2.0, 0.6, 0.1, 0.08, -0.02, 2.0);
  CHECK(f.intervals() == 40);
  CHECK(f.spacing() == doctest::Approx(2 * M_PI / 40));
  CHECK(f.u(0) == doctest::Approx(0.7));
  CHECK(f.u(40) == doctest::Approx(0.7));
  CHECK(f.u(10) == doctest::Approx(0.5));  // x = pi/2
  const auto a = cosine_coefficients(f.u, 8);
  CHECK(a(0) == doctest::Approx(0.6));
  CHECK(a(4) == doctest::Approx(0.1));
  for (int n : {1, 2, 3, 5, 6, 7, 8}) CHECK(std::abs(a(n)) < 1e-12);
}

TEST_CASE("constant equilibrium stays put") {
  const ModelParams q = base(0.25, 1.4);
  const State e = primary_equilibrium(q)->point;
  for (Stepper s : {Stepper::ExplicitRK4, Stepper::SemiImplicit}) {
    RdOptions o;
    o.stepper = s;
    o.dt = s == Stepper::SemiImplicit ? 0.05 : 0.0;
    const auto tr = simulate_rd(q, {0.1, 0.1, 2.0}, Field::constant(64, 2.0, e), 50.0, o);
    for (const auto& f : tr.frames) CHECK(sup_diff(f, Field::constant(64, 2.0, e)) < 1e-8);
    CHECK(tr.frames.back().time == doctest::Approx(50.0));
    CHECK(tr.frames.size() == 101);
  }
}

TEST_CASE("zero diffusion reproduces the ODE at every node") {
  const ModelParams q = base(0.25, 1.4);
  const Field init = Field::cosine(48, 2.0, 0.6, 0.1, 0.08, -0.02, 1.5);
  const auto tr = simulate_rd(q, {0.0, 0.0, 2.0}, init, 25.0);
  const Field& end = tr.frames.back();
  for (int i = 0; i <= 48; ++i) {
    const State x = integrate(State(init.u(i), init.v(i)), q, 25.0, 1e-12).states.back();
    CHECK((x - State(end.u(i), end.v(i))).norm() < 1e-6);
  }
}

TEST_CASE("zero delays reproduce the undelayed run") {
  const ModelParams q = base(0.25, 1.2);
  const DiffusionParams d{0.3, 0.4, 2.0};
  const Field init = Field::cosine(64, 2.0, 0.7, 0.05, 0.12, 0.01, 1.0);
  for (Stepper s : {Stepper::ExplicitRK4, Stepper::SemiImplicit}) {
    RdOptions o;
    o.stepper = s;
    o.dt = 0.005;
    const auto a = simulate_rd(q, d, init, 20.0, o);
    const auto b = simulate_rd_delays(q, d, {0.0, 0.0}, init, 20.0, o);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t k = 0; k < a.frames.size(); ++k) CHECK(sup_diff(a.frames[k], b.frames[k]) < 1e-8);
  }
}

TEST_CASE("Neumann closure conserves the diffusive mass") {
  // With zero boundary flux the trapezoid integral of u changes only through reaction.
  const ModelParams q = base(0.25, 1.4);
  const DiffusionParams d{1.0, 0.5, 2.0};
  const int N = 64;
  Field init = Field::cosine(N, 2.0, 0.6, 0.2, 0.1, -0.05, 0.5);
  init.u(0) += 0.1;  // steep boundary layer
  RdOptions o;
  o.dt = 1e-5;
  o.sample_every = 0.0;
  const auto tr = simulate_rd(q, d, init, 1e-5, o);
  const Field& next = tr.frames.back();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(N + 1, init.spacing());
  w(0) = w(N) = init.spacing() / 2;
  double reaction = 0.0, reaction_v = 0.0;
  for (int i = 0; i <= N; ++i) {
    const State f = rhs<double>(State(init.u(i), init.v(i)), q);
    reaction += w(i) * f(0);
    reaction_v += w(i) * f(1);
  }
  CHECK((w.dot(next.u) - w.dot(init.u)) / 1e-5 == doctest::Approx(reaction).epsilon(1e-3));
  CHECK((w.dot(next.v) - w.dot(init.v)) / 1e-5 == doctest::Approx(reaction_v).epsilon(1e-3));
}

TEST_CASE("input validation") {
  const ModelParams q = base(0.25, 1.4);
  const Field f = Field::constant(64, 2.0, State(0.5, 0.1));
  RdOptions o;
  o.stepper = Stepper::ExplicitRK4;
  o.dt = 0.1;
  try {
    simulate_rd(q, {1.0, 1.0, 2.0}, f, 1.0, o);
    FAIL("expected CFLViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CFLViolation);
  }
  // Auto switches to the semi-implicit path instead.
  o.stepper = Stepper::Auto;
  CHECK(simulate_rd(q, {1.0, 1.0, 2.0}, f, 1.0, o).stepper == Stepper::SemiImplicit);

  CHECK_THROWS_AS(simulate_rd(q, {1.0, 1.0, 2.0}, Field::constant(16, 2.0, State(0.5, 0.1)), 1.0), Error);
  CHECK_THROWS_AS(simulate_rd(q, {1.0, 1.0, 3.0}, f, 1.0), Error);

  try {
    RdOptions e;
    e.dt = 1e-3;
    e.stepper = Stepper::ExplicitRK4;
    simulate_rd_delays(q, {0.1, 0.1, 2.0}, {5e-4, 0.0}, f, 1.0, e);
    FAIL("expected HistoryUnderflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HistoryUnderflow);
  }

  try {
    simulate_rd(q, {0.1, 0.1, 2.0}, Field::constant(64, 2.0, State(1e120, 1e120)), 1.0);
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("linear growth rates of unstable modes") {
  // Smaller d2 than the pattern run so the leading rates are well above roundoff growth.
  const DiffusionParams dd{1.496, 0.0002, 2.0};
  const ModelParams q = base(0.25, 1.4);
  const auto eq = *primary_equilibrium(q);
  const Eigen::Matrix2d jac = jacobian<double>(eq.point, q);
  std::vector<std::pair<double, int>> rates;
  for (int n = 1; n <= 20; ++n) {
    Eigen::Matrix2d m = jac;
    m(0, 0) -= dd.d1 * n * n / 4.0;
    m(1, 1) -= dd.d2 * n * n / 4.0;
    rates.emplace_back(m.eigenvalues().real().maxCoeff(), n);
  }
  std::sort(rates.rbegin(), rates.rend());
  for (int k = 0; k < 3; ++k) {
    const auto [lambda, n] = rates[k];
    REQUIRE(lambda > 0);
    Field init = Field::constant(200, 2.0, eq.point);
    init.u += 1e-6 * (n / 2.0 * init.grid().array()).cos().matrix();
    RdOptions o;
    o.dt = 0.01;
    o.stepper = Stepper::SemiImplicit;
    o.sample_every = 1.0;
    // Long enough for the stable partner to decay, short enough to stay linear.
    const double t1 = 2.0 / lambda, t2 = 5.0 / lambda;
    const auto tr = simulate_rd(q, dd, init, t2, o);
    auto amp = [&](double t) {
      const Field* best = &tr.frames.front();
      for (const auto& f : tr.frames)
        if (std::abs(f.time - t) < std::abs(best->time - t)) best = &f;
      return std::make_pair(best->time, std::abs(cosine_coefficients(best->u, n)(n)));
    };
    const auto [ta, aa] = amp(t1);
    const auto [tb, ab] = amp(t2);
    const double fitted = std::log(ab / aa) / (tb - ta);
    CHECK(fitted == doctest::Approx(lambda).epsilon(0.05));
  }
}

TEST_CASE("spatial convergence is second order") {
  const ModelParams q = base(0.25, 1.4);
  const Field coarse = turing_pattern(200);
  std::vector<Field> s;
  REQUIRE(coarse.u.maxCoeff() - coarse.u.minCoeff() > 0.01);
  for (int N : {50, 100, 200, 400}) s.push_back(refine_steady_state(q, kTuring, resample(coarse, N)));
  for (const auto& f : s) CHECK(f.u.maxCoeff() - f.u.minCoeff() > 0.01);
  auto diff_on = [](const Field& a, const Field& b) {
    // Compare on the nodes of the coarser grid a.
    return sup_diff(a, resample(b, a.intervals()));
  };
  const double e1 = diff_on(s[0], s[1]), e2 = diff_on(s[1], s[2]), e3 = diff_on(s[2], s[3]);
  MESSAGE("refinement differences ", e1, " ", e2, " ", e3);
  CHECK(e1 / e2 > 3.5);
  CHECK(e1 / e2 < 4.5);
  CHECK(e2 / e3 > 3.5);
  CHECK(e2 / e3 < 4.5);
  // The refined state is a fixed point of the time stepper.
  RdOptions o;
  o.dt = 0.05;
  const auto tr = simulate_rd(q, kTuring, s[1], 50.0, o);
  CHECK(sup_diff(tr.frames.back(), s[1]) < 1e-9);
}

TEST_CASE("diagnosis of attractors") {
  const ModelParams q = base(0.25, 1.4);
  const State e = primary_equilibrium(q)->point;
  RdOptions o;
  o.dt = 0.05;
  auto d = diagnose(simulate_rd(q, kTuring, Field::constant(64, 2.0, e), 600.0, o));
  CHECK(d.kind == AttractorKind::HomogeneousSteady);
  CHECK(d.dominant_mode == 0);
  CHECK(!d.period);

  // Short tails are not enough to decide anything.
  auto p = base(0.25, 1.6);
  const State ep = primary_equilibrium(p)->point;
  d = diagnose(simulate_rd(p, {0.1, 0.1, 2.0}, Field::constant(64, 2.0, ep + State(0.01, 0.0)), 20.0, o));
  CHECK(d.kind == AttractorKind::Undecided);

  o.record_from = 2000.0;
  o.dt = 0.02;
  o.stepper = Stepper::ExplicitRK4;
  d = diagnose(simulate_rd(p, {0.1, 0.1, 2.0}, Field::constant(64, 2.0, ep + State(0.01, 0.0)), 2600.0, o));
  CHECK(d.kind == AttractorKind::HomogeneousPeriodic);
  REQUIRE(d.period);
  const auto cyc = limit_cycle(p, ep + State(0.01, 0.0));
  REQUIRE(cyc);
  // The norm signal of a homogeneous cycle shares its period.
  CHECK(*d.period == doctest::Approx(cyc->period).epsilon(1e-2));
}

TEST_CASE("Turing pattern run") {
  RdOptions o;
  o.dt = 0.05;
  o.record_from = 9000.0;
  const auto tr = simulate_rd(base(0.25, 1.4), kTuring,
                              Field::cosine(200, 2.0, 0.6, 0.1, 0.08, -0.02, 2.0), 10000.0, o);
  const auto d = diagnose(tr);
  CHECK(d.kind == AttractorKind::InhomogeneousSteady);
  CHECK(d.dominant_mode >= 1);
}

TEST_CASE("delayed run in the stable corner converges") {
  const ModelParams q = base(0.25, 1.2);
  const State e = primary_equilibrium(q)->point;
  RdOptions o;
  o.dt = 0.01;
  o.stepper = Stepper::SemiImplicit;
  o.record_from = 1400.0;
  const auto tr = simulate_rd_delays(q, {0.3, 0.4, 2.0}, {1.0, 5.0},
                                     Field::cosine(64, 2.0, e(0) + 0.02, 0.01, e(1), -0.01, 1.0), 2000.0, o);
  CHECK(sup_diff(tr.frames.back(), Field::constant(64, 2.0, e)) < 1e-5);
}
