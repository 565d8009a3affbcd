#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "coopallee/error.hpp"
#include "coopallee/turing.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace coopallee;

namespace {

ModelParams base(double c, double p = 1.4) {
  ModelParams q;
  q.c = c;
  q.p = p;
  return q;
}

// Mode-n stability straight from the eigenvalues of J(E*) - (n/l)^2 diag(d1, d2).
bool modes_stable_by_eigenvalues(const ModelParams& q, const DiffusionParams& d, const State& e,
                                 int n_max) {
  const Eigen::Matrix2d jac = jacobian<double>(e, q);
  for (int n = 0; n <= n_max; ++n) {
    const double k = double(n) * n / (d.l * d.l);
    Eigen::Matrix2d m = jac;
    m(0, 0) -= d.d1 * k;
    m(1, 1) -= d.d2 * k;
    if (m.eigenvalues().real().maxCoeff() >= 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("mode coefficients reduce to the equilibrium at n = 0") {
  const ModelParams q = base(0.25);
  const auto e = *primary_equilibrium(q);
  const auto ml = mode_coefficients(0, q, {1.496, 0.000688, 2.0}, e);
  CHECK(ml.T == doctest::Approx(e.trace).epsilon(1e-14));
  CHECK(ml.J == doctest::Approx(e.det).epsilon(1e-14));
}

TEST_CASE("mode coefficients match the matrix trace and determinant") {
  const ModelParams q = base(3.0, 1.05);
  const auto e = *primary_equilibrium(q);
  const DiffusionParams d{0.7, 0.02, 2.0};
  const Eigen::Matrix2d jac = jacobian<double>(e.point, q);
  for (int n = 0; n < 12; ++n) {
    const double k = n * n / 4.0;
    Eigen::Matrix2d m = jac;
    m(0, 0) -= d.d1 * k;
    m(1, 1) -= d.d2 * k;
    const auto ml = mode_coefficients(n, q, d, e);
    CHECK(ml.T == doctest::Approx(m.trace()).epsilon(1e-10));
    CHECK(ml.J == doctest::Approx(m.determinant()).epsilon(1e-10));
  }
}

TEST_CASE("trace is negative for every mode below p_H") {
  for (double p : {1.1, 1.3, 1.5}) {
    const ModelParams q = base(0.25, p);
    const auto e = *primary_equilibrium(q);
    for (int n = 0; n < 64; ++n) CHECK(mode_coefficients(n, q, {0.01, 0.01, 2.0}, e).T < 0);
  }
}

TEST_CASE("the reference diffusion pair is Turing unstable") {
  const ModelParams q = base(0.25);
  const auto e = *primary_equilibrium(q);
  const DiffusionParams d{1.496, 0.000688, 2.0};
  bool some_negative = false;
  for (int n = 1; n <= 10; ++n) some_negative |= mode_coefficients(n, q, d, e).J < 0;
  CHECK(some_negative);
  REQUIRE(first_unstable_mode(q, d, e));
  CHECK(*first_unstable_mode(q, d, e) == 4);
  const auto curve = turing_curve(q, e, 0.5, 3.0);
  CHECK(d.d2 < curve.at(d.d1));
}

TEST_CASE("d2_critical zeroes J_n") {
  const ModelParams q = base(0.25);
  const auto e = *primary_equilibrium(q);
  for (int n = 1; n <= 12; ++n)
    for (double d1 : {0.3, 1.0, 1.496, 4.0}) {
      const auto d2 = d2_critical(n, d1, q, e);
      if (!d2) {
        // Mode condition fails: n at or below l sqrt(det / (m p c u v d1)).
        CHECK(n <= 2.0 * std::sqrt(e.det / (q.m * q.p * q.c * e.u() * e.v() * d1)) + 1e-12);
        continue;
      }
      CHECK(std::abs(mode_coefficients(n, q, {d1, *d2, 2.0}, e).J) < 1e-10);
    }
  CHECK_THROWS_AS(d2_critical(0, 1.0, q, e), Error);
  // Above the top point u* < (a+1)/2 and the formula is not defined.
  const ModelParams hi = base(0.25, 1.6);
  CHECK_THROWS_AS(d2_critical(4, 1.0, hi, *primary_equilibrium(hi)), Error);
}

TEST_CASE("d2_critical decreases in n for large d1") {
  const ModelParams q = base(0.25);
  const auto e = *primary_equilibrium(q);
  double prev = INFINITY;
  int defined = 0;
  for (int n = 1; n <= 40; ++n) {
    const auto d2 = d2_critical(n, 200.0, q, e);
    if (!d2) continue;
    ++defined;
    CHECK(*d2 < prev);
    prev = *d2;
  }
  CHECK(defined > 30);
}

TEST_CASE("turing curve segments") {
  const ModelParams q = base(0.25);
  const auto e = *primary_equilibrium(q);
  const auto curve = turing_curve(q, e, 0.5, 20.0);
  std::vector<int> modes;
  for (const auto& s : curve.segments) modes.push_back(s.n);
  for (int n : {2, 3, 4, 5}) CHECK(std::find(modes.begin(), modes.end(), n) != modes.end());
  for (std::size_t i = 1; i < curve.segments.size(); ++i) {
    // Consecutive segments meet at a junction with matching values.
    const auto& a = curve.segments[i - 1];
    const auto& b = curve.segments[i];
    CHECK(a.d1_hi == b.d1_lo);
    CHECK(std::abs(a.d2.back() - b.d2.front()) < 1e-9);
    CHECK(std::abs(a.n - b.n) == 1);
  }
  // Segments carry the pointwise maximum.
  for (const auto& s : curve.segments)
    for (std::size_t i = 0; i < s.d1.size(); i += 7) {
      for (int n = 1; n <= curve.n_used; ++n) {
        const auto d2 = d2_critical(n, s.d1[i], q, e);
        if (d2) CHECK(*d2 <= s.d2[i] + 1e-10);  // junctions are bisected to 1e-8 in d1
      }
    }
  CHECK_THROWS_AS(turing_curve(q, e, 1.0, 0.5), Error);
}

TEST_CASE("curve with no admissible mode is empty") {
  // Tiny d1: the mode condition needs n above l sqrt(det / (m p c u v d1)).
  const ModelParams q = base(0.25);
  const auto e = *primary_equilibrium(q);
  try {
    turing_curve(q, e, 1e-9, 2e-9, 4, 10);
    FAIL("expected EmptyCurve");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::EmptyCurve);
  }
}

TEST_CASE("dichotomy on a grid") {
  const ModelParams q = base(0.25);
  const auto e = *primary_equilibrium(q);
  const auto curve = turing_curve(q, e, 0.1, 3.0, 64, 2000);
  int stable = 0, unstable = 0;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      const double d1 = 0.1 + 2.9 * i / 19.0;
      const double d2 = 1e-5 + 2e-3 * j / 19.0;
      const DiffusionParams d{d1, d2, 2.0};
      const bool scan = !first_unstable_mode(q, d, e).has_value();
      const auto env = turing_envelope(d1, q, e, mode_cutoff(q, e, d2));
      const bool above = !env || d2 > env->second;
      CHECK(scan == above);
      CHECK(scan == modes_stable_by_eigenvalues(q, d, e.point, 200));
      // The sampled polyline agrees away from its kinks.
      if (std::abs(d2 - curve.at(d1)) > 1e-5) CHECK(scan == (d2 > curve.at(d1)));
      (scan ? stable : unstable)++;
    }
  CHECK(stable > 50);
  CHECK(unstable > 50);
}

TEST_CASE("mode cutoff is sound") {
  const ModelParams q = base(0.25);
  const auto e = *primary_equilibrium(q);
  for (double d2 : {1e-5, 1e-4, 1e-3}) {
    const int nc = mode_cutoff(q, e, d2);
    for (double d1 : {0.01, 1.0, 100.0})
      for (int n = nc; n < nc + 200; ++n) CHECK(mode_coefficients(n, q, {d1, d2, 2.0}, e).J > 0);
  }
}

TEST_CASE("Turing-Hopf points") {
  ModelParams f = base(0.25);
  auto th = turing_hopf_point(f, 1.496, 5);
  REQUIRE(th);
  CHECK(std::abs(th->p - 1.5432) < 1e-3);
  CHECK(std::abs(th->d2 - 0.0009) < 1e-4);
  auto q = f.with_p(th->p);
  auto e = *primary_equilibrium(q);
  CHECK(std::abs(mode_coefficients(5, q, {1.496, th->d2, 2.0}, e).J) < 1e-8);
  CHECK(std::abs(mode_coefficients(0, q, {1.496, th->d2, 2.0}, e).T) < 1e-8);

  f = base(8.0);
  th = turing_hopf_point(f, 0.13, 5);
  REQUIRE(th);
  CHECK(std::abs(th->p - 0.8306) < 1e-3);
  CHECK(std::abs(th->d2 - 0.009) < 1e-3);
  q = f.with_p(th->p);
  e = *primary_equilibrium(q);
  CHECK(std::abs(mode_coefficients(5, q, {0.13, th->d2, 2.0}, e).J) < 1e-8);
  CHECK(std::abs(mode_coefficients(0, q, {0.13, th->d2, 2.0}, e).T) < 1e-8);

  // Mode 1 has no critical d2 here.
  CHECK(!turing_hopf_point(base(0.25), 1.496, 1));
}
