#include "coopallee/equilibria.hpp"

#include "coopallee/error.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <complex>
#include <functional>

namespace coopallee {

namespace {

constexpr int kScanPoints = 4096;
constexpr double kHyperbolicTol = 1e-9;
constexpr double kTangencyTol = 1e-10;

double bisect_root(const std::function<double(double)>& f, double lo, double hi, double width) {
  auto tol = [width](double x, double y) { return std::abs(x - y) <= width; };
  auto r = boost::math::tools::bisect(f, lo, hi, tol);
  return 0.5 * (r.first + r.second);
}

double trace_interior(const State& s, const ModelParams& q) {
  const double u = s(0);
  return -q.r * u * (2.0 * u - q.a - 1.0) + q.m * (1.0 - q.p * u);
}

double det_interior(const State& s, const ModelParams& q) {
  const double u = s(0), v = s(1);
  return q.m * q.p * u * v *
         (q.r * q.c * u * (1.0 + q.a - 2.0 * u) + (1.0 + q.c * v) * (1.0 + 2.0 * q.c * v));
}

// Global maximum of F on (0, 1/p): scan then Brent refinement.
std::pair<double, double> interior_residual_max(const ModelParams& q) {
  const double hi = 1.0 / q.p;
  int best = 1;
  double best_val = -INFINITY;
  for (int i = 1; i < kScanPoints; ++i) {
    const double val = interior_residual(hi * i / kScanPoints, q);
    if (val > best_val) {
      best_val = val;
      best = i;
    }
  }
  const double a = hi * (best - 1) / kScanPoints, b = hi * (best + 1) / kScanPoints;
  auto r = boost::math::tools::brent_find_minima(
      [&](double u) { return -interior_residual(u, q); }, a, b, 60);
  return {r.first, -r.second};
}

}  // namespace

const char* to_string(EquilibriumKind kind) {
  switch (kind) {
    case EquilibriumKind::Origin: return "Origin";
    case EquilibriumKind::Allee: return "Allee";
    case EquilibriumKind::CarryingCapacity: return "CarryingCapacity";
    case EquilibriumKind::InteriorPrimary: return "InteriorPrimary";
    case EquilibriumKind::InteriorSaddle: return "InteriorSaddle";
  }
  return "Unknown";
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::StableNode: return "StableNode";
    case Stability::UnstableNode: return "UnstableNode";
    case Stability::Saddle: return "Saddle";
    case Stability::StableFocus: return "StableFocus";
    case Stability::UnstableFocus: return "UnstableFocus";
    case Stability::NonHyperbolic: return "NonHyperbolic";
  }
  return "Unknown";
}

Stability classify_linear(double trace, double det) {
  if (std::abs(det) < kHyperbolicTol) return Stability::NonHyperbolic;
  if (det < 0.0) return Stability::Saddle;
  if (std::abs(trace) < kHyperbolicTol) return Stability::NonHyperbolic;
  const bool node = trace * trace - 4.0 * det >= 0.0;
  if (trace < 0.0) return node ? Stability::StableNode : Stability::StableFocus;
  return node ? Stability::UnstableNode : Stability::UnstableFocus;
}

std::vector<Equilibrium> boundary_equilibria(const ModelParams& q) {
  q.validate();
  const std::pair<EquilibriumKind, State> pts[] = {
      {EquilibriumKind::Origin, State(0.0, 0.0)},
      {EquilibriumKind::Allee, State(q.a, 0.0)},
      {EquilibriumKind::CarryingCapacity, State(1.0, 0.0)},
  };
  std::vector<Equilibrium> out;
  for (const auto& [kind, s] : pts) {
    const Mat2<double> J = jacobian(s, q);
    Equilibrium e;
    e.point = s;
    e.kind = kind;
    e.trace = J.trace();
    e.det = J.determinant();
    e.classification = classify_linear(e.trace, e.det);
    out.push_back(e);
  }
  return out;
}

double interior_residual(double u, const ModelParams& q) {
  return q.r * q.c * q.p * q.p * u * u * (1.0 - u) * (u - q.a) - (1.0 - q.p * u);
}

Equilibrium classify(const State& point, const ModelParams& q) {
  Equilibrium e;
  e.point = point;
  e.trace = trace_interior(point, q);
  e.det = det_interior(point, q);
  e.kind = e.det < 0.0 ? EquilibriumKind::InteriorSaddle : EquilibriumKind::InteriorPrimary;
  e.classification = classify_linear(e.trace, e.det);
  return e;
}

std::vector<Equilibrium> interior_equilibria(const ModelParams& q) {
  q.validate();
  const double hi = 1.0 / q.p;
  auto F = [&](double u) { return interior_residual(u, q); };
  std::vector<double> grid(kScanPoints + 1), val(kScanPoints + 1);
  for (int i = 0; i <= kScanPoints; ++i) {
    grid[i] = hi * i / kScanPoints;
    val[i] = F(grid[i]);
  }
  std::vector<double> roots;
  for (int i = 0; i < kScanPoints; ++i) {
    if (i > 0 && val[i] == 0.0) {
      roots.push_back(grid[i]);
    } else if (val[i] * val[i + 1] < 0.0) {
      roots.push_back(bisect_root(F, grid[i], grid[i + 1], 1e-15));
    } else if (i > 0 && val[i - 1] * val[i] > 0.0 && val[i] * val[i + 1] > 0.0 &&
               std::abs(val[i]) <= std::abs(val[i - 1]) && std::abs(val[i]) <= std::abs(val[i + 1])) {
      // Tangential root: a local extremum of F touching zero without a sign change.
      const double s = val[i] > 0.0 ? 1.0 : -1.0;
      auto r = boost::math::tools::brent_find_minima(
          [&](double u) { return s * F(u); }, grid[i - 1], grid[i + 1], 60);
      if (std::abs(r.second) < kTangencyTol) roots.push_back(r.first);
    }
  }

  std::vector<Equilibrium> out;
  for (double u : roots) {
    if (!(u > 0.0 && u < hi)) continue;
    const double v = (1.0 - q.p * u) / (q.c * q.p * u);
    if (!(v > 0.0)) continue;
    out.push_back(classify(State(u, v), q));
  }
  return out;
}

std::optional<Equilibrium> primary_equilibrium(const ModelParams& q) {
  for (const auto& e : interior_equilibria(q))
    if (e.kind == EquilibriumKind::InteriorPrimary) return e;
  return std::nullopt;
}

double saddle_node_point(const ModelParams& family) {
  family.validate();
  if (cooperation_regime(family) != Regime::Strong)
    throw Error(ErrorCode::NotApplicable, "saddle-node point exists only under strong cooperation");
  // Two interior roots exist iff max F > 0 (F < 0 at both ends of (0, 1/p) for p < 1).
  auto h = [&](double p) { return interior_residual_max(family.with_p(p)).second; };
  double lo = 1e-3, hi = 1.0 - 1e-9;
  if (h(lo) >= 0.0 || h(hi) <= 0.0) throw Error(ErrorCode::NoBracket, "interior root count does not change on (0, 1)");
  return bisect_root(h, lo, hi, 1e-13);
}

std::pair<double, double> primary_branch_interval(const ModelParams& q) {
  const double upper = 1.0 / q.a;
  if (cooperation_regime(q) == Regime::Strong) return {saddle_node_point(q), upper};
  return {1.0, upper};
}

double top_point(const ModelParams& family) {
  const double u = 0.5 * (1.0 + family.a);
  const double A = family.r * family.c * u * u * (1.0 - u) * (u - family.a);
  return (-u + std::sqrt(u * u + 4.0 * A)) / (2.0 * A);
}

HopfPoint hopf_point(const ModelParams& family) {
  family.validate();
  const auto [lo, hi] = primary_branch_interval(family);
  auto tr = [&](double p) -> double {
    auto e = primary_equilibrium(family.with_p(p));
    if (!e) return NAN;
    return e->trace;
  };
  constexpr int kSamples = 2000;
  double prev_p = NAN, prev_t = NAN;
  for (int i = 1; i < kSamples; ++i) {
    const double p = lo + (hi - lo) * i / kSamples;
    const double t = tr(p);
    if (std::isfinite(prev_t) && std::isfinite(t) && prev_t < 0.0 && t >= 0.0) {
      HopfPoint h;
      h.p = bisect_root(tr, prev_p, p, 1e-13);
      const auto e = primary_equilibrium(family.with_p(h.p));
      h.omega = std::sqrt(e->det);
      constexpr double dp = 1e-5;
      auto alpha = [&](double pp) {
        const Mat2<double> J = jacobian(primary_equilibrium(family.with_p(pp))->point, family.with_p(pp));
        Eigen::EigenSolver<Mat2<double>> es(J);
        return std::max(es.eigenvalues()(0).real(), es.eigenvalues()(1).real());
      };
      h.alpha_prime = (alpha(h.p + dp) - alpha(h.p - dp)) / (2.0 * dp);
      return h;
    }
    prev_p = p;
    prev_t = t;
  }
  throw Error(ErrorCode::NoBracket, "trace of the interior equilibrium does not change sign");
}

double first_lyapunov(const ModelParams& q) {
  const auto e = primary_equilibrium(q);
  if (!e) throw Error(ErrorCode::NotAtHopf, "no interior equilibrium");
  const Mat2<double> A = jacobian(e->point, q);
  if (std::abs(A.trace()) > 1e-6 || A.determinant() <= 0.0)
    throw Error(ErrorCode::NotAtHopf, "equilibrium is not at a Hopf point");
  const double omega = std::sqrt(A.determinant());

  // Real basis (Re q, -Im q) of the eigenvector for i*omega turns A into [[0,-w],[w,0]].
  Mat2<double> T;
  T << A(0, 1), 0.0, -A(0, 0), -omega;
  const Mat2<double> Ti = T.inverse();
  const auto H = hessians(e->point, q);

  double G2[2][2][2] = {};
  double G3[2][2][2][2] = {};
  for (int k = 0; k < 2; ++k)
    for (int m = 0; m < 2; ++m) {
      const Mat2<double> S = T.transpose() * H[m] * T;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) G2[k][i][j] += Ti(k, m) * S(i, j);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int l = 0; l < 2; ++l) {
            double s = 0.0;
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c)
                  s += third_partial(m, a, b, c, q) * T(a, i) * T(b, j) * T(c, l);
            G3[k][i][j][l] += Ti(k, m) * s;
          }
    }
  const double fxx = G2[0][0][0], fxy = G2[0][0][1], fyy = G2[0][1][1];
  const double gxx = G2[1][0][0], gxy = G2[1][0][1], gyy = G2[1][1][1];
  const double fxxx = G3[0][0][0][0], fxyy = G3[0][0][1][1];
  const double gxxy = G3[1][0][0][1], gyyy = G3[1][1][1][1];
  return (fxxx + fxyy + gxxy + gyyy) / 16.0 +
         (fxy * (fxx + fyy) - gxy * (gxx + gyy) - fxx * gxx + fyy * gyy) / (16.0 * omega);
}

BifurcationThresholds thresholds(const ModelParams& family) {
  BifurcationThresholds t;
  const HopfPoint h = hopf_point(family);
  t.p_H = h.p;
  if (cooperation_regime(family) == Regime::Strong) t.p_SN = saddle_node_point(family);
  t.p_top = top_point(family);
  t.lyapunov_a = first_lyapunov(family.with_p(h.p));
  return t;
}

}  // namespace coopallee
