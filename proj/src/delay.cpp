#include "coopallee/delay.hpp"

#include "coopallee/error.hpp"
#include "coopallee/turing.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace coopallee {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

int degree(const std::array<double, 3>& c) {
  for (int d = 2; d >= 0; --d)
    if (c[d] != 0.0) return d;
  return -1;
}

// Principal angle in (-pi, pi].
double principal_arg(cplx z) {
  const double a = std::arg(z);
  return a <= -M_PI ? M_PI : a;
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a(0) * b(1) - a(1) * b(0); }

}  // namespace

std::string PreconditionReport::summary() const {
  std::string s;
  auto add = [&](bool ok, const char* what) {
    if (!ok) s += std::string(s.empty() ? "" : "; ") + what;
  };
  add(below_hopf, "trace at E* is not negative");
  add(diffusion_stable, "a diffusive mode is unstable at zero delay");
  add(degree_condition, "deg P0 is not maximal");
  add(nonzero_at_origin, "zero is a characteristic root");
  add(coprime, "P0..P3 share a root");
  add(limit_condition, "ratio limit at infinity is not below 1");
  return s.empty() ? "all conditions hold" : s;
}

cplx CharQuasiPolynomial::P(int i, cplx s) const {
  const auto& c = coeffs[i];
  return c[0] + s * (c[1] + s * c[2]);
}

cplx CharQuasiPolynomial::dP(int i, cplx s) const {
  const auto& c = coeffs[i];
  return c[1] + 2.0 * s * c[2];
}

cplx CharQuasiPolynomial::D(cplx s, double tau1, double tau2) const {
  const cplx e1 = std::exp(-s * tau1), e2 = std::exp(-s * tau2);
  return P(0, s) + P(1, s) * e1 + P(2, s) * e2 + P(3, s) * e1 * e2;
}

cplx CharQuasiPolynomial::dD(cplx s, double tau1, double tau2) const {
  const cplx e1 = std::exp(-s * tau1), e2 = std::exp(-s * tau2);
  return dP(0, s) + (dP(1, s) - tau1 * P(1, s)) * e1 + (dP(2, s) - tau2 * P(2, s)) * e2 +
         (dP(3, s) - (tau1 + tau2) * P(3, s)) * e1 * e2;
}

double CharQuasiPolynomial::root_bound() const {
  // |P0(s)| >= (|s| - |alpha|)(|s| - beta) against |P1| + |P2| + |P3| for Re s >= 0.
  const double alpha = std::abs(d1 * k - a11), beta = d2 * k;
  const double K = std::abs(a12 * c21) + std::abs(b11 * c22);
  const double B = alpha + beta + std::abs(b11) + c22;
  const double C = alpha * beta - std::abs(b11) * beta - c22 * alpha - K;
  const double root = 0.5 * (B + std::sqrt(std::max(0.0, B * B - 4 * C)));
  return 1.05 * std::max({root, alpha, beta}) + 1e-3;
}

CharQuasiPolynomial char_quasi_poly(int n, const ModelParams& q, const DiffusionParams& diff,
                                    const Equilibrium& eq) {
  if (eq.kind != EquilibriumKind::InteriorPrimary)
    throw Error(ErrorCode::NotApplicable, "delay analysis needs the primary interior equilibrium");
  if (n < 0) throw Error(ErrorCode::InvalidParams, "mode index must be nonnegative");
  diff.validate();
  CharQuasiPolynomial cq;
  const double u = eq.u(), v = eq.v();
  cq.n = n;
  cq.l = diff.l;
  cq.k = double(n) * n / (diff.l * diff.l);
  cq.d1 = diff.d1;
  cq.d2 = diff.d2;
  cq.a11 = q.r * u * (1 - u);
  cq.a12 = -2 * q.c * u * v - u;
  cq.b11 = -q.r * u * (u - q.a);
  cq.c21 = q.m * q.p * (1 + q.c * v) * v;
  cq.c22 = q.m * q.p * q.c * u * v;
  const double alpha = cq.d1 * cq.k - cq.a11, beta = cq.d2 * cq.k;
  cq.coeffs[0] = {alpha * beta, alpha + beta, 1.0};
  cq.coeffs[1] = {-cq.b11 * beta, -cq.b11, 0.0};
  cq.coeffs[2] = {-cq.c22 * alpha - cq.a12 * cq.c21, -cq.c22, 0.0};
  cq.coeffs[3] = {cq.b11 * cq.c22, 0.0, 0.0};

  auto& rep = cq.report;
  rep.below_hopf = eq.trace < 0;
  rep.diffusion_stable = !first_unstable_mode(q, diff, eq).has_value();
  const int d0 = degree(cq.coeffs[0]);
  rep.degree_condition = true;
  double limit = 0.0;
  for (int i = 1; i < 4; ++i) {
    const int di = degree(cq.coeffs[i]);
    if (di > d0) rep.degree_condition = false;
    if (di == d0) limit += std::abs(cq.coeffs[i][di] / cq.coeffs[0][d0]);
  }
  rep.limit_condition = rep.degree_condition && limit < 1.0;
  double at0 = 0.0;
  for (int i = 0; i < 4; ++i) at0 += cq.coeffs[i][0];
  rep.nonzero_at_origin = std::abs(at0) > 1e-14;
  // P3 is a constant; when it vanishes fall back to the root of P1 (or P2).
  if (cq.coeffs[3][0] != 0.0) {
    rep.coprime = true;
  } else {
    std::vector<cplx> candidates;
    for (int i : {1, 2})
      if (degree(cq.coeffs[i]) == 1) candidates.push_back(-cq.coeffs[i][0] / cq.coeffs[i][1]);
    rep.coprime = !candidates.empty();
    for (cplx s : candidates) {
      bool common = true;
      for (int i = 0; i < 4; ++i) common &= std::abs(cq.P(i, s)) < 1e-12;
      if (common) rep.coprime = false;
    }
  }
  return cq;
}

CrossingTerms crossing_terms(const CharQuasiPolynomial& cq, double omega) {
  const cplx s(0.0, omega);
  const cplx p0 = cq.P(0, s), p1 = cq.P(1, s), p2 = cq.P(2, s), p3 = cq.P(3, s);
  CrossingTerms t;
  t.X1 = std::norm(p0) + std::norm(p1) - std::norm(p2) - std::norm(p3);
  t.X2 = std::norm(p0) - std::norm(p1) + std::norm(p2) - std::norm(p3);
  t.Z1 = p2 * std::conj(p3) - p0 * std::conj(p1);
  t.Z2 = p1 * std::conj(p3) - p0 * std::conj(p2);
  return t;
}

namespace {

// Frequency above which |P0(i w)| exceeds |P1| + |P2| + |P3|, so no crossing is possible.
double crossing_omega_bound(const CharQuasiPolynomial& cq) {
  const double alpha = cq.d1 * cq.k - cq.a11, beta = cq.d2 * cq.k;
  const double B = std::abs(cq.b11) + cq.c22;
  const double C = std::abs(cq.b11) * beta + cq.c22 * std::abs(alpha) + std::abs(cq.a12 * cq.c21) +
                   std::abs(cq.b11 * cq.c22);
  return 0.5 * (B + std::sqrt(B * B + 4 * C));
}

// True when the crossing set of this mode and every higher mode is empty.
bool provably_empty_from(const CharQuasiPolynomial& cq) {
  const double alpha = cq.d1 * cq.k - cq.a11, beta = cq.d2 * cq.k;
  const double K = std::abs(cq.a12 * cq.c21) + std::abs(cq.b11 * cq.c22);
  // |P0| - |P1| - |P2| - |P3| >= (A - |b11|)(B - c22) - |b11| c22 - K with A = |i w + alpha|,
  // B = |i w + beta|; increasing in A and B once both factors are positive.
  return alpha > std::abs(cq.b11) && beta > cq.c22 &&
         (alpha - std::abs(cq.b11)) * (beta - cq.c22) - cq.c22 * std::abs(cq.b11) - K > 0;
}

double refine_root(const std::function<double(double)>& f, double lo, double hi) {
  using namespace boost::math::tools;
  std::uintmax_t iters = 200;
  const auto r = toms748_solve(f, lo, hi, eps_tolerance<double>(std::numeric_limits<double>::digits - 1), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

CrossingSet crossing_set(const CharQuasiPolynomial& cq, int per_decade) {
  CrossingSet cs;
  cs.n = cq.n;
  cs.omega_max = 1.01 * crossing_omega_bound(cq);
  const double lo = 1e-6;
  auto F = [&](double w) { return crossing_terms(cq, w).F1(); };
  const int count = std::max(2, int(std::ceil(std::log10(cs.omega_max / lo) * per_decade)));
  std::vector<double> roots;
  double w_prev = lo, f_prev = F(lo);
  cs.open_at_zero = f_prev <= 0;
  for (int i = 1; i <= count; ++i) {
    const double w = lo * std::pow(cs.omega_max / lo, double(i) / count);
    const double f = F(w);
    if ((f_prev > 0) != (f > 0)) roots.push_back(f == 0 ? w : refine_root(F, w_prev, w));
    w_prev = w;
    f_prev = f;
  }
  bool inside = cs.open_at_zero;
  double start = 0.0;
  for (double r : roots) {
    if (inside) cs.intervals.emplace_back(start, r);
    start = r;
    inside = !inside;
  }
  if (inside) cs.intervals.emplace_back(start, cs.omega_max);  // cannot happen past the bound
  return cs;
}

const char* to_string(Branch b) { return b == Branch::Plus ? "Plus" : "Minus"; }

const char* to_string(CrossingDirection d) {
  return d == CrossingDirection::TwoMoreRight ? "TwoMoreRight" : "TwoFewerRight";
}

namespace {

double theta_of(double X, cplx Z) {
  const double m = 2 * std::abs(Z);
  if (m == 0.0) {
    if (std::abs(X) > 1e-14) throw Error(ErrorCode::DomainError, "frequency outside the crossing set");
    return M_PI / 2;
  }
  const double ratio = X / m;
  if (std::abs(ratio) > 1 + 1e-10) throw Error(ErrorCode::DomainError, "frequency outside the crossing set");
  return std::acos(std::clamp(ratio, -1.0, 1.0));
}

// Curve point with winding indices zero; shifting by j adds 2 pi j / omega.
CurvePoint base_point(const CharQuasiPolynomial& cq, double omega, Branch b) {
  if (!(omega > 0)) throw Error(ErrorCode::DomainError, "omega must be positive");
  const CrossingTerms t = crossing_terms(cq, omega);
  CurvePoint p;
  p.omega = omega;
  p.theta1 = theta_of(t.X1, t.Z1);
  p.theta2 = theta_of(t.X2, t.Z2);
  p.phi1 = principal_arg(t.Z1);
  p.phi2 = principal_arg(t.Z2);
  p.A1 = t.Z1.real();
  p.B1 = t.Z1.imag();
  p.A2 = t.Z2.real();
  p.B2 = t.Z2.imag();
  const double s = b == Branch::Plus ? 1.0 : -1.0;
  p.tau1 = (s * p.theta1 - p.phi1) / omega;
  p.tau2 = (-s * p.theta2 - p.phi2) / omega;
  return p;
}

CurvePoint shifted(CurvePoint p, int j1, int j2) {
  p.tau1 += kTwoPi * j1 / p.omega;
  p.tau2 += kTwoPi * j2 / p.omega;
  return p;
}

int delta_at(double theta) { return theta > M_PI / 2 ? 1 : 0; }

}  // namespace

CurvePoint curve_point(const CharQuasiPolynomial& cq, double omega, Branch b, int j1, int j2) {
  return shifted(base_point(cq, omega, b), j1, j2);
}

double connection_defect(const CharQuasiPolynomial& cq, const CrossingSet& cs, int j, bool at_b,
                         int j1, int j2) {
  if (j < 1 || j > int(cs.intervals.size())) throw Error(ErrorCode::InvalidParams, "no such interval");
  const auto [a, b] = cs.intervals[j - 1];
  const double w = at_b ? b : a;
  if (!(w > 0)) throw Error(ErrorCode::NotApplicable, "open interval end has no partner");
  const CurvePoint p = curve_point(cq, w, Branch::Plus, j1, j2);
  const CurvePoint m =
      curve_point(cq, w, Branch::Minus, j1 + delta_at(p.theta1), j2 - delta_at(p.theta2));
  return std::hypot(p.tau1 - m.tau1, p.tau2 - m.tau2);
}

std::vector<SwitchingCurve> switching_curves(const CharQuasiPolynomial& cq, const CrossingSet& cs,
                                             double tau1_max, double tau2_max, int samples) {
  if (!(tau1_max > 0 && tau2_max > 0) || samples < 16)
    throw Error(ErrorCode::InvalidParams, "bad switching-curve window");
  std::vector<SwitchingCurve> out;
  const double h_max = 2e-3 * std::max(tau1_max, tau2_max);
  auto inside = [&](const CurvePoint& p) {
    return p.tau1 >= 0 && p.tau2 >= 0 && p.tau1 <= tau1_max && p.tau2 <= tau2_max;
  };
  auto jump = [](const CurvePoint& p, const CurvePoint& q) {
    return std::abs(p.phi1 - q.phi1) > M_PI || std::abs(p.phi2 - q.phi2) > M_PI;
  };

  for (std::size_t jj = 0; jj < cs.intervals.size(); ++jj) {
    const auto [a, b] = cs.intervals[jj];
    const bool open = jj == 0 && cs.open_at_zero;
    std::vector<double> ws;
    if (open) {
      const double w0 = b * 1e-6;
      for (int i = 0; i < samples / 2; ++i) ws.push_back(w0 * std::pow(0.5 * b / w0, double(i) / (samples / 2)));
      for (int i = 0; i <= samples / 2; ++i) ws.push_back(0.5 * b + 0.5 * b * (1 - std::cos(M_PI * i / (samples / 2))) / 2);
    } else {
      for (int i = 0; i <= samples; ++i) ws.push_back(a + (b - a) * (1 - std::cos(M_PI * i / samples)) / 2);
    }

    for (Branch br : {Branch::Plus, Branch::Minus}) {
      std::vector<CurvePoint> base;
      base.reserve(ws.size());
      for (double w : ws) base.push_back(base_point(cq, w, br));

      int j1_lo = std::numeric_limits<int>::max(), j1_hi = std::numeric_limits<int>::min();
      int j2_lo = j1_lo, j2_hi = j1_hi;
      for (const auto& p : base) {
        const double s = p.omega / kTwoPi;
        j1_lo = std::min(j1_lo, int(std::ceil(-p.tau1 * s)));
        j1_hi = std::max(j1_hi, int(std::floor((tau1_max - p.tau1) * s)));
        j2_lo = std::min(j2_lo, int(std::ceil(-p.tau2 * s)));
        j2_hi = std::max(j2_hi, int(std::floor((tau2_max - p.tau2) * s)));
      }

      // Endpoint partners from the connection rule.
      const CurvePoint end_a = base.front(), end_b = base.back();
      const int sgn = br == Branch::Plus ? 1 : -1;
      auto partner = [&](const CurvePoint& e, int j1, int j2) {
        return CurveId{cq.n, int(jj) + 1, br == Branch::Plus ? Branch::Minus : Branch::Plus,
                       j1 + sgn * delta_at(e.theta1), j2 - sgn * delta_at(e.theta2)};
      };

      for (int j1 = j1_lo; j1 <= j1_hi; ++j1)
        for (int j2 = j2_lo; j2 <= j2_hi; ++j2) {
          const CurveId id{cq.n, int(jj) + 1, br, j1, j2};
          std::vector<CurvePoint> piece;
          auto flush = [&] {
            if (piece.size() >= 2) {
              SwitchingCurve c;
              c.id = id;
              c.points = std::move(piece);
              if (!open) c.joins_at_a = partner(end_a, j1, j2);
              c.joins_at_b = partner(end_b, j1, j2);
              out.push_back(std::move(c));
            }
            piece.clear();
          };
          // Boundary point between an inside sample p and an outside sample q.
          auto boundary = [&](const CurvePoint& p, const CurvePoint& q) {
            double wi = p.omega, wo = q.omega;
            for (int it = 0; it < 50; ++it) {
              const double mid = 0.5 * (wi + wo);
              (inside(curve_point(cq, mid, br, j1, j2)) ? wi : wo) = mid;
            }
            return curve_point(cq, wi, br, j1, j2);
          };
          // Adds points between p and q (both inside) until segments are short.
          std::function<void(const CurvePoint&, const CurvePoint&, int)> refine =
              [&](const CurvePoint& p, const CurvePoint& q, int depth) {
                if (depth > 12 || std::hypot(p.tau1 - q.tau1, p.tau2 - q.tau2) <= h_max) return;
                const CurvePoint m = curve_point(cq, 0.5 * (p.omega + q.omega), br, j1, j2);
                if (!inside(m) || jump(p, m) || jump(m, q)) return;
                refine(p, m, depth + 1);
                piece.push_back(m);
                refine(m, q, depth + 1);
              };

          for (std::size_t i = 0; i < base.size(); ++i) {
            const CurvePoint p = shifted(base[i], j1, j2);
            const bool in = inside(p);
            if (i > 0) {
              const CurvePoint prev = shifted(base[i - 1], j1, j2);
              const bool was_in = inside(prev);
              if (jump(prev, p)) {
                flush();
              } else if (was_in && in) {
                refine(prev, p, 0);
              } else if (was_in && !in) {
                piece.push_back(boundary(prev, p));
                flush();
              } else if (!was_in && in) {
                piece.push_back(boundary(p, prev));
              }
            }
            if (in) piece.push_back(p);
          }
          flush();
        }
    }
  }
  return out;
}

DirectionInfo crossing_direction(const CharQuasiPolynomial& cq, const CurvePoint& pt) {
  const cplx s(0.0, pt.omega);
  const cplx d = cq.dD(s, pt.tau1, pt.tau2);
  DirectionInfo info;
  info.R0 = d.real();
  info.I0 = d.imag();
  if (std::norm(d) <= 1e-12) throw Error(ErrorCode::MultipleRoot, "i omega is not a simple root");
  const cplx e1 = std::exp(-s * pt.tau1), e2 = std::exp(-s * pt.tau2);
  const cplx dt1 = -s * e1 * (cq.P(1, s) + cq.P(3, s) * e2);
  const cplx dt2 = -s * e2 * (cq.P(2, s) + cq.P(3, s) * e1);
  Eigen::Matrix2d M, N;
  M << dt1.real(), dt2.real(), dt1.imag(), dt2.imag();
  N << info.R0, -info.I0, info.I0, info.R0;
  const Eigen::Matrix2d Delta = -M.inverse() * N;
  info.delta = Delta.determinant();
  info.tangent = Delta.col(1);
  info.normal = Eigen::Vector2d(info.tangent(1), -info.tangent(0));
  info.direction = info.delta > 0 ? CrossingDirection::TwoMoreRight : CrossingDirection::TwoFewerRight;
  return info;
}

std::optional<cplx> track_root(const CharQuasiPolynomial& cq, cplx s0, double tau1, double tau2,
                               double tol, int max_iter) {
  cplx s = s0;
  for (int it = 0; it < max_iter; ++it) {
    const cplx step = cq.D(s, tau1, tau2) / cq.dD(s, tau1, tau2);
    s -= step;
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return std::nullopt;
    if (std::abs(step) < tol * std::max(1.0, std::abs(s))) return s;
  }
  return std::nullopt;
}

std::pair<double, double> root_shift_across(const CharQuasiPolynomial& cq, const CurvePoint& pt,
                                            double step) {
  const DirectionInfo info = crossing_direction(cq, pt);
  const Eigen::Vector2d nrm = info.normal.normalized();
  const cplx s0(0.0, pt.omega);
  auto re_at = [&](double sign) {
    const auto r = track_root(cq, s0, pt.tau1 + sign * step * nrm(0), pt.tau2 + sign * step * nrm(1));
    if (!r || std::abs(r->imag() - pt.omega) > 0.1 * pt.omega)
      throw Error(ErrorCode::Inconclusive, "root continuation across the curve failed");
    return r->real();
  };
  return {re_at(-1.0), re_at(1.0)};
}

int argument_principle_count(const CharQuasiPolynomial& cq, double tau1, double tau2) {
  const double R = cq.root_bound();
  auto f = [&](cplx s) { return cq.D(s, tau1, tau2); };
  const double floor = 1e-13 * (1 + std::norm(cq.P(0, cplx(R, 0))));
  double total = 0.0;
  std::function<void(cplx, cplx, cplx, cplx, int)> walk = [&](cplx z0, cplx z1, cplx f0, cplx f1, int depth) {
    const double d = std::arg(f1 / f0);
    if (std::abs(d) < 0.3 || depth > 40) {
      if (depth > 40) throw Error(ErrorCode::Inconclusive, "contour passes too close to a root");
      total += d;
      return;
    }
    const cplx zm = 0.5 * (z0 + z1);
    const cplx fm = f(zm);
    if (std::norm(fm) < floor) throw Error(ErrorCode::Inconclusive, "root on the contour");
    walk(z0, zm, f0, fm, depth + 1);
    walk(zm, z1, fm, f1, depth + 1);
  };
  const std::array<cplx, 5> corners{cplx(0, -R), cplx(R, -R), cplx(R, R), cplx(0, R), cplx(0, -R)};
  const int per_edge = 400;
  for (int e = 0; e < 4; ++e) {
    cplx zp = corners[e], fp = f(zp);
    for (int i = 1; i <= per_edge; ++i) {
      const cplx z = corners[e] + (corners[e + 1] - corners[e]) * (double(i) / per_edge);
      const cplx fz = f(z);
      if (std::norm(fz) < floor) throw Error(ErrorCode::Inconclusive, "root on the contour");
      walk(zp, z, fp, fz, 0);
      zp = z;
      fp = fz;
    }
  }
  const double w = total / kTwoPi;
  const long count = std::lround(w);
  if (std::abs(w - count) > 0.05) throw Error(ErrorCode::Inconclusive, "winding number not integral");
  return int(count);
}

DelayAnalysis analyze_delays(const ModelParams& q, const DiffusionParams& diff, double tau1_max,
                             double tau2_max, int samples) {
  const auto eq = primary_equilibrium(q);
  if (!eq) throw Error(ErrorCode::NotApplicable, "no primary interior equilibrium");
  DelayAnalysis da;
  da.tau1_max = tau1_max;
  da.tau2_max = tau2_max;
  for (int n = 0;; ++n) {
    if (n > 100000) throw Error(ErrorCode::Inconclusive, "mode cutoff not reached");
    CharQuasiPolynomial cq = char_quasi_poly(n, q, diff, *eq);
    if (provably_empty_from(cq)) break;
    CrossingSet cs = crossing_set(cq);
    auto curves = switching_curves(cq, cs, tau1_max, tau2_max, samples);
    da.curves.insert(da.curves.end(), std::make_move_iterator(curves.begin()),
                     std::make_move_iterator(curves.end()));
    da.modes.push_back(std::move(cq));
    da.sets.push_back(std::move(cs));
  }
  return da;
}

namespace {

struct Segment {
  Eigen::Vector2d p, q;
  const SwitchingCurve* curve;
  std::size_t index;
};

// Intersection of a->b with segment s; the segment owns its start point but not its end.
std::optional<PathCrossing> intersect(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Segment& s) {
  const Eigen::Vector2d r = b - a, t = s.q - s.p;
  const double den = cross2(r, t);
  const double scale = r.norm() * t.norm();
  if (scale == 0) return std::nullopt;
  const Eigen::Vector2d ap = s.p - a;
  const double tp = cross2(ap, t) / (den == 0 ? 1 : den);
  const double up = cross2(ap, r) / (den == 0 ? 1 : den);
  if (std::abs(den) < 1e-12 * scale) {
    // Parallel: only a problem when collinear and overlapping.
    if (std::abs(cross2(ap, r)) < 1e-12 * r.squaredNorm()) {
      const double t0 = ap.dot(r) / r.squaredNorm(), t1 = (s.q - a).dot(r) / r.squaredNorm();
      if (std::max(t0, t1) >= 0 && std::min(t0, t1) <= 1)
        throw Error(ErrorCode::PathAmbiguous, "path runs along a switching curve");
    }
    return std::nullopt;
  }
  if (tp < 0 || tp > 1 || up < 0 || up >= 1) return std::nullopt;
  if (std::abs(den) < 1e-6 * scale)
    throw Error(ErrorCode::PathAmbiguous, "path grazes a switching curve");
  if (up < 1e-12 || tp < 1e-12 || tp > 1 - 1e-12)
    throw Error(ErrorCode::PathAmbiguous, "path passes through a curve vertex");
  PathCrossing c;
  c.t = tp;
  c.point = a + tp * r;
  // cross(tangent, motion) < 0 means the path moves to the right of the curve.
  const int sign = cross2(t, r) < 0 ? 1 : -1;
  c.change = 2 * sign * (s.curve->id.branch == Branch::Plus ? 1 : -1);
  c.curve = s.curve->id;
  return c;
}

void for_each_segment(const std::vector<SwitchingCurve>& curves, const std::function<void(const Segment&)>& f) {
  for (const auto& c : curves)
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i)
      f(Segment{Eigen::Vector2d(c.points[i].tau1, c.points[i].tau2),
                Eigen::Vector2d(c.points[i + 1].tau1, c.points[i + 1].tau2), &c, i});
}

// Uniform bins over the window holding the segments whose bounding boxes touch them.
class SegmentGrid {
public:
  SegmentGrid(const std::vector<SwitchingCurve>& curves, double w1, double w2, int bins)
      : w1_(w1), w2_(w2), nb_(bins), cells_(std::size_t(bins) * bins) {
    for_each_segment(curves, [&](const Segment& s) {
      segs_.push_back(s);
      const auto [i0, j0] = bin(s.p.cwiseMin(s.q));
      const auto [i1, j1] = bin(s.p.cwiseMax(s.q));
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) cells_[std::size_t(i) * nb_ + j].push_back(segs_.size() - 1);
    });
    stamp_.assign(segs_.size(), 0);
  }

  template <typename F>
  void visit(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi, F&& f) {
    ++epoch_;
    const auto [i0, j0] = bin(lo);
    const auto [i1, j1] = bin(hi);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j)
        for (std::size_t id : cells_[std::size_t(i) * nb_ + j]) {
          if (stamp_[id] == epoch_) continue;
          stamp_[id] = epoch_;
          f(segs_[id], id);
        }
  }

  const std::vector<Segment>& segments() const { return segs_; }
  const std::vector<std::size_t>& cell(int i, int j) const { return cells_[std::size_t(i) * nb_ + j]; }
  int bins() const { return nb_; }

private:
  std::pair<int, int> bin(const Eigen::Vector2d& x) const {
    const int i = std::clamp(int(std::floor(x(0) / w1_ * nb_)), 0, nb_ - 1);
    const int j = std::clamp(int(std::floor(x(1) / w2_ * nb_)), 0, nb_ - 1);
    return {i, j};
  }

  double w1_, w2_;
  int nb_;
  std::vector<Segment> segs_;
  std::vector<std::vector<std::size_t>> cells_;
  std::vector<unsigned> stamp_;
  unsigned epoch_ = 0;
};

int sum_changes(const std::vector<PathCrossing>& cs) {
  int total = 0;
  for (const auto& c : cs) total += c.change;
  return total;
}

}  // namespace

std::vector<PathCrossing> crossings_along(const std::vector<SwitchingCurve>& curves,
                                          const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  std::vector<PathCrossing> out;
  const Eigen::Vector2d lo = a.cwiseMin(b), hi = a.cwiseMax(b);
  for (const auto& c : curves) {
    Eigen::Vector2d clo(INFINITY, INFINITY), chi(-INFINITY, -INFINITY);
    for (const auto& p : c.points) {
      clo = clo.cwiseMin(Eigen::Vector2d(p.tau1, p.tau2));
      chi = chi.cwiseMax(Eigen::Vector2d(p.tau1, p.tau2));
    }
    if ((chi.array() < lo.array()).any() || (clo.array() > hi.array()).any()) continue;
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
      const Segment s{Eigen::Vector2d(c.points[i].tau1, c.points[i].tau2),
                      Eigen::Vector2d(c.points[i + 1].tau1, c.points[i + 1].tau2), &c, i};
      if (auto x = intersect(a, b, s)) out.push_back(*x);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.t < y.t; });
  return out;
}

int path_count(const std::vector<SwitchingCurve>& curves, double tau1, double tau2) {
  const Eigen::Vector2d o(0, 0), target(tau1, tau2);
  try {
    return sum_changes(crossings_along(curves, o, target));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PathAmbiguous) throw;
  }
  // Two-leg detours through a point off the direct line.
  for (double f : {0.37, 0.61, 0.83}) {
    const Eigen::Vector2d mid(tau1 * f, tau2 * (1 - f) + 1e-3);
    try {
      return sum_changes(crossings_along(curves, o, mid)) + sum_changes(crossings_along(curves, mid, target));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PathAmbiguous) throw;
    }
  }
  throw Error(ErrorCode::PathAmbiguous, "no unambiguous path to the target");
}

Eigen::Vector2d StabilityMap::cell_center(int i, int j) const {
  return {(i + 0.5) * tau1_max / counts.rows(), (j + 0.5) * tau2_max / counts.cols()};
}

StabilityMap stability_map(const DelayAnalysis& da, int nx, int ny) {
  if (nx < 1 || ny < 1) throw Error(ErrorCode::InvalidParams, "empty stability grid");
  for (const auto& m : da.modes)
    if (!m.report.below_hopf || !m.report.diffusion_stable)
      throw Error(ErrorCode::NotApplicable, "delay-free state is not stable: " + m.report.summary());
  StabilityMap map;
  map.tau1_max = da.tau1_max;
  map.tau2_max = da.tau2_max;
  map.counts = Eigen::MatrixXi::Zero(nx, ny);
  SegmentGrid grid(da.curves, da.tau1_max, da.tau2_max, std::max(nx, ny));

  auto step = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) -> std::optional<int> {
    int total = 0;
    try {
      grid.visit(a.cwiseMin(b), a.cwiseMax(b), [&](const Segment& s, std::size_t) {
        if (auto x = intersect(a, b, s)) total += x->change;
      });
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PathAmbiguous) throw;
      return std::nullopt;
    }
    return total;
  };

  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const Eigen::Vector2d c = map.cell_center(i, j);
      std::optional<int> v;
      if (j > 0) {
        if (auto d = step(map.cell_center(i, j - 1), c)) v = map.counts(i, j - 1) + *d;
      }
      if (!v && i > 0) {
        if (auto d = step(map.cell_center(i - 1, j), c)) v = map.counts(i - 1, j) + *d;
        if (j > 0) ++map.reroutes;
      }
      if (!v) {
        if (i > 0 || j > 0) ++map.reroutes;
        v = path_count(da.curves, c(0), c(1));
      }
      map.counts(i, j) = *v;
    }
  return map;
}

std::vector<DoubleHopfPoint> double_hopf_points(const DelayAnalysis& da) {
  std::map<int, const CharQuasiPolynomial*> by_mode;
  for (const auto& m : da.modes) by_mode[m.n] = &m;
  SegmentGrid grid(da.curves, da.tau1_max, da.tau2_max, 128);
  const auto& segs = grid.segments();

  std::vector<DoubleHopfPoint> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (int bi = 0; bi < grid.bins(); ++bi)
    for (int bj = 0; bj < grid.bins(); ++bj) {
      const auto& cell = grid.cell(bi, bj);
      for (std::size_t x = 0; x < cell.size(); ++x)
        for (std::size_t y = x + 1; y < cell.size(); ++y) {
          const Segment& s = segs[cell[x]];
          const Segment& t = segs[cell[y]];
          if (s.curve == t.curve) continue;
          if (!seen.insert({std::min(cell[x], cell[y]), std::max(cell[x], cell[y])}).second) continue;
          const Eigen::Vector2d r = s.q - s.p, u = t.q - t.p;
          const double den = cross2(r, u);
          if (den == 0) continue;
          const Eigen::Vector2d d = t.p - s.p;
          const double a = cross2(d, u) / den, b = cross2(d, r) / den;
          if (a < 0 || a > 1 || b < 0 || b > 1) continue;

          // Newton on tau_s(w_s) = tau_t(w_t).
          const auto& cs = *s.curve;
          const auto& ct = *t.curve;
          const auto& ps = cs.points[s.index];
          const auto& ps1 = cs.points[s.index + 1];
          const auto& pt = ct.points[t.index];
          const auto& pt1 = ct.points[t.index + 1];
          double ws = ps.omega + a * (ps1.omega - ps.omega);
          double wt = pt.omega + b * (pt1.omega - pt.omega);
          if (std::abs(ws - wt) < 1e-6 && cs.id.n == ct.id.n) continue;  // same frequency: curves joined, not HH
          const auto& qs = *by_mode.at(cs.id.n);
          const auto& qt = *by_mode.at(ct.id.n);
          bool ok = false;
          CurvePoint A, B;
          try {
            for (int it = 0; it < 50; ++it) {
              A = curve_point(qs, ws, cs.id.branch, cs.id.j1, cs.id.j2);
              B = curve_point(qt, wt, ct.id.branch, ct.id.j1, ct.id.j2);
              const Eigen::Vector2d res(A.tau1 - B.tau1, A.tau2 - B.tau2);
              if (res.norm() < 1e-10) {
                ok = true;
                break;
              }
              const double hs = 1e-7 * ws, ht = 1e-7 * wt;
              auto tau_at = [](const CharQuasiPolynomial& cq, const CurveId& id, double w) {
                const CurvePoint p = curve_point(cq, w, id.branch, id.j1, id.j2);
                return Eigen::Vector2d(p.tau1, p.tau2);
              };
              Eigen::Matrix2d J;
              J.col(0) = (tau_at(qs, cs.id, ws + hs) - tau_at(qs, cs.id, ws - hs)) / (2 * hs);
              J.col(1) = -(tau_at(qt, ct.id, wt + ht) - tau_at(qt, ct.id, wt - ht)) / (2 * ht);
              const Eigen::Vector2d dw = J.fullPivLu().solve(-res);
              ws += dw(0);
              wt += dw(1);
            }
          } catch (const Error&) {
            ok = false;
          }
          if (!ok) continue;
          DoubleHopfPoint h;
          h.tau1 = A.tau1;
          h.tau2 = A.tau2;
          h.omega1 = ws;
          h.omega2 = wt;
          h.n1 = cs.id.n;
          h.n2 = ct.id.n;
          h.curve1 = cs.id;
          h.curve2 = ct.id;
          if (h.omega1 > h.omega2) {
            std::swap(h.omega1, h.omega2);
            std::swap(h.n1, h.n2);
            std::swap(h.curve1, h.curve2);
          }
          if (h.tau1 < 0 || h.tau2 < 0 || h.tau1 > da.tau1_max || h.tau2 > da.tau2_max) continue;
          const bool dup = std::any_of(out.begin(), out.end(), [&](const DoubleHopfPoint& o) {
            return std::hypot(o.tau1 - h.tau1, o.tau2 - h.tau2) < 1e-7 &&
                   std::abs(o.omega1 - h.omega1) < 1e-7 && std::abs(o.omega2 - h.omega2) < 1e-7;
          });
          if (!dup) out.push_back(h);
        }
    }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.tau1 + x.tau2 < y.tau1 + y.tau2;
  });
  return out;
}

}  // namespace coopallee
