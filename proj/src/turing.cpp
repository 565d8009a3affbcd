#include "coopallee/turing.hpp"

#include "coopallee/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coopallee {

namespace {

void require_primary(const Equilibrium& eq) {
  if (eq.kind != EquilibriumKind::InteriorPrimary)
    throw Error(ErrorCode::NotApplicable, "mode analysis needs the primary interior equilibrium");
}

// m p c u* v*, the cross-diffusion-like coupling in J_n.
double coupling(const ModelParams& q, const Equilibrium& eq) {
  return q.m * q.p * q.c * eq.u() * eq.v();
}

}  // namespace

ModeLinearization mode_coefficients(int n, const ModelParams& q, const DiffusionParams& diff,
                                    const Equilibrium& eq) {
  require_primary(eq);
  if (n < 0) throw Error(ErrorCode::InvalidParams, "mode index must be nonnegative");
  const double u = eq.u();
  const double k = double(n) * n / (diff.l * diff.l);
  ModeLinearization out;
  out.n = n;
  out.T = -(diff.d1 + diff.d2) * k + eq.trace;
  out.J = diff.d1 * diff.d2 * k * k - q.r * u * (1 + q.a - 2 * u) * diff.d2 * k -
          coupling(q, eq) * diff.d1 * k + eq.det;
  return out;
}

std::optional<double> d2_critical(int n, double d1, const ModelParams& q, const Equilibrium& eq,
                                  double l) {
  require_primary(eq);
  if (n < 1) throw Error(ErrorCode::InvalidParams, "d2_critical needs n >= 1");
  const double u = eq.u();
  if (!(u > (1 + q.a) / 2))
    throw Error(ErrorCode::DomainError, "d2_critical needs u* > (a+1)/2");
  const double k = double(n) * n / (l * l);
  const double num = coupling(q, eq) * d1 * k - eq.det;
  if (num <= 0) return std::nullopt;
  const double den = d1 * k * k + q.r * u * (2 * u - 1 - q.a) * k;
  return num / den;
}

std::optional<std::pair<int, double>> turing_envelope(double d1, const ModelParams& q,
                                                      const Equilibrium& eq, int n_max, double l) {
  std::optional<std::pair<int, double>> best;
  for (int n = 1; n <= n_max; ++n) {
    const auto d2 = d2_critical(n, d1, q, eq, l);
    if (d2 && (!best || *d2 > best->second)) best = std::make_pair(n, *d2);
  }
  return best;
}

double TuringCurve::at(double d1) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : segments) {
    if (d1 < s.d1_lo || d1 > s.d1_hi || s.d1.size() < 2) continue;
    const auto it = std::upper_bound(s.d1.begin(), s.d1.end(), d1);
    const std::size_t i = std::clamp<std::size_t>(it - s.d1.begin(), 1, s.d1.size() - 1);
    const double t = (d1 - s.d1[i - 1]) / (s.d1[i] - s.d1[i - 1]);
    best = std::max(best, s.d2[i - 1] + t * (s.d2[i] - s.d2[i - 1]));
  }
  return best;
}

int mode_cutoff(const ModelParams& q, const Equilibrium& eq, double d2, double l) {
  // For k = n^2/l^2 > m p c u* v* / d2 the d1-terms of J_n are positive and the rest is too.
  const double kmax = coupling(q, eq) / d2;
  return int(std::ceil(l * std::sqrt(kmax))) + 1;
}

std::optional<int> first_unstable_mode(const ModelParams& q, const DiffusionParams& diff,
                                       const Equilibrium& eq) {
  const int cutoff = mode_cutoff(q, eq, diff.d2, diff.l);
  for (int n = 0; n <= cutoff; ++n) {
    const auto ml = mode_coefficients(n, q, diff, eq);
    if (ml.T >= 0 || ml.J <= 0) return n;
  }
  return std::nullopt;
}

TuringCurve turing_curve(const ModelParams& q, const Equilibrium& eq, double d1_lo, double d1_hi,
                         int n_max, int samples, double l) {
  if (!(d1_lo > 0 && d1_hi > d1_lo) || samples < 2 || n_max < 1)
    throw Error(ErrorCode::InvalidParams, "bad turing_curve range");

  std::vector<double> d1s(samples);
  for (int i = 0; i < samples; ++i) d1s[i] = d1_lo + (d1_hi - d1_lo) * i / (samples - 1);

  // Any mode above n has d2^T below coupling/k_n; enlarge n_max until that bound
  // sits under the envelope everywhere it is defined.
  int n_used = n_max;
  std::vector<std::optional<std::pair<int, double>>> env(samples);
  for (;;) {
    bool sound = true;
    const double k_next = double(n_used + 1) * (n_used + 1) / (l * l);
    const double tail = coupling(q, eq) / k_next;
    for (int i = 0; i < samples; ++i) {
      env[i] = turing_envelope(d1s[i], q, eq, n_used, l);
      if (env[i] && env[i]->second < tail) sound = false;
    }
    if (sound || n_used >= (1 << 14)) break;
    n_used *= 2;
  }

  TuringCurve curve;
  curve.n_used = n_used;
  auto value = [&](int n, double d1) {
    const auto v = d2_critical(n, d1, q, eq, l);
    return v ? *v : -std::numeric_limits<double>::infinity();
  };

  TuringSegment* cur = nullptr;
  for (int i = 0; i < samples; ++i) {
    if (!env[i]) {
      cur = nullptr;
      continue;
    }
    const int n = env[i]->first;
    if (cur && cur->n != n) {
      // Walk the junctions between samples one mode change at a time; the argmax can skip
      // over a mode whose segment is narrower than the sample spacing.
      double lo = d1s[i - 1];
      while (cur->n != n) {
        const int n0 = cur->n;
        double a = lo, b = d1s[i];
        while (b - a > 1e-8) {
          const double mid = 0.5 * (a + b);
          const auto e = turing_envelope(mid, q, eq, n_used, l);
          (e && e->first == n0 ? a : b) = mid;
        }
        const double j = 0.5 * (a + b);
        const auto next = turing_envelope(b, q, eq, n_used, l);
        if (!next) break;
        curve.junctions.push_back(j);
        cur->d1.push_back(j);
        cur->d2.push_back(value(n0, j));
        cur->d1_hi = j;
        curve.segments.push_back({next->first, j, j, {j}, {value(next->first, j)}});
        cur = &curve.segments.back();
        lo = b;
      }
    } else if (!cur) {
      curve.segments.push_back({n, d1s[i], d1s[i], {}, {}});
      cur = &curve.segments.back();
    }
    cur->d1.push_back(d1s[i]);
    cur->d2.push_back(env[i]->second);
    cur->d1_hi = d1s[i];
  }
  if (curve.segments.empty()) throw Error(ErrorCode::EmptyCurve, "no admissible mode in range");
  return curve;
}

std::optional<TuringHopfPoint> turing_hopf_point(const ModelParams& family, double d1, int n,
                                                 double l) {
  const HopfPoint h = hopf_point(family);
  const ModelParams q = family.with_p(h.p);
  const auto eq = primary_equilibrium(q);
  if (!eq) throw Error(ErrorCode::NotApplicable, "no primary equilibrium at p_H");
  const auto d2 = d2_critical(n, d1, q, *eq, l);
  if (!d2) return std::nullopt;
  return TuringHopfPoint{h.p, *d2, h.omega, n};
}

}  // namespace coopallee
