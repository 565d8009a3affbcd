#pragma once

#include "coopallee/equilibria.hpp"

#include <optional>
#include <vector>

namespace coopallee {

// Trace and determinant of the linearization at E* restricted to cos(n x / l).
struct ModeLinearization {
  int n = 0;
  double T = 0.0;
  double J = 0.0;
};

struct TuringSegment {
  int n = 0;
  double d1_lo = 0.0;
  double d1_hi = 0.0;
  std::vector<double> d1;
  std::vector<double> d2;
};

struct TuringCurve {
  std::vector<TuringSegment> segments;
  std::vector<double> junctions;
  int n_used = 0;  // highest mode scanned after the cutoff check

  // Pointwise value of the boundary, -inf outside the sampled range or where no mode is admissible.
  double at(double d1) const;
};

struct TuringHopfPoint {
  double p = 0.0;
  double d2 = 0.0;
  double omega = 0.0;
  int n = 0;
};

ModeLinearization mode_coefficients(int n, const ModelParams& q, const DiffusionParams& diff,
                                    const Equilibrium& eq);

// d2 below which mode n is destabilized; nullopt when no d2 > 0 can destabilize it.
// Requires u* > (a+1)/2, i.e. p below the top point.
std::optional<double> d2_critical(int n, double d1, const ModelParams& q, const Equilibrium& eq,
                                  double l = 2.0);

// Pointwise maximum over modes 1..n of d2_critical, together with the maximizing mode.
std::optional<std::pair<int, double>> turing_envelope(double d1, const ModelParams& q,
                                                      const Equilibrium& eq, int n_max,
                                                      double l = 2.0);

TuringCurve turing_curve(const ModelParams& q, const Equilibrium& eq, double d1_lo, double d1_hi,
                         int n_max = 64, int samples = 400, double l = 2.0);

// Smallest mode index beyond which J_n > 0 holds for every n at the given d2.
int mode_cutoff(const ModelParams& q, const Equilibrium& eq, double d2, double l = 2.0);

// First mode with T_n >= 0 or J_n <= 0, scanning up to the automatic cutoff.
std::optional<int> first_unstable_mode(const ModelParams& q, const DiffusionParams& diff,
                                       const Equilibrium& eq);

std::optional<TuringHopfPoint> turing_hopf_point(const ModelParams& family, double d1, int n,
                                                 double l = 2.0);

}  // namespace coopallee
