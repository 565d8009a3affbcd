#pragma once

#include "coopallee/equilibria.hpp"

#include <Eigen/Core>

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace coopallee {

using cplx = std::complex<double>;

// Standing assumptions of the two-delay analysis; reported, never thrown.
struct PreconditionReport {
  bool below_hopf = false;        // tr J(E*) < 0
  bool diffusion_stable = false;  // no Turing mode at zero delay
  bool degree_condition = false;  // deg P0 >= deg P1, P2, P3
  bool nonzero_at_origin = false; // sum of P_i(0) != 0
  bool coprime = false;
  bool limit_condition = false;   // sum |P_i / P0| -> 0 < 1 at infinity

  bool ok() const {
    return below_hopf && diffusion_stable && degree_condition && nonzero_at_origin && coprime &&
           limit_condition;
  }
  std::string summary() const;
};

// D_n(s) = P0(s) + P1(s) e^{-s tau1} + P2(s) e^{-s tau2} + P3(s) e^{-s (tau1 + tau2)}.
struct CharQuasiPolynomial {
  int n = 0;
  double l = 2.0;
  double k = 0.0;  // n^2 / l^2
  double d1 = 0.0, d2 = 0.0;
  double a11 = 0.0, a12 = 0.0, b11 = 0.0, c21 = 0.0, c22 = 0.0;
  std::array<std::array<double, 3>, 4> coeffs{};  // ascending powers
  PreconditionReport report;

  cplx P(int i, cplx s) const;
  cplx dP(int i, cplx s) const;
  cplx D(cplx s, double tau1, double tau2) const;
  cplx dD(cplx s, double tau1, double tau2) const;
  // Every root with Re s >= 0 has |s| below this, for any delays.
  double root_bound() const;
};

CharQuasiPolynomial char_quasi_poly(int n, const ModelParams& q, const DiffusionParams& diff,
                                    const Equilibrium& eq);

// Quantities of the crossing condition at s = i omega.
struct CrossingTerms {
  double X1 = 0.0;  // |P0|^2 + |P1|^2 - |P2|^2 - |P3|^2
  double X2 = 0.0;  // |P0|^2 - |P1|^2 + |P2|^2 - |P3|^2
  cplx Z1;          // P2 conj(P3) - P0 conj(P1)
  cplx Z2;          // P1 conj(P3) - P0 conj(P2)
  double F1() const { return X1 * X1 - 4 * std::norm(Z1); }
  double F2() const { return X2 * X2 - 4 * std::norm(Z2); }
};
CrossingTerms crossing_terms(const CharQuasiPolynomial& cq, double omega);

struct CrossingSet {
  int n = 0;
  std::vector<std::pair<double, double>> intervals;
  bool open_at_zero = false;  // first interval is (0, b]
  double omega_max = 0.0;     // no crossing above this frequency
};

CrossingSet crossing_set(const CharQuasiPolynomial& cq, int per_decade = 4000);

enum class Branch { Plus, Minus };
const char* to_string(Branch b);

struct CurvePoint {
  double omega = 0.0;
  double tau1 = 0.0, tau2 = 0.0;
  double theta1 = 0.0, theta2 = 0.0;
  double phi1 = 0.0, phi2 = 0.0;
  double A1 = 0.0, B1 = 0.0, A2 = 0.0, B2 = 0.0;
};

struct CurveId {
  int n = 0;
  int j = 1;  // 1-based interval index within the crossing set
  Branch branch = Branch::Plus;
  int j1 = 0, j2 = 0;
  bool operator==(const CurveId&) const = default;
};

struct SwitchingCurve {
  CurveId id;
  std::vector<CurvePoint> points;  // increasing omega
  // Curves joined at the interval ends by the endpoint rule (absent at an open end).
  std::optional<CurveId> joins_at_a, joins_at_b;
};

// Point on a curve; throws DomainError when omega is outside the crossing set.
CurvePoint curve_point(const CharQuasiPolynomial& cq, double omega, Branch b, int j1, int j2);

std::vector<SwitchingCurve> switching_curves(const CharQuasiPolynomial& cq, const CrossingSet& cs,
                                             double tau1_max, double tau2_max,
                                             int samples = 4000);

// Distance between the Plus(j1, j2) end and its Minus partner at an interval end.
double connection_defect(const CharQuasiPolynomial& cq, const CrossingSet& cs, int j, bool at_b,
                         int j1, int j2);

enum class CrossingDirection { TwoMoreRight, TwoFewerRight };
const char* to_string(CrossingDirection d);

struct DirectionInfo {
  CrossingDirection direction = CrossingDirection::TwoMoreRight;
  double delta = 0.0;
  double R0 = 0.0, I0 = 0.0;
  Eigen::Vector2d tangent = Eigen::Vector2d::Zero();  // d(tau1, tau2) / d omega along the curve
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();   // right-hand normal
};

DirectionInfo crossing_direction(const CharQuasiPolynomial& cq, const CurvePoint& pt);

// Newton continuation of a characteristic root from s0 at fixed delays.
std::optional<cplx> track_root(const CharQuasiPolynomial& cq, cplx s0, double tau1, double tau2,
                               double tol = 1e-13, int max_iter = 60);

// Re of the root continued from i omega after stepping +-step along the right normal.
std::pair<double, double> root_shift_across(const CharQuasiPolynomial& cq, const CurvePoint& pt,
                                            double step = 1e-3);

// Number of roots with Re s > 0, from the winding of D_n around [0, R] x [-R, R].
int argument_principle_count(const CharQuasiPolynomial& cq, double tau1, double tau2);

struct DelayAnalysis {
  double tau1_max = 0.0, tau2_max = 0.0;
  std::vector<CharQuasiPolynomial> modes;
  std::vector<CrossingSet> sets;
  std::vector<SwitchingCurve> curves;
};

// Modes from n = 0 up to the first index beyond which every crossing set is provably empty.
DelayAnalysis analyze_delays(const ModelParams& q, const DiffusionParams& diff, double tau1_max,
                             double tau2_max, int samples = 4000);

struct PathCrossing {
  double t = 0.0;  // position along the path segment
  Eigen::Vector2d point;
  int change = 0;  // +2 or -2 in the unstable root count
  CurveId curve;
};

// Signed curve crossings along the straight segment a -> b, ordered by t.
std::vector<PathCrossing> crossings_along(const std::vector<SwitchingCurve>& curves,
                                          const Eigen::Vector2d& a, const Eigen::Vector2d& b);

// Unstable root count at (tau1, tau2) accumulated from the origin.
int path_count(const std::vector<SwitchingCurve>& curves, double tau1, double tau2);

struct StabilityMap {
  double tau1_max = 0.0, tau2_max = 0.0;
  Eigen::MatrixXi counts;  // (i, j) -> cell centered at cell_center(i, j)
  int reroutes = 0;

  Eigen::Vector2d cell_center(int i, int j) const;
};

StabilityMap stability_map(const DelayAnalysis& da, int nx, int ny);

struct DoubleHopfPoint {
  double tau1 = 0.0, tau2 = 0.0;
  double omega1 = 0.0, omega2 = 0.0;  // omega1 <= omega2
  int n1 = 0, n2 = 0;
  CurveId curve1, curve2;
};

std::vector<DoubleHopfPoint> double_hopf_points(const DelayAnalysis& da);

}  // namespace coopallee
