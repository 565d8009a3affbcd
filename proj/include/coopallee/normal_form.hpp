#pragma once

#include <Eigen/Core>

#include <complex>
#include <string>
#include <vector>

namespace coopallee {

// Cubic double-Hopf normal-form coefficients. Only real parts enter the amplitude system.
struct NormalFormCoeffs {
  std::complex<double> B11, B21, B13, B23;
  std::complex<double> B2100, B1011, B0021, B1110;

  // Accepts numbers, [re, im] pairs or {"re": .., "im": ..} objects keyed by coefficient name.
  static NormalFormCoeffs from_json(const std::string& text);
};

// Amplitude system
//   r1' = r1 (nu1 + r1^2 + b r2^2)
//   r2' = r2 (nu2 + c r1^2 + d r2^2)
// written in time scaled by eps1; the original time runs backwards when eps1 = -1.
struct UnfoldingParams {
  double nu1 = 0.0;
  double nu2 = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 1.0;
  int eps1 = 1;
  int eps2 = 1;
};

// Linear part: (nu1, nu2) = A (sigma1, sigma2).
Eigen::Matrix2d unfolding_matrix(const NormalFormCoeffs& nf);

UnfoldingParams unfolding_from_coeffs(const NormalFormCoeffs& nf, double sigma1, double sigma2);

enum class FixedPointKind { Trivial, PureMode1, PureMode2, Mixed };
enum class AmplitudeStability { Stable, Unstable, Saddle, NonHyperbolic };

const char* to_string(FixedPointKind k);
const char* to_string(AmplitudeStability s);

struct AmplitudeFixedPoint {
  FixedPointKind kind = FixedPointKind::Trivial;
  double r1 = 0.0;
  double r2 = 0.0;
  Eigen::Vector2cd eigenvalues;   // of the amplitude system as written
  AmplitudeStability stability_as_written = AmplitudeStability::NonHyperbolic;
  AmplitudeStability stability = AmplitudeStability::NonHyperbolic;  // in the original time direction
  double residual = 0.0;
};

std::vector<AmplitudeFixedPoint> amplitude_fixed_points(const UnfoldingParams& up);

struct Window {
  double s1_lo = -1.0, s1_hi = 1.0;
  double s2_lo = -1.0, s2_hi = 1.0;
};

// Open sector of the (sigma1, sigma2) plane bounded by two critical rays from the origin.
struct BifurcationRegion {
  std::string name;                    // D1, D2, ... counterclockwise from the trivial-stable one
  double angle_lo = 0.0;               // sigma-plane angles of the bounding rays, angle_lo < angle_hi
  double angle_hi = 0.0;
  Eigen::Vector2d sample;              // unit vector inside the sector
  std::vector<FixedPointKind> stable;  // attractors in original time
  std::vector<std::pair<FixedPointKind, AmplitudeStability>> portrait;  // every fixed point
  std::vector<Eigen::Vector2d> polygon;  // sector clipped to the window
  std::string inventory() const;
};

struct CriticalRay {
  std::string what;  // "nu1=0", "nu2=0", "pure1 exchange", "pure2 exchange"
  Eigen::Vector2d direction;  // unit vector in the sigma plane
};

struct BifurcationSet {
  Window window;
  std::vector<CriticalRay> rays;
  std::vector<BifurcationRegion> regions;
  const BifurcationRegion& region_of(const Eigen::Vector2d& sigma) const;
};

// The amplitude system is homogeneous in (nu, r^2), so the partition consists of sectors.
// Adjacent sectors with identical fixed-point portraits are merged.
BifurcationSet bifurcation_set(const NormalFormCoeffs& nf, const Window& window);

}  // namespace coopallee
