#include "coopallee/normal_form.hpp"

#include "coopallee/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace coopallee {

namespace {

std::complex<double> read_coeff(const nlohmann::json& doc, const char* name) {
  if (!doc.contains(name)) throw Error(ErrorCode::ConfigError, std::string("missing coefficient ") + name);
  const auto& v = doc.at(name);
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  if (v.is_object() && v.contains("re") && v.at("re").is_number())
    return {v.at("re").get<double>(), v.value("im", 0.0)};
  throw Error(ErrorCode::ConfigError, std::string("coefficient ") + name + " is not a number");
}

int sign_of(double x, const char* name) {
  if (!(std::abs(x) > 0.0) || !std::isfinite(x))
    throw Error(ErrorCode::DegenerateRescale, std::string("Re ") + name + " must be finite and nonzero");
  return x > 0 ? 1 : -1;
}

AmplitudeStability classify(const Eigen::Vector2cd& ev, double scale) {
  const double tol = 1e-12 * std::max(1.0, scale);
  int neg = 0, pos = 0;
  for (int i = 0; i < 2; ++i) {
    if (ev(i).real() < -tol) ++neg;
    else if (ev(i).real() > tol) ++pos;
  }
  if (neg == 2) return AmplitudeStability::Stable;
  if (pos == 2) return AmplitudeStability::Unstable;
  if (neg == 1 && pos == 1) return AmplitudeStability::Saddle;
  return AmplitudeStability::NonHyperbolic;
}

AmplitudeFixedPoint make_point(const UnfoldingParams& up, FixedPointKind kind, double r1, double r2) {
  AmplitudeFixedPoint fp;
  fp.kind = kind;
  fp.r1 = r1;
  fp.r2 = r2;
  const double s1 = r1 * r1, s2 = r2 * r2;
  Eigen::Matrix2d J;
  J << up.nu1 + 3 * s1 + up.b * s2, 2 * up.b * r1 * r2,
       2 * up.c * r1 * r2, up.nu2 + up.c * s1 + 3 * up.d * s2;
  fp.eigenvalues = J.eigenvalues();
  const double scale = J.cwiseAbs().maxCoeff();
  fp.stability_as_written = classify(fp.eigenvalues, scale);
  fp.stability = classify(double(up.eps1) * fp.eigenvalues, scale);
  fp.residual = std::abs(r1 * (up.nu1 + s1 + up.b * s2)) + std::abs(r2 * (up.nu2 + up.c * s1 + up.d * s2));
  return fp;
}

double wrap(double a) {
  a = std::fmod(a, 2 * M_PI);
  return a < 0 ? a + 2 * M_PI : a;
}

// Distance from the origin to the window boundary along a unit direction.
double exit_distance(const Window& w, const Eigen::Vector2d& dir) {
  double t = INFINITY;
  if (dir(0) > 0) t = std::min(t, w.s1_hi / dir(0));
  if (dir(0) < 0) t = std::min(t, w.s1_lo / dir(0));
  if (dir(1) > 0) t = std::min(t, w.s2_hi / dir(1));
  if (dir(1) < 0) t = std::min(t, w.s2_lo / dir(1));
  return t;
}

Eigen::Vector2d unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

}  // namespace

NormalFormCoeffs NormalFormCoeffs::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("normal-form coefficients: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "normal-form coefficients must be an object");
  NormalFormCoeffs nf;
  nf.B11 = read_coeff(doc, "B11");
  nf.B21 = read_coeff(doc, "B21");
  nf.B13 = read_coeff(doc, "B13");
  nf.B23 = read_coeff(doc, "B23");
  nf.B2100 = read_coeff(doc, "B2100");
  nf.B1011 = read_coeff(doc, "B1011");
  nf.B0021 = read_coeff(doc, "B0021");
  nf.B1110 = read_coeff(doc, "B1110");
  return nf;
}

const char* to_string(FixedPointKind k) {
  switch (k) {
    case FixedPointKind::Trivial: return "trivial";
    case FixedPointKind::PureMode1: return "pure1";
    case FixedPointKind::PureMode2: return "pure2";
    case FixedPointKind::Mixed: return "mixed";
  }
  return "?";
}

const char* to_string(AmplitudeStability s) {
  switch (s) {
    case AmplitudeStability::Stable: return "stable";
    case AmplitudeStability::Unstable: return "unstable";
    case AmplitudeStability::Saddle: return "saddle";
    case AmplitudeStability::NonHyperbolic: return "nonhyperbolic";
  }
  return "?";
}

Eigen::Matrix2d unfolding_matrix(const NormalFormCoeffs& nf) {
  const int eps1 = sign_of(nf.B2100.real(), "B2100");
  sign_of(nf.B0021.real(), "B0021");
  Eigen::Matrix2d A;
  A << nf.B11.real(), nf.B21.real(), nf.B13.real(), nf.B23.real();
  return double(eps1) * A;
}

UnfoldingParams unfolding_from_coeffs(const NormalFormCoeffs& nf, double sigma1, double sigma2) {
  UnfoldingParams up;
  up.eps1 = sign_of(nf.B2100.real(), "B2100");
  up.eps2 = sign_of(nf.B0021.real(), "B0021");
  const Eigen::Vector2d nu = unfolding_matrix(nf) * Eigen::Vector2d(sigma1, sigma2);
  up.nu1 = nu(0);
  up.nu2 = nu(1);
  up.b = up.eps1 * up.eps2 * nf.B1011.real() / nf.B0021.real();
  up.c = nf.B1110.real() / nf.B2100.real();
  up.d = up.eps1 * up.eps2;
  return up;
}

std::vector<AmplitudeFixedPoint> amplitude_fixed_points(const UnfoldingParams& up) {
  std::vector<AmplitudeFixedPoint> out;
  out.push_back(make_point(up, FixedPointKind::Trivial, 0.0, 0.0));
  if (up.nu1 < 0) out.push_back(make_point(up, FixedPointKind::PureMode1, std::sqrt(-up.nu1), 0.0));
  if (up.nu2 / up.d < 0) out.push_back(make_point(up, FixedPointKind::PureMode2, 0.0, std::sqrt(-up.nu2 / up.d)));
  // nu1 + s1 + b s2 = 0, nu2 + c s1 + d s2 = 0
  const double det = up.d - up.b * up.c;
  if (det != 0.0) {
    const double s1 = (-up.nu1 * up.d + up.b * up.nu2) / det;
    const double s2 = (-up.nu2 + up.c * up.nu1) / det;
    if (s1 > 0 && s2 > 0) out.push_back(make_point(up, FixedPointKind::Mixed, std::sqrt(s1), std::sqrt(s2)));
  }
  return out;
}

std::string BifurcationRegion::inventory() const {
  if (stable.empty()) return "none";
  std::string s;
  for (auto k : stable) s += (s.empty() ? "" : "+") + std::string(to_string(k));
  return s;
}

const BifurcationRegion& BifurcationSet::region_of(const Eigen::Vector2d& sigma) const {
  const double a = wrap(std::atan2(sigma(1), sigma(0)));
  for (const auto& r : regions)
    if (wrap(a - r.angle_lo) < r.angle_hi - r.angle_lo) return r;
  return regions.front();
}

BifurcationSet bifurcation_set(const NormalFormCoeffs& nf, const Window& window) {
  if (!(window.s1_lo < 0 && window.s1_hi > 0 && window.s2_lo < 0 && window.s2_hi > 0))
    throw Error(ErrorCode::InvalidParams, "window must contain the bifurcation point in its interior");
  const Eigen::Matrix2d A = unfolding_matrix(nf);
  if (std::abs(A.determinant()) <= 1e-14 * A.squaredNorm())
    throw Error(ErrorCode::SingularMap, "(sigma1, sigma2) -> (nu1, nu2) is singular");
  const Eigen::Matrix2d Ainv = A.inverse();
  const UnfoldingParams cubic = unfolding_from_coeffs(nf, 0.0, 0.0);

  BifurcationSet bs;
  bs.window = window;
  auto add = [&](const char* what, Eigen::Vector2d nu_dir) {
    const Eigen::Vector2d dir = (Ainv * nu_dir).normalized();
    for (const auto& r : bs.rays)
      if ((r.direction - dir).norm() < 1e-12) return;
    bs.rays.push_back({what, dir});
  };
  add("nu1=0", {0, 1});
  add("nu1=0", {0, -1});
  add("nu2=0", {1, 0});
  add("nu2=0", {-1, 0});
  add("pure1 exchange", {-1, -cubic.c});
  add("pure2 exchange", {-cubic.b, -cubic.d});
  std::sort(bs.rays.begin(), bs.rays.end(), [](const CriticalRay& x, const CriticalRay& y) {
    return wrap(std::atan2(x.direction(1), x.direction(0))) < wrap(std::atan2(y.direction(1), y.direction(0)));
  });

  auto label = [&](BifurcationRegion& r) {
    const Eigen::Vector2d s = unit(0.5 * (r.angle_lo + r.angle_hi));
    r.stable.clear();
    r.portrait.clear();
    for (const auto& fp : amplitude_fixed_points(unfolding_from_coeffs(nf, s(0), s(1)))) {
      r.portrait.emplace_back(fp.kind, fp.stability);
      if (fp.stability == AmplitudeStability::Stable) r.stable.push_back(fp.kind);
    }
  };

  const std::size_t n = bs.rays.size();
  std::vector<BifurcationRegion> sectors;
  for (std::size_t i = 0; i < n; ++i) {
    BifurcationRegion r;
    r.angle_lo = wrap(std::atan2(bs.rays[i].direction(1), bs.rays[i].direction(0)));
    const auto& nx = bs.rays[(i + 1) % n].direction;
    r.angle_hi = r.angle_lo + wrap(std::atan2(nx(1), nx(0)) - r.angle_lo);
    if (r.angle_hi <= r.angle_lo) r.angle_hi += 2 * M_PI;
    label(r);
    sectors.push_back(r);
  }
  // Merge neighbours with equal portraits, cyclically.
  bool merged = true;
  while (merged && sectors.size() > 1) {
    merged = false;
    for (std::size_t i = 0; i < sectors.size(); ++i) {
      auto& a = sectors[i];
      auto& b = sectors[(i + 1) % sectors.size()];
      if (a.portrait != b.portrait) continue;
      a.angle_hi = a.angle_lo + wrap(b.angle_hi - a.angle_lo);
      if (a.angle_hi <= a.angle_lo) a.angle_hi += 2 * M_PI;
      sectors.erase(sectors.begin() + long((i + 1) % sectors.size()));
      merged = true;
      break;
    }
  }

  std::size_t start = 0;
  for (std::size_t i = 0; i < sectors.size(); ++i)
    if (std::find(sectors[i].stable.begin(), sectors[i].stable.end(), FixedPointKind::Trivial) !=
        sectors[i].stable.end()) {
      start = i;
      break;
    }
  const Eigen::Vector2d corners[4] = {{window.s1_hi, window.s2_hi}, {window.s1_lo, window.s2_hi},
                                      {window.s1_lo, window.s2_lo}, {window.s1_hi, window.s2_lo}};
  for (std::size_t k = 0; k < sectors.size(); ++k) {
    BifurcationRegion r = sectors[(start + k) % sectors.size()];
    r.name = "D" + std::to_string(k + 1);
    r.sample = unit(0.5 * (r.angle_lo + r.angle_hi));
    r.polygon.push_back(Eigen::Vector2d::Zero());
    const Eigen::Vector2d d_lo = unit(r.angle_lo), d_hi = unit(r.angle_hi);
    r.polygon.push_back(exit_distance(window, d_lo) * d_lo);
    std::vector<std::pair<double, Eigen::Vector2d>> inside;
    for (const auto& c : corners) {
      const double off = wrap(std::atan2(c(1), c(0)) - r.angle_lo);
      if (off > 0 && off < r.angle_hi - r.angle_lo) inside.emplace_back(off, c);
    }
    std::sort(inside.begin(), inside.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [off, c] : inside) r.polygon.push_back(c);
    r.polygon.push_back(exit_distance(window, d_hi) * d_hi);
    bs.regions.push_back(std::move(r));
  }
  return bs;
}

}  // namespace coopallee
