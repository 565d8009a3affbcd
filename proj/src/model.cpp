#include "coopallee/model.hpp"

#include "coopallee/error.hpp"

#include <sstream>

namespace coopallee {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::NotAtHopf: return "NotAtHopf";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::NoEvent: return "NoEvent";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::Inconclusive: return "Inconclusive";
    case ErrorCode::CFLViolation: return "CFLViolation";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::HistoryUnderflow: return "HistoryUnderflow";
    case ErrorCode::MultipleRoot: return "MultipleRoot";
    case ErrorCode::DegenerateRescale: return "DegenerateRescale";
    case ErrorCode::SingularMap: return "SingularMap";
    case ErrorCode::EmptyCurve: return "EmptyCurve";
    case ErrorCode::PathAmbiguous: return "PathAmbiguous";
  }
  return "Unknown";
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidParams, what);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void ModelParams::validate() const {
  require(positive(r) && positive(a) && positive(c) && positive(m) && positive(p),
          "model parameters must be positive");
  require(a < 1.0, "Allee threshold must satisfy 0 < a < 1");
}

void RawParams::validate() const {
  require(positive(r1) && positive(K1) && positive(a1) && positive(b1) && positive(c1) &&
              positive(p1) && positive(m1),
          "raw parameters must be positive");
  require(a1 < K1, "raw parameters need a1 < K1");
}

void DiffusionParams::validate() const {
  require(positive(d1) && positive(d2) && positive(l), "diffusion parameters must be positive");
}

void DelayParams::validate() const {
  require(std::isfinite(tau1) && std::isfinite(tau2) && tau1 >= 0.0 && tau2 >= 0.0,
          "delays must be nonnegative");
}

ModelParams nondimensionalize(const RawParams& raw) {
  raw.validate();
  ModelParams q;
  q.r = raw.K1 * raw.r1;
  q.a = raw.a1 / raw.K1;
  q.c = raw.c1 / (raw.b1 * raw.b1);
  q.p = raw.b1 * raw.p1 * raw.K1 / raw.m1;
  q.m = raw.m1;
  q.validate();
  return q;
}

double third_partial(int k, int i, int j, int l, const ModelParams& q) {
  const int nv = (i == 1) + (j == 1) + (l == 1);  // number of v-derivatives
  if (k == 0) {
    if (nv == 0) return -6.0 * q.r;
    if (nv == 2) return -2.0 * q.c;
    return 0.0;
  }
  return nv == 2 ? 2.0 * q.m * q.p * q.c : 0.0;
}

double Nullclines::f(double u) const {
  if (!(u >= q_.a && u <= 1.0)) {
    std::ostringstream os;
    os << "prey nullcline undefined at u = " << u;
    throw Error(ErrorCode::DomainError, os.str());
  }
  const double s = q_.r * (1.0 - u) * (u - q_.a);
  if (s <= 0.0) return 0.0;
  // Rationalized root of c v^2 + v - s = 0; exact as c -> 0.
  return 2.0 * s / (1.0 + std::sqrt(1.0 + 4.0 * q_.c * s));
}

double Nullclines::g(double u) const {
  if (!(u > 0.0 && u < 1.0 / q_.p) && u != 1.0 / q_.p) {
    std::ostringstream os;
    os << "predator nullcline undefined at u = " << u;
    throw Error(ErrorCode::DomainError, os.str());
  }
  return (1.0 - q_.p * u) / (q_.c * q_.p * u);
}

double critical_cooperation(const ModelParams& q) { return 1.0 / (q.r * (1.0 - q.a)); }

Regime cooperation_regime(const ModelParams& q) {
  const double cc = critical_cooperation(q);
  if (std::abs(q.c - cc) <= 1e-12 * cc) return Regime::Critical;
  return q.c < cc ? Regime::Weak : Regime::Strong;
}

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::Weak: return "Weak";
    case Regime::Strong: return "Strong";
    case Regime::Critical: return "Critical";
  }
  return "Unknown";
}

}  // namespace coopallee
