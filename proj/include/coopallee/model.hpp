#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>

namespace coopallee {

// Dimensionless parameters of the prey-predator system.
struct ModelParams {
  double r = 1.1;
  double a = 0.23;
  double c = 0.25;
  double m = 0.31;
  double p = 1.4;

  void validate() const;
  ModelParams with_p(double p_new) const {
    ModelParams q = *this;
    q.p = p_new;
    return q;
  }
  ModelParams with_c(double c_new) const {
    ModelParams q = *this;
    q.c = c_new;
    return q;
  }
};

struct RawParams {
  double r1, K1, a1, b1, c1, p1, m1;
  void validate() const;
};

struct DiffusionParams {
  double d1 = 1.0;
  double d2 = 1.0;
  double l = 2.0;  // domain is (0, l*pi)
  void validate() const;
  double length() const { return l * M_PI; }
};

struct DelayParams {
  double tau1 = 0.0;
  double tau2 = 0.0;
  void validate() const;
};

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

// (u, v)
using State = Vec2<double>;

ModelParams nondimensionalize(const RawParams& raw);

template <typename Scalar>
Vec2<Scalar> rhs(const Vec2<Scalar>& s, const ModelParams& q) {
  const Scalar u = s(0), v = s(1);
  const Scalar coop = Scalar(1) + q.c * v;
  return Vec2<Scalar>(q.r * u * (Scalar(1) - u) * (u - q.a) - coop * u * v,
                      q.m * v * (q.p * u * coop - Scalar(1)));
}

// Exact Jacobian of rhs.  At an interior equilibrium it reduces to
// [[r u (1+a-2u), -2cuv - u], [m p v (1+cv), m p c u v]].
template <typename Scalar>
Mat2<Scalar> jacobian(const Vec2<Scalar>& s, const ModelParams& q) {
  const Scalar u = s(0), v = s(1);
  Mat2<Scalar> J;
  J(0, 0) = q.r * (Scalar(2) * (1 + q.a) * u - Scalar(3) * u * u - q.a) - (Scalar(1) + q.c * v) * v;
  J(0, 1) = -u - Scalar(2) * q.c * u * v;
  J(1, 0) = q.m * q.p * v * (Scalar(1) + q.c * v);
  J(1, 1) = q.m * (q.p * u * (Scalar(1) + Scalar(2) * q.c * v) - Scalar(1));
  return J;
}

// Second partials: H[k](i, j) = d^2 F_k / dx_i dx_j.
template <typename Scalar>
std::array<Mat2<Scalar>, 2> hessians(const Vec2<Scalar>& s, const ModelParams& q) {
  const Scalar u = s(0), v = s(1);
  Mat2<Scalar> Hu, Hv;
  Hu(0, 0) = q.r * (Scalar(2) * (1 + q.a) - Scalar(6) * u);
  Hu(0, 1) = Hu(1, 0) = Scalar(-1) - Scalar(2) * q.c * v;
  Hu(1, 1) = Scalar(-2) * q.c * u;
  Hv(0, 0) = Scalar(0);
  Hv(0, 1) = Hv(1, 0) = q.m * q.p * (Scalar(1) + Scalar(2) * q.c * v);
  Hv(1, 1) = Scalar(2) * q.m * q.p * q.c * u;
  return {Hu, Hv};
}

// Third partials are constant: returns d^3 F_k / dx_i dx_j dx_l.
double third_partial(int k, int i, int j, int l, const ModelParams& q);

class Nullclines {
public:
  explicit Nullclines(const ModelParams& q) : q_(q) {}

  // Prey nullcline: nonnegative root of c v^2 + v - r(1-u)(u-a) = 0, a <= u <= 1.
  double f(double u) const;
  // Predator nullcline (1 - p u) / (c p u), 0 < u < 1/p.
  double g(double u) const;

private:
  ModelParams q_;
};

enum class Regime { Weak, Strong, Critical };

Regime cooperation_regime(const ModelParams& q);
double critical_cooperation(const ModelParams& q);
const char* to_string(Regime regime);

}  // namespace coopallee
