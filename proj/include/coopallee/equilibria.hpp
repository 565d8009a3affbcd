#pragma once

#include "coopallee/model.hpp"

#include <optional>
#include <vector>

namespace coopallee {

enum class EquilibriumKind { Origin, Allee, CarryingCapacity, InteriorPrimary, InteriorSaddle };
enum class Stability { StableNode, UnstableNode, Saddle, StableFocus, UnstableFocus, NonHyperbolic };

struct Equilibrium {
  State point = State::Zero();
  EquilibriumKind kind = EquilibriumKind::Origin;
  double trace = 0.0;
  double det = 0.0;
  Stability classification = Stability::NonHyperbolic;

  double u() const { return point(0); }
  double v() const { return point(1); }
};

struct HopfPoint {
  double p = 0.0;
  double omega = 0.0;        // sqrt(det) at p
  double alpha_prime = 0.0;  // d Re(lambda) / dp, certificate of transversality
};

struct BifurcationThresholds {
  double p_H = 0.0;
  std::optional<double> p_SN;
  double p_top = 0.0;
  double lyapunov_a = 0.0;
};

const char* to_string(EquilibriumKind kind);
const char* to_string(Stability s);

// Planar linear classification from trace and determinant.
Stability classify_linear(double trace, double det);

std::vector<Equilibrium> boundary_equilibria(const ModelParams& q);

// F(u) = r c p^2 u^2 (1-u)(u-a) - (1 - p u); interior equilibria are its roots in (0, 1/p).
double interior_residual(double u, const ModelParams& q);
std::vector<Equilibrium> interior_equilibria(const ModelParams& q);
// Interior equilibrium with det > 0 and the smallest u, if any.
std::optional<Equilibrium> primary_equilibrium(const ModelParams& q);

// Trace and determinant from the interior formulas; kind from the sign of det.
Equilibrium classify(const State& point, const ModelParams& q);

// Admissible p-interval of the primary interior branch.
std::pair<double, double> primary_branch_interval(const ModelParams& q);

HopfPoint hopf_point(const ModelParams& family);
double saddle_node_point(const ModelParams& family);
// p at which u* = (a+1)/2 on the primary branch.
double top_point(const ModelParams& family);
// Planar first Lyapunov coefficient in the normal-form convention
// r' = r (alpha + a r^2) for linear part [[0, -omega], [omega, 0]].
double first_lyapunov(const ModelParams& q);
BifurcationThresholds thresholds(const ModelParams& family);

}  // namespace coopallee
