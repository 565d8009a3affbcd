#pragma once

#include "coopallee/model.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

namespace coopallee {

// Values on N+1 equispaced nodes of [0, l*pi].
struct Field {
  double l = 2.0;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  double time = 0.0;

  int intervals() const { return int(u.size()) - 1; }
  double spacing() const { return l * M_PI / intervals(); }
  Eigen::VectorXd grid() const;

  static Field constant(int N, double l, const State& value);
  // u = u0 + u1 cos(k x), v = v0 + v1 cos(k x).
  static Field cosine(int N, double l, double u0, double u1, double v0, double v1, double k);
};

enum class Stepper { Auto, ExplicitRK4, SemiImplicit };

struct RdOptions {
  double dt = 0.0;             // 0 selects min(CFL bound, 1e-3)
  Stepper stepper = Stepper::Auto;
  double sample_every = 0.5;
  double record_from = 0.0;    // frames before this time are dropped
};

struct Trajectory {
  std::vector<Field> frames;
  double dt = 0.0;
  Stepper stepper = Stepper::Auto;
};

// dt <= 0.4 h^2 / max(d1, d2).
double cfl_bound(const DiffusionParams& diff, int N);

Trajectory simulate_rd(const ModelParams& q, const DiffusionParams& diff, const Field& init,
                       double t_end, const RdOptions& opt = {});

// Delayed terms read from a ring of past states, constant in time before t = 0.
// Explicit RK4 needs each nonzero delay to be at least dt.
Trajectory simulate_rd_delays(const ModelParams& q, const DiffusionParams& diff,
                              const DelayParams& delays, const Field& init, double t_end,
                              const RdOptions& opt = {});

// Newton solve of the discrete steady problem d Lap U + R(U) = 0 started from `guess`.
Field refine_steady_state(const ModelParams& q, const DiffusionParams& diff, const Field& guess,
                          double tol = 1e-12, int max_iter = 50);

// Trapezoid-rule cosine coefficients a_n of u on [0, l*pi] in the basis cos(n x / l).
Eigen::VectorXd cosine_coefficients(const Eigen::VectorXd& values, int n_max);

enum class AttractorKind {
  HomogeneousSteady,
  InhomogeneousSteady,
  HomogeneousPeriodic,
  InhomogeneousPeriodic,
  Undecided
};
const char* to_string(AttractorKind k);

struct AttractorDiagnosis {
  AttractorKind kind = AttractorKind::Undecided;
  int dominant_mode = 0;
  std::optional<double> period;  // of the L2-norm signal
  double time_variation = 0.0;   // sup-norm spread over the tail
  double spatial_range = 0.0;    // largest peak-to-peak over the tail
};

// Classifies the frames with time >= frames.back().time - tail.
AttractorDiagnosis diagnose(const Trajectory& traj, double tail = 500.0);

}  // namespace coopallee
