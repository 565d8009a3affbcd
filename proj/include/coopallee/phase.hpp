#pragma once

#include "coopallee/equilibria.hpp"
#include "coopallee/ode.hpp"

#include <optional>
#include <string>
#include <vector>

namespace coopallee {

enum class ManifoldStability { Stable, Unstable };
// PlusEig follows the unit eigenvector oriented into v > 0 (or u > 0 when v-component vanishes).
enum class Side { PlusEig, MinusEig };
enum class ManifoldStop { Nullcline, Section, LeftBox, Budget };

struct ManifoldBranch {
  Equilibrium saddle;
  ManifoldStability stability = ManifoldStability::Stable;
  State seed_offset = State::Zero();
  std::vector<State> polyline;
  std::optional<double> crossing_height;  // v where the branch meets g(u)
  ManifoldStop stop = ManifoldStop::Budget;
};

struct ManifoldOptions {
  double seed = 1e-6;
  double t_budget = 1e4;
  double tol = 1e-11;
  bool stop_at_nullcline = true;
  bool budget_is_error = true;
  // Optional vertical section u = section_u; stops at the first crossing with v > section_vmin.
  std::optional<double> section_u;
  double section_vmin = 0.0;
};

struct LimitCycle {
  double period = 0.0;
  double v_min = 0.0, v_max = 0.0;
  State section_point = State::Zero();
  double return_residual = 0.0;
};

struct CycleOptions {
  double transient = 2000.0;
  double tol = 1e-10;
  double return_tol = 1e-7;
  long max_crossings = 100000;
  double budget = 2e5;
};

enum class Basin { ToE0, ToE1, ToEstar, ToCycle, Undecided };
const char* to_string(Basin b);

struct BasinOptions {
  double horizon = 5000.0;
  double tol = 1e-9;
  double proximity = 1e-4;
};

struct SweepRow {
  double p = 0.0;
  std::optional<Equilibrium> equilibrium;
  std::optional<LimitCycle> cycle;
  std::string error;
};

// Unit eigenvector with the orientation convention of Side::PlusEig.
State saddle_eigenvector(const Equilibrium& saddle, ManifoldStability stability, const ModelParams& q);

ManifoldBranch saddle_manifold(const Equilibrium& saddle, ManifoldStability stability, Side side,
                               const ModelParams& q, const ManifoldOptions& opt = {});

// Height where the stable manifold of E_a meets the predator nullcline.
double stable_height(const ModelParams& q, const ManifoldOptions& opt = {});
// Height where the unstable manifold of E_1 meets the predator nullcline.
double unstable_height(const ModelParams& q, const ManifoldOptions& opt = {});

double heteroclinic_threshold(const ModelParams& family, double tol = 1e-8);

// Signed gap (unstable minus stable branch of E_R*) on the section u = u*.
double homoclinic_gap(const ModelParams& q);
double homoclinic_threshold(const ModelParams& family, double tol = 1e-7);

std::optional<LimitCycle> limit_cycle(const ModelParams& q, const State& init, const CycleOptions& opt = {});

Basin basin_classify(const State& init, const ModelParams& q, const BasinOptions& opt = {});

std::vector<SweepRow> bifurcation_sweep(const ModelParams& family, const std::vector<double>& p_grid,
                                        const CycleOptions& opt = {});

}  // namespace coopallee
