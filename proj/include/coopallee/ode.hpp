#pragma once

#include "coopallee/model.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace coopallee {

enum class Direction { Forward, Backward };

// Backward orbits store decreasing (negative) times.
struct Orbit {
  std::vector<double> times;
  std::vector<State> states;
  Direction direction = Direction::Forward;
};

using PlanarField = std::function<State(const State&)>;

// Zero crossing of g along the orbit.  sense: +1 upward only, -1 downward only, 0 both.
struct Event {
  std::function<double(const State&)> g;
  int sense = 0;
};

struct EventHit {
  int index = -1;
  double t = 0.0;
  State state = State::Zero();
};

struct SolveOptions {
  double t_end = 100.0;  // duration, always positive
  double tol = 1e-10;
  Direction direction = Direction::Forward;
  bool record = true;
  double initial_step = 1e-3;
  // Events are ignored until this much time has elapsed.
  double event_holdoff = 0.0;
  // Return true to stop integration at the hit.
  std::function<bool(const EventHit&)> on_event;
  // Return true to stop after an accepted step.
  std::function<bool(double t, const State&)> stop;
};

struct SolveResult {
  Orbit orbit;
  std::optional<EventHit> stopped_at;  // event that terminated the run
  bool reached_end = false;
  double t_final = 0.0;
  State final_state = State::Zero();
};

// Adaptive Dormand-Prince 5(4) with dense output and bisection-refined events.
SolveResult solve(const PlanarField& f, const State& init, const SolveOptions& opt,
                  const std::vector<Event>& events = {});

Orbit integrate(const State& init, const ModelParams& q, double t_end, double tol,
                Direction direction = Direction::Forward);

// Fixed-step Dormand-Prince (fifth-order solution), for convergence checks.
State integrate_fixed_step(const State& init, const ModelParams& q, double t_end, double h);

}  // namespace coopallee
