#include "coopallee/ode.hpp"

#include "coopallee/error.hpp"

#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>

#include <cmath>

namespace coopallee {

namespace odeint = boost::numeric::odeint;

namespace {

using Dopri5 = odeint::runge_kutta_dopri5<State, double, State, double, odeint::vector_space_algebra>;

constexpr double kMinStep = 1e-14;
constexpr double kEventTimeTol = 1e-10;

bool crosses(double g0, double g1, int sense) {
  if (sense >= 0 && g0 < 0.0 && g1 >= 0.0) return true;
  if (sense <= 0 && g0 > 0.0 && g1 <= 0.0) return true;
  return false;
}

}  // namespace

SolveResult solve(const PlanarField& f, const State& init, const SolveOptions& opt,
                  const std::vector<Event>& events) {
  if (!init.allFinite()) throw Error(ErrorCode::NonFinite, "initial state is not finite");
  if (!(opt.tol >= 1e-14 && opt.tol <= 1e-3))
    throw Error(ErrorCode::InvalidParams, "integrator tolerance outside [1e-14, 1e-3]");
  const double sign = opt.direction == Direction::Forward ? 1.0 : -1.0;
  auto system = [&](const State& x, State& dx, double) { dx = sign * f(x); };

  auto stepper = odeint::make_dense_output(opt.tol, opt.tol, Dopri5());
  stepper.initialize(init, 0.0, std::min(opt.initial_step, opt.t_end));

  SolveResult res;
  res.orbit.direction = opt.direction;
  if (opt.record) {
    res.orbit.times.push_back(0.0);
    res.orbit.states.push_back(init);
  }
  std::vector<double> gprev(events.size());
  for (std::size_t k = 0; k < events.size(); ++k) gprev[k] = events[k].g(init);

  State x = init;
  while (stepper.current_time() < opt.t_end) {
    // Never step past t_end: shrink the proposed step near the end.
    const double remaining = opt.t_end - stepper.current_time();
    if (stepper.current_time_step() > remaining)
      stepper.initialize(stepper.current_state(), stepper.current_time(), remaining);
    std::pair<double, double> span;
    try {
      span = stepper.do_step(system);
    } catch (const odeint::step_adjustment_error&) {
      throw Error(ErrorCode::StepUnderflow, "step size adjustment failed");
    }
    if (stepper.current_time_step() < kMinStep && stepper.current_time() < opt.t_end)
      throw Error(ErrorCode::StepUnderflow, "step size collapsed below 1e-14");
    x = stepper.current_state();
    if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "solution is not finite");

    bool stop = false;
    if (!events.empty() && span.second > opt.event_holdoff) {
      // Earliest event inside the step.
      std::optional<EventHit> first;
      for (std::size_t k = 0; k < events.size(); ++k) {
        const double g1 = events[k].g(x);
        if (crosses(gprev[k], g1, events[k].sense)) {
          double lo = span.first, hi = span.second;
          const double g0 = gprev[k];
          State y;
          while (hi - lo > kEventTimeTol) {
            const double mid = 0.5 * (lo + hi);
            stepper.calc_state(mid, y);
            const double gm = events[k].g(y);
            if ((g0 < 0.0) == (gm < 0.0) && gm != 0.0) lo = mid; else hi = mid;
          }
          stepper.calc_state(hi, y);
          if (!first || hi < first->t) first = EventHit{static_cast<int>(k), hi, y};
        }
        gprev[k] = g1;
      }
      if (first) {
        if (opt.record) {
          res.orbit.times.push_back(sign * first->t);
          res.orbit.states.push_back(first->state);
        }
        if (opt.on_event && opt.on_event(*first)) {
          res.stopped_at = first;
          res.t_final = sign * first->t;
          res.final_state = first->state;
          return res;
        }
      }
    } else {
      for (std::size_t k = 0; k < events.size(); ++k) gprev[k] = events[k].g(x);
    }
    if (opt.record) {
      res.orbit.times.push_back(sign * span.second);
      res.orbit.states.push_back(x);
    }
    if (opt.stop && opt.stop(sign * span.second, x)) stop = true;
    if (stop) {
      res.t_final = sign * span.second;
      res.final_state = x;
      return res;
    }
  }
  res.reached_end = true;
  res.t_final = sign * stepper.current_time();
  res.final_state = x;
  return res;
}

Orbit integrate(const State& init, const ModelParams& q, double t_end, double tol, Direction direction) {
  SolveOptions opt;
  opt.t_end = t_end;
  opt.tol = tol;
  opt.direction = direction;
  if (tol < 1e-12 || tol > 1e-3) throw Error(ErrorCode::InvalidParams, "tol must lie in [1e-12, 1e-3]");
  return solve([&](const State& s) { return rhs(s, q); }, init, opt).orbit;
}

State integrate_fixed_step(const State& init, const ModelParams& q, double t_end, double h) {
  Dopri5 stepper;
  State x = init;
  const int n = static_cast<int>(std::lround(t_end / h));
  auto system = [&](const State& s, State& dx, double) { dx = rhs(s, q); };
  for (int i = 0; i < n; ++i) stepper.do_step(system, x, i * h, h);
  return x;
}

}  // namespace coopallee
