#include "coopallee/pde.hpp"

#include "coopallee/error.hpp"

#include <Eigen/SparseLU>
#include <boost/circular_buffer.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace coopallee {

Eigen::VectorXd Field::grid() const {
  return Eigen::VectorXd::LinSpaced(u.size(), 0.0, l * M_PI);
}

Field Field::constant(int N, double l, const State& value) {
  Field f;
  f.l = l;
  f.u = Eigen::VectorXd::Constant(N + 1, value(0));
  f.v = Eigen::VectorXd::Constant(N + 1, value(1));
  return f;
}

Field Field::cosine(int N, double l, double u0, double u1, double v0, double v1, double k) {
  Field f;
  f.l = l;
  const Eigen::ArrayXd c = (k * Eigen::ArrayXd::LinSpaced(N + 1, 0.0, l * M_PI)).cos();
  f.u = (u0 + u1 * c).matrix();
  f.v = (v0 + v1 * c).matrix();
  return f;
}

double cfl_bound(const DiffusionParams& diff, int N) {
  const double h = diff.l * M_PI / N;
  const double d = std::max(diff.d1, diff.d2);
  return d > 0 ? 0.4 * h * h / d : std::numeric_limits<double>::infinity();
}

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

// Second differences with mirrored ghost nodes U_{-1} = U_1, U_{N+1} = U_{N-1}.
SpMat neumann_laplacian(int N, double h) {
  std::vector<Eigen::Triplet<double>> t;
  const double s = 1.0 / (h * h);
  for (int i = 0; i <= N; ++i) {
    t.emplace_back(i, i, -2 * s);
    if (i == 0) {
      t.emplace_back(0, 1, 2 * s);
    } else if (i == N) {
      t.emplace_back(N, N - 1, 2 * s);
    } else {
      t.emplace_back(i, i - 1, s);
      t.emplace_back(i, i + 1, s);
    }
  }
  SpMat L(N + 1, N + 1);
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

void check_inputs(const ModelParams& q, const DiffusionParams& diff, const Field& init,
                  double t_end) {
  q.validate();
  if (!(diff.d1 >= 0 && diff.d2 >= 0 && diff.l > 0 && std::isfinite(diff.d1) &&
        std::isfinite(diff.d2)))
    throw Error(ErrorCode::InvalidParams, "diffusion coefficients must be nonnegative");
  if (init.u.size() != init.v.size() || init.intervals() < 32)
    throw Error(ErrorCode::InvalidParams, "grid needs N >= 32 and matching u, v");
  if (std::abs(init.l - diff.l) > 1e-12)
    throw Error(ErrorCode::InvalidParams, "field length differs from diffusion length");
  if (!(t_end > 0) || !std::isfinite(t_end))
    throw Error(ErrorCode::InvalidParams, "t_end must be positive");
  if (!init.u.allFinite() || !init.v.allFinite())
    throw Error(ErrorCode::NonFinite, "initial field is not finite");
}

// Past states on a uniform time grid; before the first snapshot the state is the initial one.
class History {
public:
  History(const Vec& init, double dt, std::size_t capacity) : init_(init), dt_(dt), ring_(capacity) {
    ring_.push_back(init);
  }

  void push(const Vec& state) {
    if (ring_.full()) ++dropped_;
    ring_.push_back(state);
  }

  Vec at(double t) const {
    if (t <= 0.0) return init_;
    const double pos = t / dt_ - double(dropped_);
    const double last = double(ring_.size() - 1);
    if (pos < -1e-9 || pos > last + 1e-9)
      throw Error(ErrorCode::HistoryUnderflow, "delayed time outside the stored window");
    const double c = std::clamp(pos, 0.0, last);
    const auto i = std::min<std::size_t>(std::size_t(c), ring_.size() - 1);
    const double w = c - double(i);
    if (w < 1e-12 || i + 1 >= ring_.size()) return ring_[i];
    return (1 - w) * ring_[i] + w * ring_[i + 1];
  }

private:
  Vec init_;
  double dt_;
  boost::circular_buffer<Vec> ring_;
  std::size_t dropped_ = 0;
};

class Integrator {
public:
  Integrator(const ModelParams& q, const DiffusionParams& diff, const DelayParams& tau,
             const Field& init, double t_end, const RdOptions& opt)
      : q_(q), diff_(diff), tau_(tau), n_(init.intervals() + 1), l_(init.l) {
    const int N = init.intervals();
    const double h = init.spacing();
    L_ = neumann_laplacian(N, h);
    const double bound = cfl_bound(diff, N);
    double dt = opt.dt > 0 ? opt.dt : std::min(bound, 1e-3);
    stepper_ = opt.stepper;
    if (stepper_ == Stepper::Auto)
      stepper_ = dt <= bound ? Stepper::ExplicitRK4 : Stepper::SemiImplicit;
    if (stepper_ == Stepper::ExplicitRK4 && dt > bound * (1 + 1e-12))
      throw Error(ErrorCode::CFLViolation, "dt exceeds 0.4 h^2 / max(d1, d2)");
    steps_ = std::max<long>(1, long(std::ceil(t_end / dt - 1e-9)));
    dt_ = t_end / double(steps_);
    if (stepper_ == Stepper::ExplicitRK4)
      for (double t : {tau.tau1, tau.tau2})
        if (t > 0 && t < dt_ * (1 - 1e-12))
          throw Error(ErrorCode::HistoryUnderflow, "explicit stepping needs delays of at least dt");
    if (stepper_ == Stepper::SemiImplicit) {
      SpMat I(n_, n_);
      I.setIdentity();
      solve_u_.compute(I - dt_ * diff.d1 * L_);
      solve_v_.compute(I - dt_ * diff.d2 * L_);
    }
    sample_ = opt.sample_every;
    record_from_ = opt.record_from;
  }

  Trajectory run(const Field& init) {
    Vec U(2 * n_);
    U << init.u, init.v;
    const double max_tau = std::max(tau_.tau1, tau_.tau2);
    const std::size_t cap = std::size_t(std::ceil(max_tau / dt_)) + 4;
    History hist(U, dt_, cap);

    Trajectory out;
    out.dt = dt_;
    out.stepper = stepper_;
    double next_sample = 0.0;
    auto record = [&](double t, const Vec& X, bool force) {
      if (t + 1e-9 < record_from_ && !force) return;
      if (!force && t + 1e-9 < next_sample) return;
      Field f;
      f.l = l_;
      f.u = X.head(n_);
      f.v = X.tail(n_);
      f.time = t;
      out.frames.push_back(std::move(f));
      if (sample_ > 0)
        while (next_sample <= t + 1e-9) next_sample += sample_;
    };
    record(0.0, U, false);

    for (long k = 0; k < steps_; ++k) {
      const double t = k * dt_;
      U = stepper_ == Stepper::ExplicitRK4 ? rk4(t, U, hist) : imex(t, U, hist);
      if (!U.allFinite())
        throw Error(ErrorCode::NonFinite, "solution blew up at t = " + std::to_string(t + dt_));
      hist.push(U);
      const double t1 = (k + 1 == steps_) ? steps_ * dt_ : (k + 1) * dt_;
      record(t1, U, k + 1 == steps_);
    }
    return out;
  }

private:
  // Reaction terms with delayed prey in the prey equation and delayed prey/predator in the predator one.
  Vec reaction(const Vec& X, const Vec& D1, const Vec& D2) const {
    Vec R(2 * n_);
    const auto u = X.head(n_).array(), v = X.tail(n_).array();
    const auto u1 = D1.head(n_).array();
    const auto u2 = D2.head(n_).array(), v2 = D2.tail(n_).array();
    R.head(n_) = (q_.r * u * (1 - u1) * (u - q_.a) - (1 + q_.c * v) * u * v).matrix();
    R.tail(n_) = (q_.m * v * (q_.p * u2 * (1 + q_.c * v2) - 1)).matrix();
    return R;
  }

  Vec delayed(double t, double tau, const Vec& current, const History& hist) const {
    return tau > 0 ? hist.at(t - tau) : current;
  }

  Vec full_rhs(double t, const Vec& X, const History& hist) const {
    Vec F = reaction(X, delayed(t, tau_.tau1, X, hist), delayed(t, tau_.tau2, X, hist));
    F.head(n_) += diff_.d1 * (L_ * X.head(n_));
    F.tail(n_) += diff_.d2 * (L_ * X.tail(n_));
    return F;
  }

  Vec rk4(double t, const Vec& X, const History& hist) const {
    const double h = dt_;
    const Vec k1 = full_rhs(t, X, hist);
    const Vec k2 = full_rhs(t + h / 2, X + h / 2 * k1, hist);
    const Vec k3 = full_rhs(t + h / 2, X + h / 2 * k2, hist);
    const Vec k4 = full_rhs(t + h, X + h * k3, hist);
    return X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }

  Vec imex(double t, const Vec& X, const History& hist) {
    const Vec R = reaction(X, delayed(t, tau_.tau1, X, hist), delayed(t, tau_.tau2, X, hist));
    Vec Y(2 * n_);
    Y.head(n_) = solve_u_.solve(Vec(X.head(n_) + dt_ * R.head(n_)));
    Y.tail(n_) = solve_v_.solve(Vec(X.tail(n_) + dt_ * R.tail(n_)));
    return Y;
  }

  ModelParams q_;
  DiffusionParams diff_;
  DelayParams tau_;
  int n_;
  double l_;
  SpMat L_;
  Stepper stepper_;
  long steps_ = 0;
  double dt_ = 0.0;
  double sample_ = 0.5;
  double record_from_ = 0.0;
  Eigen::SparseLU<SpMat> solve_u_, solve_v_;
};

}  // namespace

Trajectory simulate_rd(const ModelParams& q, const DiffusionParams& diff, const Field& init,
                       double t_end, const RdOptions& opt) {
  check_inputs(q, diff, init, t_end);
  Integrator it(q, diff, DelayParams{}, init, t_end, opt);
  return it.run(init);
}

Trajectory simulate_rd_delays(const ModelParams& q, const DiffusionParams& diff,
                              const DelayParams& delays, const Field& init, double t_end,
                              const RdOptions& opt) {
  check_inputs(q, diff, init, t_end);
  delays.validate();
  Integrator it(q, diff, delays, init, t_end, opt);
  return it.run(init);
}

Field refine_steady_state(const ModelParams& q, const DiffusionParams& diff, const Field& guess,
                          double tol, int max_iter) {
  check_inputs(q, diff, guess, 1.0);
  const int n = int(guess.u.size());
  const SpMat L = neumann_laplacian(n - 1, guess.spacing());
  Vec U(2 * n);
  U << guess.u, guess.v;
  for (int it = 0; it < max_iter; ++it) {
    Vec G(2 * n);
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < L.outerSize(); ++k)
      for (SpMat::InnerIterator e(L, k); e; ++e) {
        trip.emplace_back(e.row(), e.col(), diff.d1 * e.value());
        trip.emplace_back(n + e.row(), n + e.col(), diff.d2 * e.value());
      }
    for (int i = 0; i < n; ++i) {
      const State s(U(i), U(n + i));
      const State f = rhs<double>(s, q);
      G(i) = f(0);
      G(n + i) = f(1);
      const Mat2<double> J = jacobian<double>(s, q);
      trip.emplace_back(i, i, J(0, 0));
      trip.emplace_back(i, n + i, J(0, 1));
      trip.emplace_back(n + i, i, J(1, 0));
      trip.emplace_back(n + i, n + i, J(1, 1));
    }
    G.head(n) += diff.d1 * (L * U.head(n));
    G.tail(n) += diff.d2 * (L * U.tail(n));
    SpMat A(2 * n, 2 * n);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<SpMat> lu(A);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularMap, "singular steady-state Jacobian");
    const Vec step = lu.solve(G);
    U -= step;
    if (!U.allFinite()) throw Error(ErrorCode::NonFinite, "Newton iterate is not finite");
    if (step.lpNorm<Eigen::Infinity>() < tol) {
      Field f = guess;
      f.u = U.head(n);
      f.v = U.tail(n);
      return f;
    }
  }
  throw Error(ErrorCode::Inconclusive, "steady-state Newton did not converge");
}

Eigen::VectorXd cosine_coefficients(const Eigen::VectorXd& values, int n_max) {
  const int N = int(values.size()) - 1;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(N + 1);
  w(0) = w(N) = 0.5;
  const Eigen::ArrayXd idx = Eigen::ArrayXd::LinSpaced(N + 1, 0, N);
  Eigen::VectorXd a(n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    const Eigen::VectorXd c = (n * M_PI / N * idx).cos().matrix();
    a(n) = (n == 0 ? 1.0 : 2.0) / N * w.cwiseProduct(values).dot(c);
  }
  return a;
}

const char* to_string(AttractorKind k) {
  switch (k) {
    case AttractorKind::HomogeneousSteady: return "HomogeneousSteady";
    case AttractorKind::InhomogeneousSteady: return "InhomogeneousSteady";
    case AttractorKind::HomogeneousPeriodic: return "HomogeneousPeriodic";
    case AttractorKind::InhomogeneousPeriodic: return "InhomogeneousPeriodic";
    case AttractorKind::Undecided: return "Undecided";
  }
  return "?";
}

AttractorDiagnosis diagnose(const Trajectory& traj, double tail) {
  AttractorDiagnosis out;
  if (traj.frames.size() < 3) return out;
  const Field& last = traj.frames.back();
  std::vector<const Field*> fs;
  for (const auto& f : traj.frames)
    if (f.time >= last.time - tail - 1e-9) fs.push_back(&f);
  if (fs.size() < 3) return out;

  const int N = last.intervals();
  const double h = last.spacing();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(N + 1, h);
  w(0) = w(N) = h / 2;

  std::vector<double> times, signal;
  Eigen::VectorXd spectrum = Eigen::VectorXd::Zero(std::min(N, 64) + 1);
  for (const Field* f : fs) {
    out.time_variation = std::max({out.time_variation, (f->u - last.u).lpNorm<Eigen::Infinity>(),
                                   (f->v - last.v).lpNorm<Eigen::Infinity>()});
    out.spatial_range = std::max({out.spatial_range, f->u.maxCoeff() - f->u.minCoeff(),
                                  f->v.maxCoeff() - f->v.minCoeff()});
    times.push_back(f->time);
    signal.push_back(std::sqrt(w.dot(f->u.cwiseAbs2() + f->v.cwiseAbs2())));
    spectrum += cosine_coefficients(f->u, int(spectrum.size()) - 1).cwiseAbs();
  }
  const bool inhomogeneous = out.spatial_range > 1e-4;
  if (inhomogeneous) {
    Eigen::Index n = 0;
    spectrum.tail(spectrum.size() - 1).maxCoeff(&n);
    out.dominant_mode = int(n) + 1;
  }

  if (out.time_variation < 1e-6) {
    out.kind = inhomogeneous ? AttractorKind::InhomogeneousSteady : AttractorKind::HomogeneousSteady;
    return out;
  }

  // Maxima of the norm signal, refined by a parabola through three samples.
  std::vector<double> peaks;
  for (std::size_t k = 1; k + 1 < signal.size(); ++k) {
    const double a = signal[k - 1], b = signal[k], c = signal[k + 1];
    if (!(b > a && b >= c)) continue;
    const double den = a - 2 * b + c;
    const double shift = den != 0 ? 0.5 * (a - c) / den : 0.0;
    peaks.push_back(times[k] + shift * (times[k + 1] - times[k]));
  }
  const double span = times.back() - times.front();
  if (peaks.size() < 3) return out;
  std::vector<double> periods;
  for (std::size_t k = 1; k < peaks.size(); ++k) periods.push_back(peaks[k] - peaks[k - 1]);
  const auto [lo, hi] = std::minmax_element(periods.begin(), periods.end());
  double mean = 0.0;
  for (double p : periods) mean += p;
  mean /= double(periods.size());
  if (span < 500.0 - 1e-9 && periods.size() < 5) return out;
  if ((*hi - *lo) / mean >= 0.01) return out;
  out.period = mean;
  out.kind = inhomogeneous ? AttractorKind::InhomogeneousPeriodic : AttractorKind::HomogeneousPeriodic;
  return out;
}

}  // namespace coopallee
