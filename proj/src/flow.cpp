#include "cmaf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace cmaf {

FlowState FlowState::make(double t, ScalarField phi, const NonlinearityF* F, double log_c, double eps_pd) {
  MetricField metric = MetricField::from_potential(phi, eps_pd);
  std::optional<ScalarField> dot;
  if (F) dot = rhs(metric, phi, *F, log_c);
  return FlowState{t, std::move(phi), std::move(metric), std::move(dot)};
}

void FlowConfig::validate() const {
  if (!(T > 0.0)) throw Error("FlowConfig: T must be positive");
  if (!(safety > 0.0 && safety < 1.0)) throw Error("FlowConfig: safety must lie in (0, 1)");
  if (!(dt_init > 0.0)) throw Error("FlowConfig: dt_init must be positive");
  for (double s : snapshot_times)
    if (!(s >= 0.0 && s <= T)) throw Error("FlowConfig: snapshot time " + std::to_string(s) + " outside [0, T]");
}

const FlowState& Trajectory::at_time(double t, double tol) const {
  for (const FlowState& s : snapshots)
    if (std::abs(s.t - t) <= tol) return s;
  throw Error("Trajectory: no snapshot at t = " + std::to_string(t));
}

ScalarField rhs(const MetricField& metric, const ScalarField& phi, const NonlinearityF& F, double log_c) {
  ScalarField out = log_det_ratio(metric);
  out += F_value(F, phi);
  out += -log_c;
  return out;
}

ScalarField rhs(const ScalarField& phi, const NonlinearityF& F, double log_c, double eps_pd) {
  return rhs(MetricField::from_potential(phi, eps_pd), phi, F, log_c);
}

StepResult step(const FlowState& state, double dt, const NonlinearityF& F, double log_c, double eps_pd,
                int max_halvings) {
  if (!(dt > 0.0)) throw Error("step: dt must be positive");
  const ScalarField k1 = state.phi_dot ? *state.phi_dot : rhs(state.metric, state.phi, F, log_c);
  for (int h = 0; h <= max_halvings; ++h, dt *= 0.5) {
    try {
      ScalarField mid = state.phi;
      for (std::size_t p = 0; p < mid.size(); ++p) mid[p] += 0.5 * dt * k1[p];
      const ScalarField k2 = rhs(mid, F, log_c, eps_pd);
      ScalarField next = state.phi;
      for (std::size_t p = 0; p < next.size(); ++p) next[p] += dt * k2[p];
      return StepResult{FlowState::make(state.t + dt, std::move(next), &F, log_c, eps_pd), dt, h};
    } catch (const ConeExitError&) {
      // retry with half the step
    }
  }
  throw PositivityBreakdown("positivity breakdown at t = " + std::to_string(state.t) + " after " +
                                std::to_string(max_halvings) + " step halvings",
                            state);
}

double cfl_step(const FlowState& state, double safety) {
  const double h = state.phi.geometry().spacing();
  return safety * h * h / traces(state.metric).inverse_trace.max();
}

namespace {

StepRecord describe(const FlowState& s, double dt, int halvings) {
  StepRecord r;
  r.t = s.t;
  r.dt = dt;
  r.halvings = halvings;
  r.sup_abs_phi = s.phi.sup_abs();
  r.inf_phi = s.phi.min();
  r.sup_phi = s.phi.max();
  r.sup_abs_phi_dot = s.phi_dot ? s.phi_dot->sup_abs() : 0.0;
  r.min_eigenvalue = s.metric.min_eigenvalue();
  r.mean_det_ratio = det_ratio(s.metric).mean();
  return r;
}

}  // namespace

Trajectory run(const ScalarField& phi0, const NonlinearityF& F, const FlowConfig& config) {
  config.validate();
  Trajectory traj;
  traj.config = config;
  std::vector<double> snaps = config.snapshot_times;
  snaps.push_back(0.0);
  snaps.push_back(config.T);
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
              snaps.end());
  traj.config.snapshot_times = snaps;

  FlowState state = FlowState::make(0.0, phi0, &F, config.log_c, config.eps_pd);
  traj.series.push_back(describe(state, 0.0, 0));
  traj.snapshots.push_back(state);

  std::size_t next = 1;
  const double eps_t = 1e-13 * std::max(1.0, config.T);
  while (next < snaps.size()) {
    const double target = snaps[next];
    double dt = std::min(config.dt_init, cfl_step(state, config.safety));
    const bool lands = target - state.t <= dt * (1.0 + 1e-9);
    if (lands) dt = target - state.t;
    StepResult res = [&] {
      try {
        return step(state, dt, F, config.log_c, config.eps_pd, config.max_halvings);
      } catch (const PositivityBreakdown& e) {
        throw PositivityBreakdown(e.what(), e.state(), std::make_shared<Trajectory>(traj));
      }
    }();
    state = std::move(res.state);
    const bool at_snapshot = std::abs(state.t - target) <= eps_t;
    if (at_snapshot) state.t = target;
    traj.series.push_back(describe(state, res.dt, res.halvings));
    if (at_snapshot) {
      traj.snapshots.push_back(state);
      ++next;
    }
  }
  return traj;
}

namespace {

using Vec2 = std::array<double, 2>;

Vec2 rk4(const std::function<Vec2(const Vec2&)>& f, const Vec2& y, double h) {
  auto axpy = [](const Vec2& a, double s, const Vec2& b) { return Vec2{a[0] + s * b[0], a[1] + s * b[1]}; };
  const Vec2 k1 = f(y);
  const Vec2 k2 = f(axpy(y, 0.5 * h, k1));
  const Vec2 k3 = f(axpy(y, 0.5 * h, k2));
  const Vec2 k4 = f(axpy(y, h, k3));
  return {y[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
          y[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

}  // namespace

HorizonEstimate estimate_horizon(const ScalarField& phi0, const NonlinearityF& F, double window, double T_cap,
                                 double ode_dt) {
  if (!(window > 0.0)) throw Error("estimate_horizon: window must be positive");
  const TorusGeometry& g = phi0.geometry();
  const double M0 = phi0.max();
  const double m0 = phi0.min();
  const double h_max = F.h(g).max();
  const double h_min = F.h(g).min();
  auto f = [&](const Vec2& y) { return Vec2{F.s_part(y[0]) + h_max, F.s_part(y[1]) + h_min}; };
  auto inside = [&](const Vec2& y) { return y[0] <= M0 + window && y[1] >= m0 - window; };

  HorizonEstimate est;
  Vec2 y{M0, m0};
  double t = 0.0;
  est.times.push_back(t);
  est.upper.push_back(y[0]);
  est.lower.push_back(y[1]);
  while (t < T_cap) {
    const double h = std::min(ode_dt, T_cap - t);
    const Vec2 y1 = rk4(f, y, h);
    if (!inside(y1)) {
      // bisect the sub-step for the exit time
      double lo = 0.0, hi = h;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (inside(rk4(f, y, mid)) ? lo : hi) = mid;
      }
      const Vec2 ye = rk4(f, y, lo);
      est.T = t + lo;
      est.times.push_back(est.T);
      est.upper.push_back(ye[0]);
      est.lower.push_back(ye[1]);
      return est;
    }
    y = y1;
    t = (h == T_cap - t) ? T_cap : t + h;
    est.times.push_back(t);
    est.upper.push_back(y[0]);
    est.lower.push_back(y[1]);
  }
  est.T = T_cap;
  return est;
}

Envelopes comparison_envelopes(double M0, double m0, const NonlinearityF& F, const TorusGeometry& g,
                               const std::vector<double>& times, double ode_dt) {
  const double h_max = F.h(g).max();
  const double h_min = F.h(g).min();
  auto f = [&](const Vec2& y) { return Vec2{F.s_part(y[0]) + h_max, F.s_part(y[1]) + h_min}; };
  Envelopes env;
  Vec2 y{M0, m0};
  double t = 0.0;
  for (double target : times) {
    if (target < t) throw Error("comparison_envelopes: times must be ascending");
    const int sub = std::max(1, static_cast<int>(std::ceil((target - t) / ode_dt)));
    const double h = (target - t) / sub;
    for (int i = 0; i < sub && h > 0.0; ++i) y = rk4(f, y, h);
    t = target;
    env.upper.push_back(y[0]);
    env.lower.push_back(y[1]);
  }
  return env;
}

}  // namespace cmaf
