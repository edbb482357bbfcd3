#pragma once

// Explicit time integration of
//   d phi / dt = log det(g_phi) + F(phi, z) - log_c
// with positivity safeguarding and parabolic CFL control, plus the
// comparison-ODE horizon estimate.

#include <memory>
#include <optional>
#include <vector>

#include "cmaf/field.hpp"
#include "cmaf/kahler.hpp"

namespace cmaf {

struct FlowState {
  double t = 0.0;
  ScalarField phi;
  MetricField metric;
  std::optional<ScalarField> phi_dot;  // RHS at (t, phi) when cached

  // Builds the metric cache; evaluates phi_dot when F is given.
  static FlowState make(double t, ScalarField phi, const NonlinearityF* F = nullptr, double log_c = 0.0,
                        double eps_pd = kPositivityFloor);
};

struct FlowConfig {
  double T = 1.0;
  double dt_init = 1e-3;  // upper bound on every step
  double safety = 0.25;   // CFL fraction
  double log_c = 0.0;
  std::vector<double> snapshot_times;  // 0 and T are always added
  double eps_pd = kPositivityFloor;
  int max_halvings = 20;

  void validate() const;
};

struct StepRecord {
  double t = 0.0;   // time at the end of the step
  double dt = 0.0;  // accepted step size
  int halvings = 0;
  double sup_abs_phi = 0.0;
  double inf_phi = 0.0;
  double sup_phi = 0.0;
  double sup_abs_phi_dot = 0.0;
  double min_eigenvalue = 0.0;
  double mean_det_ratio = 0.0;
};

struct Trajectory {
  std::vector<FlowState> snapshots;
  std::vector<StepRecord> series;  // entry 0 describes the initial state
  FlowConfig config;

  const FlowState& at_time(double t, double tol = 1e-12) const;
};

class PositivityBreakdown : public Error {
 public:
  PositivityBreakdown(const std::string& what, FlowState state, std::shared_ptr<Trajectory> partial = nullptr)
      : Error(what), state_(std::move(state)), partial_(std::move(partial)) {}
  const FlowState& state() const { return state_; }
  const std::shared_ptr<Trajectory>& partial() const { return partial_; }

 private:
  FlowState state_;
  std::shared_ptr<Trajectory> partial_;
};

ScalarField rhs(const ScalarField& phi, const NonlinearityF& F, double log_c, double eps_pd = kPositivityFloor);
ScalarField rhs(const MetricField& metric, const ScalarField& phi, const NonlinearityF& F, double log_c);

struct StepResult {
  FlowState state;
  double dt = 0.0;  // step actually taken
  int halvings = 0;
};

// One explicit midpoint (RK2) step; halves dt on cone exit.
StepResult step(const FlowState& state, double dt, const NonlinearityF& F, double log_c,
                double eps_pd = kPositivityFloor, int max_halvings = 20);

// Stable step for the current state: safety * h^2 / sup tr_{g_phi} g.
double cfl_step(const FlowState& state, double safety);

Trajectory run(const ScalarField& phi0, const NonlinearityF& F, const FlowConfig& config);

struct HorizonEstimate {
  double T = 0.0;
  std::vector<double> times;
  std::vector<double> upper;  // M_t, dM/dt = sup_z F(M, z)
  std::vector<double> lower;  // m_t, dm/dt = inf_z F(m, z)
};

// Comparison ODEs integrated with RK4 from (sup phi0, inf phi0); T is the
// largest time <= T_cap with M_t <= M_0 + window and m_t >= m_0 - window.
HorizonEstimate estimate_horizon(const ScalarField& phi0, const NonlinearityF& F, double window = 1.0,
                                 double T_cap = 5.0, double ode_dt = 1e-3);

// Envelope values at arbitrary times (RK4, substeps of at most ode_dt).
struct Envelopes {
  std::vector<double> upper;
  std::vector<double> lower;
};
Envelopes comparison_envelopes(double M0, double m0, const NonlinearityF& F, const TorusGeometry& g,
                               const std::vector<double>& times, double ode_dt = 1e-3);

}  // namespace cmaf
