#pragma once

// Computable versions of the a-priori estimate quantities along a flow,
// and a numerical evaluator of the parabolic operator (d/dt - Delta_phi).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmaf/field.hpp"
#include "cmaf/flow.hpp"
#include "cmaf/kahler.hpp"

namespace cmaf {

struct MonitorSeries {
  std::string name;
  std::vector<double> times;
  std::vector<std::optional<double>> values;  // nullopt marks "undefined"
  std::map<std::string, double> parameters;
};

// --- C0 and phi_dot envelopes ---------------------------------------------

struct EnvelopeCheck {
  MonitorSeries upper;  // M_t
  MonitorSeries lower;  // m_t
  double max_violation = 0.0;  // max over snapshots of (phi - M_t)_+ and (m_t - phi)_+
  bool holds(double tol) const { return max_violation <= tol; }
};
// F must already include any constant shift applied by the flow (log_c).
EnvelopeCheck c0_envelopes(const Trajectory& traj, const NonlinearityF& F);

// sup |F'| over the comparison-envelope range of the trajectory.
double envelope_kappa(const Trajectory& traj, const NonlinearityF& F);

struct PhiDotCheck {
  MonitorSeries series;  // sup |phi_dot(t)|
  double kappa = 0.0;
  double worst_ratio = 0.0;  // max_t sup|phi_dot(t)| / (sup|phi_dot(0)| e^{kappa t})
  bool holds = false;        // sup|phi_dot(t)| <= sup|phi_dot(0)| e^{kappa t} (1 + rel_slack)
};
PhiDotCheck phidot_envelope(const Trajectory& traj, const NonlinearityF& F, double rel_slack = 1e-3);

// --- gradient and Laplacian quantities ------------------------------------

inline constexpr double kGradientFloor = 1e-30;

struct PointwiseMonitor {
  ScalarField field;
  std::vector<bool> included;   // all true unless an exclusion set applies
  std::optional<double> sup;    // nullopt when nothing is included
};

// K = t log beta - (A phi - phi^2 / A), beta = |grad phi|^2; points with
// beta <= beta_floor are excluded.
PointwiseMonitor blocki_K(const FlowState& state, double A, double beta_floor = kGradientFloor);

// max over snapshots with t > 0 of t log(sup beta(t)); nullopt when
// beta vanishes identically on every snapshot.
std::optional<double> gradient_shape_constant(const Trajectory& traj);

struct AubinYau {
  PointwiseMonitor H;  // e^{-alpha/t} log tr_g g_phi - A phi
  double weighted_gradient = 0.0;  // e^{-alpha/t} sup beta
  bool gradient_condition = false; // weighted_gradient <= 1
};
AubinYau aubin_yau_H(const FlowState& state, double alpha, double A);

// S = g^{i pbar} g^{q jbar} g^{k rbar} phi_{i jbar k} conj(phi_{p qbar r})
PointwiseMonitor third_order_S(const FlowState& state);

// -T_{i jbar} = Ric(g) + F'' phi_i phi_jbar + F' phi_{i jbar} + F_{i jbar}
//              + (F'_i phi_jbar + phi_i conj(F'_j)); Ric(g) = 0 on the flat torus.
ComplexTensorField stress_tensor_T(const FlowState& state, const NonlinearityF& F);

// (d/dt - Delta_phi) Q at snapshot `index`, by central differencing in time
// over the neighbouring snapshots.
enum class DefectQuantity { phi_dot, grad_norm_sq, S, log_trace };
ScalarField parabolic_defect(const Trajectory& traj, DefectQuantity q, std::size_t index);

// Exact right-hand side of the |grad phi|^2 evolution on the flat torus:
//   2 Re<grad phi, F' grad phi + grad F>_g
//     - g_phi^{i jbar} (phi_{pi} conj(phi_{pj}) + phi_{p jbar} conj(phi_{p ibar}))
ScalarField gradient_evolution_bound(const FlowState& state, const NonlinearityF& F);

// C(t) = a e^{b / t}
struct TimeProfile {
  double a = 1.0;
  double b = 0.0;
  double operator()(double t) const;
};
double composite_G(const FlowState& state, const TimeProfile& C1, const TimeProfile& C2, const TimeProfile& C3);

MonitorSeries ricci_norm_series(const Trajectory& traj);
MonitorSeries trace_series(const Trajectory& traj);
MonitorSeries S_series(const Trajectory& traj);

}  // namespace cmaf
