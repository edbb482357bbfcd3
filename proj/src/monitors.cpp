#include "cmaf/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cmaf {

namespace {

std::vector<double> snapshot_times(const Trajectory& traj) {
  std::vector<double> t;
  for (const FlowState& s : traj.snapshots) t.push_back(s.t);
  return t;
}

const ScalarField& require_phi_dot(const FlowState& s) {
  if (!s.phi_dot) throw Error("monitor: snapshot at t = " + std::to_string(s.t) + " has no cached phi_dot");
  return *s.phi_dot;
}

}  // namespace

EnvelopeCheck c0_envelopes(const Trajectory& traj, const NonlinearityF& F) {
  if (traj.snapshots.empty()) throw Error("c0_envelopes: empty trajectory");
  const FlowState& first = traj.snapshots.front();
  const auto times = snapshot_times(traj);
  const Envelopes env = comparison_envelopes(first.phi.max(), first.phi.min(), F, first.phi.geometry(), times);
  EnvelopeCheck out;
  out.upper.name = "M_t";
  out.lower.name = "m_t";
  out.upper.times = out.lower.times = times;
  for (std::size_t i = 0; i < times.size(); ++i) {
    out.upper.values.emplace_back(env.upper[i]);
    out.lower.values.emplace_back(env.lower[i]);
    const ScalarField& phi = traj.snapshots[i].phi;
    out.max_violation = std::max({out.max_violation, phi.max() - env.upper[i], env.lower[i] - phi.min()});
  }
  return out;
}

double envelope_kappa(const Trajectory& traj, const NonlinearityF& F) {
  const EnvelopeCheck env = c0_envelopes(traj, F);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < env.upper.values.size(); ++i) {
    hi = std::max({hi, *env.upper.values[i], traj.snapshots[i].phi.max()});
    lo = std::min({lo, *env.lower.values[i], traj.snapshots[i].phi.min()});
  }
  return F.kappa(lo, hi);
}

PhiDotCheck phidot_envelope(const Trajectory& traj, const NonlinearityF& F, double rel_slack) {
  PhiDotCheck out;
  out.kappa = envelope_kappa(traj, F);
  out.series.name = "sup_abs_phi_dot";
  out.series.parameters["kappa"] = out.kappa;
  const double s0 = require_phi_dot(traj.snapshots.front()).sup_abs();
  out.holds = true;
  for (const FlowState& s : traj.snapshots) {
    const double v = require_phi_dot(s).sup_abs();
    out.series.times.push_back(s.t);
    out.series.values.emplace_back(v);
    const double bound = s0 * std::exp(out.kappa * s.t);
    if (bound > 0.0) out.worst_ratio = std::max(out.worst_ratio, v / bound);
    else if (v > 0.0) out.worst_ratio = std::numeric_limits<double>::infinity();
    out.holds = out.holds && v <= bound * (1.0 + rel_slack);
  }
  return out;
}

PointwiseMonitor blocki_K(const FlowState& state, double A, double beta_floor) {
  if (!(A > 0.0)) throw Error("blocki_K: A must be positive");
  if (!(state.t > 0.0)) throw Error("blocki_K: needs t > 0");
  const ScalarField beta = grad_norm_sq(state.phi);
  PointwiseMonitor out{ScalarField(state.phi.geometry()), std::vector<bool>(beta.size(), false), std::nullopt};
  for (std::size_t p = 0; p < beta.size(); ++p) {
    const double phi = state.phi[p];
    const double gamma = A * phi - phi * phi / A;
    if (beta[p] > beta_floor) {
      out.included[p] = true;
      out.field[p] = state.t * std::log(beta[p]) - gamma;
      out.sup = out.sup ? std::max(*out.sup, out.field[p]) : out.field[p];
    } else {
      out.field[p] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

std::optional<double> gradient_shape_constant(const Trajectory& traj) {
  std::optional<double> c;
  for (const FlowState& s : traj.snapshots) {
    if (!(s.t > 0.0)) continue;
    const double beta_sup = grad_norm_sq(s.phi).max();
    if (!(beta_sup > kGradientFloor)) continue;
    const double v = s.t * std::log(beta_sup);
    c = c ? std::max(*c, v) : v;
  }
  return c;
}

AubinYau aubin_yau_H(const FlowState& state, double alpha, double A) {
  if (!(state.t > 0.0)) throw Error("aubin_yau_H: needs t > 0");
  if (!(alpha > 0.0)) throw Error("aubin_yau_H: alpha must be positive");
  const double w = std::exp(-alpha / state.t);
  const Traces tr = traces(state.metric);
  AubinYau out{PointwiseMonitor{ScalarField(state.phi.geometry()), std::vector<bool>(state.phi.size(), true),
                                std::nullopt},
               0.0, false};
  for (std::size_t p = 0; p < state.phi.size(); ++p) out.H.field[p] = w * std::log(tr.trace[p]) - A * state.phi[p];
  out.H.sup = out.H.field.max();
  out.weighted_gradient = w * grad_norm_sq(state.phi).max();
  out.gradient_condition = out.weighted_gradient <= 1.0;
  return out;
}

PointwiseMonitor third_order_S(const FlowState& state) {
  const ComplexTensorField X = third_mixed(state.phi);
  const int n = state.phi.geometry().n();
  PointwiseMonitor out{ScalarField(state.phi.geometry()), std::vector<bool>(state.phi.size(), true), std::nullopt};
  for (std::size_t p = 0; p < state.phi.size(); ++p) {
    const HermitianMatrix inv = state.metric.at(p).inverse();
    // g^{a bbar} = inv(b, a)
    auto up = [&](int a, int b) { return inv(b, a); };
    cplx s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const cplx x = X.at(X.component_index(i, j, k), p);
          for (int pp = 0; pp < n; ++pp)
            for (int q = 0; q < n; ++q)
              for (int r = 0; r < n; ++r)
                s += up(i, pp) * up(q, j) * up(k, r) * x * std::conj(X.at(X.component_index(pp, q, r), p));
        }
    // a squared norm; only roundoff can push it below zero
    out.field[p] = std::max(0.0, s.real());
  }
  out.sup = out.field.max();
  return out;
}

ComplexTensorField stress_tensor_T(const FlowState& state, const NonlinearityF& F) {
  const TorusGeometry& g = state.phi.geometry();
  const int n = g.n();
  const ComplexTensorField grad = gradient(state.phi);
  const ComplexTensorField hess = hessian(state.phi);
  const ComplexTensorField h_hess = F_hess_z(F, g);
  const ComplexTensorField fp_grad = F_prime_grad_z(F, g);
  const ScalarField fp = F_prime(F, state.phi);
  const ScalarField fpp = F_second(F, state.phi);
  ComplexTensorField T(g, {IndexKind::holomorphic, IndexKind::antiholomorphic});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t c = T.component_index(i, j);
      for (std::size_t p = 0; p < g.size(); ++p) {
        const cplx phi_i = grad.at(i, p);
        const cplx phi_jbar = std::conj(grad.at(j, p));
        const cplx sym = fp_grad.at(i, p) * phi_jbar + phi_i * std::conj(fp_grad.at(j, p));
        T.at(c, p) = -(fpp[p] * phi_i * phi_jbar + fp[p] * hess.at(c, p) + h_hess.at(c, p) + sym);
      }
    }
  return T;
}

namespace {

ScalarField quantity(const FlowState& s, DefectQuantity q) {
  switch (q) {
    case DefectQuantity::phi_dot:
      return require_phi_dot(s);
    case DefectQuantity::grad_norm_sq:
      return grad_norm_sq(s.phi);
    case DefectQuantity::S:
      return third_order_S(s).field;
    case DefectQuantity::log_trace: {
      ScalarField tr = traces(s.metric).trace;
      for (std::size_t p = 0; p < tr.size(); ++p) tr[p] = std::log(tr[p]);
      return tr;
    }
  }
  throw Error("parabolic_defect: unknown quantity");
}

}  // namespace

ScalarField parabolic_defect(const Trajectory& traj, DefectQuantity q, std::size_t index) {
  if (index == 0 || index + 1 >= traj.snapshots.size())
    throw Error("parabolic_defect: snapshot " + std::to_string(index) + " has no neighbours on both sides");
  const FlowState& prev = traj.snapshots[index - 1];
  const FlowState& cur = traj.snapshots[index];
  const FlowState& next = traj.snapshots[index + 1];
  const double hm = cur.t - prev.t;
  const double hp = next.t - cur.t;
  const ScalarField qm = quantity(prev, q);
  const ScalarField q0 = quantity(cur, q);
  const ScalarField qp = quantity(next, q);
  const ScalarField lap = laplacian_wrt(cur.metric, q0);
  ScalarField out(q0.geometry());
  const double denom = hm * hp * (hm + hp);
  for (std::size_t p = 0; p < out.size(); ++p) {
    // three-point derivative, second order on uneven spacing
    const double dt = (hm * hm * qp[p] - hp * hp * qm[p] + (hp * hp - hm * hm) * q0[p]) / denom;
    out[p] = dt - lap[p];
  }
  return out;
}

ScalarField gradient_evolution_bound(const FlowState& state, const NonlinearityF& F) {
  const TorusGeometry& g = state.phi.geometry();
  const int n = g.n();
  const ComplexTensorField grad = gradient(state.phi);
  const ComplexTensorField hess = hessian(state.phi);
  const ComplexTensorField hol = holomorphic_hessian(state.phi);
  const ComplexTensorField h_grad = F_grad_z(F, g);
  const ScalarField fp = F_prime(F, state.phi);
  ScalarField out(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    double reaction = 0.0;
    for (int i = 0; i < n; ++i) {
      const cplx phi_i = grad.at(i, p);
      reaction += 2.0 * (std::conj(phi_i) * (fp[p] * phi_i + h_grad.at(i, p))).real();
    }
    const HermitianMatrix inv = state.metric.at(p).inverse();
    cplx good = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cplx inner = 0.0;
        for (int q = 0; q < n; ++q)
          inner += hol.at(hol.component_index(q, i), p) * std::conj(hol.at(hol.component_index(q, j), p)) +
                   hess.at(hess.component_index(q, j), p) * std::conj(hess.at(hess.component_index(q, i), p));
        good += inv(j, i) * inner;
      }
    out[p] = reaction - good.real();
  }
  return out;
}

double TimeProfile::operator()(double t) const { return a * std::exp(b / t); }

double composite_G(const FlowState& state, const TimeProfile& C1, const TimeProfile& C2, const TimeProfile& C3) {
  const double c1 = C1(state.t), c2 = C2(state.t), c3 = C3(state.t);
  if (!(c1 > 0.0 && c2 > 0.0 && c3 > 0.0)) throw Error("composite_G: weights must be positive");
  const ScalarField S = third_order_S(state).field;
  const ScalarField tr = traces(state.metric).trace;
  const ScalarField beta = grad_norm_sq(state.phi);
  double G = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < S.size(); ++p) G = std::max(G, S[p] / c1 + tr[p] / c2 + beta[p] / c3);
  return G;
}

namespace {

template <class Fn>
MonitorSeries series_of(const Trajectory& traj, std::string name, Fn&& sup_of) {
  MonitorSeries s;
  s.name = std::move(name);
  for (const FlowState& st : traj.snapshots) {
    s.times.push_back(st.t);
    s.values.emplace_back(sup_of(st));
  }
  return s;
}

}  // namespace

MonitorSeries ricci_norm_series(const Trajectory& traj) {
  return series_of(traj, "sup_ricci_norm", [](const FlowState& s) { return ricci(s.metric).norm.max(); });
}

MonitorSeries trace_series(const Trajectory& traj) {
  return series_of(traj, "sup_trace", [](const FlowState& s) { return traces(s.metric).trace.max(); });
}

MonitorSeries S_series(const Trajectory& traj) {
  return series_of(traj, "sup_S", [](const FlowState& s) { return *third_order_S(s).sup; });
}

}  // namespace cmaf
