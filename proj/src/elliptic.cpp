#include "cmaf/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "krylov.hpp"
#include "spectral_detail.hpp"

namespace cmaf {

namespace {

// Inverse of the constant-coefficient operator lambda * Delta_g + shift,
// applied in Fourier space; modes where the symbol vanishes map to 0.
std::vector<double> constant_coefficient_inverse(const TorusGeometry& g, std::span<const double> v, double lambda,
                                                 double shift) {
  ScalarField f(g, std::vector<double>(v.begin(), v.end()));
  std::vector<cplx> out(g.size());
  detail::Spectrum(f).synthesize(
      [&](const detail::Wavevector& k) {
        double k2 = 0.0;
        for (int a = 0; a < g.real_axes(); ++a) k2 += static_cast<double>(k[a]) * k[a];
        const double symbol = -M_PI * M_PI * k2 * lambda + shift;
        return std::abs(symbol) < 1e-14 ? cplx(0.0) : cplx(1.0 / symbol);
      },
      out);
  std::vector<double> r(g.size());
  for (std::size_t p = 0; p < r.size(); ++p) r[p] = out[p].real();
  return r;
}

// Modes with an axis at Nyquist are invisible to every derivative, so the
// discrete equation can only be solved on the remaining (resolved) modes.
ScalarField resolved(const ScalarField& f) { return fourier_truncate(f, f.geometry().N() / 2 - 1); }

std::vector<double> resolved(const TorusGeometry& g, std::vector<double> v) {
  const ScalarField r = resolved(ScalarField(g, std::move(v)));
  return {r.values().begin(), r.values().end()};
}

void remove_mean(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  s /= static_cast<double>(v.size());
  for (double& x : v) x -= s;
}

struct Iterate {
  ScalarField potential;
  MetricField metric;
  ScalarField residual;
  double residual_sup;
};

// Shared damped-Newton driver. `residual` maps a metric + potential to the
// log-form residual; `solve` returns the Newton correction for an iterate.
EllipticReport newton(ScalarField start, const EllipticOptions& opts,
                      const std::function<ScalarField(const ScalarField&, const MetricField&)>& residual,
                      const std::function<std::vector<double>(const Iterate&)>& solve, bool mean_zero,
                      const std::function<void(const ScalarField&)>& observe) {
  if (mean_zero) start += -start.mean();
  const TorusGeometry g = start.geometry();
  MetricField m0 = MetricField::from_potential(start, opts.eps_pd);
  ScalarField r0 = resolved(residual(start, m0));
  Iterate it{std::move(start), std::move(m0), r0, r0.sup_abs()};
  EllipticReport rep{it.potential, 1.0, it.residual_sup, 0.0, 0, false, {it.residual_sup}, {}};
  if (observe) observe(it.potential);

  while (it.residual_sup > opts.tol && rep.newton_iters < opts.max_iters) {
    std::vector<double> v = resolved(g, solve(it));
    if (mean_zero) remove_mean(v);
    double step = 1.0;
    bool accepted = false;
    bool any_positive = false;
    for (int h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
      ScalarField trial = it.potential;
      for (std::size_t p = 0; p < trial.size(); ++p) trial[p] += step * v[p];
      try {
        MetricField m = MetricField::from_potential(trial, opts.eps_pd);
        any_positive = true;
        ScalarField r = resolved(residual(trial, m));
        const double rs = r.sup_abs();
        if (rs < it.residual_sup) {
          it = Iterate{std::move(trial), std::move(m), std::move(r), rs};
          accepted = true;
          break;
        }
      } catch (const ConeExitError&) {
        // halve and retry
      }
    }
    if (!accepted) {
      if (!any_positive) throw Error("elliptic solve: Newton step leaves the positive cone after backtracking");
      rep.warnings.push_back("Newton step failed to reduce the residual after backtracking");
      break;
    }
    ++rep.newton_iters;
    rep.residual_history.push_back(it.residual_sup);
    if (observe) observe(it.potential);
  }
  rep.solution = it.potential;
  rep.residual_sup = it.residual_sup;
  rep.pointwise_residual_sup = residual(it.potential, it.metric).sup_abs();
  rep.converged = it.residual_sup <= opts.tol;
  return rep;
}

double krylov_tolerance(const ScalarField& r) {
  // forcing term ~ min(0.1, |r|) keeps Newton quadratic
  const double norm = detail::norm2(r.values());
  return std::max(1e-14, norm * std::min(1e-2, r.sup_abs()));
}

}  // namespace

double compatibility_constant(const ScalarField& f) {
  require_finite(f, "compatibility_constant");
  for (std::size_t p = 0; p < f.size(); ++p)
    if (!(f[p] > 0.0)) throw Error("compatibility_constant: density must be positive (grid index " + std::to_string(p) + ")");
  return 1.0 / f.mean();
}

EllipticReport solve_fixed_rhs(const ScalarField& f, const EllipticOptions& opts, const std::optional<ScalarField>& init) {
  const double c = compatibility_constant(f);
  const TorusGeometry g = f.geometry();
  ScalarField target(g);
  for (std::size_t p = 0; p < g.size(); ++p) target[p] = std::log(c * f[p]);

  auto residual = [&](const ScalarField&, const MetricField& m) { return log_det_ratio(m) - target; };

  // Projected linearization: P0 Delta_psi v = -P0 r on mean-zero functions.
  // It is nonsingular and its solution drives r to zero because
  // mean(det g_psi) = mean(c f) = 1 exactly.
  auto solve = [&](const Iterate& it) {
    const double lambda = traces(it.metric).inverse_trace.mean() / g.n();
    std::vector<double> rhs(it.residual.values().begin(), it.residual.values().end());
    for (double& x : rhs) x = -x;
    remove_mean(rhs);
    auto apply = [&](const std::vector<double>& v) {
      ScalarField vf(g, v);
      ScalarField av = resolved(laplacian_wrt(it.metric, vf));
      std::vector<double> out(av.values().begin(), av.values().end());
      remove_mean(out);
      return out;
    };
    auto precondition = [&](const std::vector<double>& v) {
      std::vector<double> w = v;
      remove_mean(w);
      return resolved(g, constant_coefficient_inverse(g, w, lambda, 0.0));
    };
    return detail::gmres(apply, precondition, rhs, krylov_tolerance(it.residual), opts.krylov_restart,
                         opts.krylov_max_iters)
        .x;
  };

  ScalarField start = init ? *init : ScalarField(g);
  if (!(start.geometry() == g)) throw Error("solve_fixed_rhs: initial guess on a different grid");
  EllipticReport rep = newton(std::move(start), opts, residual, solve, true, nullptr);
  rep.c = c;
  return rep;
}

EllipticReport solve_self_consistent(const NonlinearityF& F, const TorusGeometry& g, const EllipticOptions& opts,
                                     const std::optional<ScalarField>& init) {
  bool warned = false;
  std::vector<std::string> warnings;
  auto observe = [&](const ScalarField& phi) {
    if (!warned) {
      const double lo = phi.min();
      const double hi = phi.max();
      // F' < 0 somewhere on the visited range?
      bool negative = F.d_s(lo) < 0.0 || F.d_s(hi) < 0.0;
      if (F.b() != 0.0)
        for (double m = std::ceil(lo / M_PI); m * M_PI <= hi; m += 1.0) negative = negative || F.d_s(m * M_PI) < 0.0;
      if (negative) {
        warned = true;
        warnings.push_back("F' < 0 on the solution range: uniqueness is not guaranteed");
      }
    }
  };

  auto residual = [&](const ScalarField& phi, const MetricField& m) { return log_det_ratio(m) + F_value(F, phi); };

  auto solve = [&](const Iterate& it) {
    const ScalarField fp = F_prime(F, it.potential);
    const double lambda = traces(it.metric).inverse_trace.mean() / g.n();
    const double shift = fp.mean();
    std::vector<double> rhs(it.residual.values().begin(), it.residual.values().end());
    for (double& x : rhs) x = -x;
    auto apply = [&](const std::vector<double>& v) {
      ScalarField vf(g, v);
      ScalarField av = laplacian_wrt(it.metric, vf);
      for (std::size_t p = 0; p < av.size(); ++p) av[p] += fp[p] * v[p];
      av = resolved(av);
      return std::vector<double>(av.values().begin(), av.values().end());
    };
    auto precondition = [&](const std::vector<double>& v) {
      return resolved(g, constant_coefficient_inverse(g, v, lambda, shift));
    };
    return detail::gmres(apply, precondition, rhs, krylov_tolerance(it.residual), opts.krylov_restart,
                         opts.krylov_max_iters)
        .x;
  };

  ScalarField start = init ? *init : ScalarField(g);
  if (!(start.geometry() == g)) throw Error("solve_self_consistent: initial guess on a different grid");
  EllipticReport rep = newton(std::move(start), opts, residual, solve, false, observe);
  rep.c = 1.0;
  rep.warnings.insert(rep.warnings.begin(), warnings.begin(), warnings.end());
  return rep;
}

ScalarField normalize_against(const ScalarField& psi, const ScalarField& phi) {
  if (!(psi.geometry() == phi.geometry())) throw Error("normalize_against: geometry mismatch");
  double up = -std::numeric_limits<double>::infinity();    // sup(psi - phi)
  double down = -std::numeric_limits<double>::infinity();  // sup(phi - psi)
  for (std::size_t p = 0; p < psi.size(); ++p) {
    up = std::max(up, psi[p] - phi[p]);
    down = std::max(down, phi[p] - psi[p]);
  }
  return psi + 0.5 * (down - up);
}

}  // namespace cmaf
