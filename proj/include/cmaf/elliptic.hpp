#pragma once

// Newton solvers for the elliptic complex Monge-Ampere equation:
//   fixed right-hand side   det(g_psi) = c f           (mean-zero gauge)
//   self-consistent          log det(g_phi) + F(phi, z) = 0

#include <optional>
#include <string>
#include <vector>

#include "cmaf/field.hpp"
#include "cmaf/kahler.hpp"

namespace cmaf {

// The residual is measured on the modes the spectral derivatives resolve
// (no axis at Nyquist); the aliased Nyquist part is reported separately.
struct EllipticOptions {
  double tol = 1e-10;        // sup-norm of the resolved log-form residual
  int max_iters = 50;
  int max_halvings = 30;
  double eps_pd = kPositivityFloor;
  int krylov_restart = 40;
  int krylov_max_iters = 400;
};

struct EllipticReport {
  ScalarField solution;
  double c = 1.0;
  double residual_sup = 0.0;            // resolved modes only: what Newton drives to tol
  double pointwise_residual_sup = 0.0;  // includes the aliased Nyquist part
  int newton_iters = 0;
  bool converged = false;
  std::vector<double> residual_history;  // entry 0 is the initial residual
  std::vector<std::string> warnings;
};

// c = volume / integral of f = 1 / mean(f).
double compatibility_constant(const ScalarField& f);

EllipticReport solve_fixed_rhs(const ScalarField& f, const EllipticOptions& opts = {},
                               const std::optional<ScalarField>& init = std::nullopt);

EllipticReport solve_self_consistent(const NonlinearityF& F, const TorusGeometry& g, const EllipticOptions& opts = {},
                                     const std::optional<ScalarField>& init = std::nullopt);

// psi + k0 with k0 chosen so that sup(psi - phi) == sup(phi - psi).
ScalarField normalize_against(const ScalarField& psi, const ScalarField& phi);

}  // namespace cmaf
