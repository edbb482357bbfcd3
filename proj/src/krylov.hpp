#pragma once

// Restarted GMRES with right preconditioning, matrix-free.

#include <cmath>
#include <span>
#include <vector>

namespace cmaf::detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct KrylovResult {
  std::vector<double> x;
  double residual = 0.0;  // ||b - A x||_2
  int iterations = 0;
};

// Solves A x = b from x = 0. apply(v) -> A v, precondition(v) -> M^{-1} v.
template <class Apply, class Precondition>
KrylovResult gmres(Apply&& apply, Precondition&& precondition, const std::vector<double>& b, double tol, int restart,
                   int max_iters) {
  const std::size_t n = b.size();
  KrylovResult out;
  out.x.assign(n, 0.0);
  std::vector<double> r = b;
  double beta = norm2(r);
  out.residual = beta;
  while (out.iterations < max_iters && beta > tol) {
    const int m = restart;
    std::vector<std::vector<double>> V(m + 1, std::vector<double>(n));
    std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m), sn(m), e(m + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
    e[0] = beta;
    int k = 0;
    for (; k < m && out.iterations < max_iters; ++k) {
      ++out.iterations;
      std::vector<double> w = apply(precondition(V[k]));
      for (int i = 0; i <= k; ++i) {
        H[i][k] = dot(w, V[i]);
        for (std::size_t q = 0; q < n; ++q) w[q] -= H[i][k] * V[i][q];
      }
      H[k + 1][k] = norm2(w);
      if (H[k + 1][k] > 0.0)
        for (std::size_t q = 0; q < n; ++q) V[k + 1][q] = w[q] / H[k + 1][k];
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * H[i][k] + sn[i] * H[i + 1][k];
        H[i + 1][k] = -sn[i] * H[i][k] + cs[i] * H[i + 1][k];
        H[i][k] = t;
      }
      const double denom = std::hypot(H[k][k], H[k + 1][k]);
      cs[k] = denom > 0.0 ? H[k][k] / denom : 1.0;
      sn[k] = denom > 0.0 ? H[k + 1][k] / denom : 0.0;
      H[k][k] = denom;
      H[k + 1][k] = 0.0;
      e[k + 1] = -sn[k] * e[k];
      e[k] = cs[k] * e[k];
      if (std::abs(e[k + 1]) <= tol || denom == 0.0) {
        ++k;
        break;
      }
    }
    // back substitution for the Krylov coefficients
    std::vector<double> y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
      double s = e[i];
      for (int j = i + 1; j < k; ++j) s -= H[i][j] * y[j];
      y[i] = H[i][i] != 0.0 ? s / H[i][i] : 0.0;
    }
    std::vector<double> u(n, 0.0);
    for (int j = 0; j < k; ++j)
      for (std::size_t q = 0; q < n; ++q) u[q] += y[j] * V[j][q];
    const std::vector<double> du = precondition(u);
    for (std::size_t q = 0; q < n; ++q) out.x[q] += du[q];
    const std::vector<double> ax = apply(out.x);
    for (std::size_t q = 0; q < n; ++q) r[q] = b[q] - ax[q];
    const double new_beta = norm2(r);
    out.residual = new_beta;
    if (!(new_beta < beta)) break;  // stagnation
    beta = new_beta;
  }
  return out;
}

}  // namespace cmaf::detail
