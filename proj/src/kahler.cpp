#include "cmaf/kahler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cmaf {

double HermitianMatrix::trace() const { return n == 1 ? m[0].real() : m[0].real() + m[3].real(); }

double HermitianMatrix::det() const {
  if (n == 1) return m[0].real();
  return m[0].real() * m[3].real() - std::norm(m[1]);
}

std::array<double, 2> HermitianMatrix::eigenvalues() const {
  if (n == 1) return {m[0].real(), m[0].real()};
  const double a = m[0].real();
  const double d = m[3].real();
  const double half = 0.5 * (a - d);
  const double r = std::sqrt(half * half + std::norm(m[1]));
  const double hi = 0.5 * (a + d) + r;
  double lo = 0.5 * (a + d) - r;
  // recover the small eigenvalue from the determinant when it would cancel
  if (hi > 0.0 && std::abs(lo) < 1e-3 * hi) lo = det() / hi;
  return {lo, hi};
}

double HermitianMatrix::min_eigenvalue() const { return eigenvalues()[0]; }

HermitianMatrix HermitianMatrix::inverse() const {
  HermitianMatrix inv;
  inv.n = n;
  if (n == 1) {
    inv.m[0] = 1.0 / m[0].real();
    return inv;
  }
  const double dt = det();
  inv.m[0] = m[3].real() / dt;
  inv.m[3] = m[0].real() / dt;
  inv.m[1] = -m[1] / dt;
  inv.m[2] = -m[2] / dt;
  return inv;
}

MetricField::MetricField(ComplexTensorField h) : h_(std::move(h)) {}

HermitianMatrix MetricField::at(std::size_t p) const {
  HermitianMatrix a;
  const int n = h_.geometry().n();
  a.n = n;
  if (n == 1) {
    a.m[0] = h_.at(0, p);
    return a;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = h_.at(h_.component_index(i, j), p);
  return a;
}

MetricField MetricField::from_tensor(ComplexTensorField h, double eps_pd) {
  if (h.rank() != 2 || h.kinds()[0] != IndexKind::holomorphic || h.kinds()[1] != IndexKind::antiholomorphic)
    throw Error("MetricField: tensor must be of type (1,1)");
  MetricField m(std::move(h));
  m.min_eig_ = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < m.geometry().size(); ++p) {
    const double e = m.at(p).min_eigenvalue();
    if (!(e >= m.min_eig_)) {
      m.min_eig_ = e;
      m.min_eig_point_ = p;
    }
  }
  if (!(m.min_eig_ > eps_pd)) throw ConeExitError(m.min_eig_point_, m.min_eig_);
  return m;
}

MetricField MetricField::from_potential(const ScalarField& phi, double eps_pd) {
  ComplexTensorField h = hessian(phi);
  const int n = phi.geometry().n();
  for (int i = 0; i < n; ++i)
    for (cplx& v : h.component(h.component_index(i, i))) v += 1.0;
  return from_tensor(std::move(h), eps_pd);
}

ScalarField det_ratio(const MetricField& m) {
  ScalarField out(m.geometry());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = m.at(p).det();
  return out;
}

ScalarField log_det_ratio(const MetricField& m) {
  ScalarField out(m.geometry());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::log(m.at(p).det());
  return out;
}

Traces traces(const MetricField& m) {
  Traces t{ScalarField(m.geometry()), ScalarField(m.geometry())};
  for (std::size_t p = 0; p < m.geometry().size(); ++p) {
    const HermitianMatrix a = m.at(p);
    t.trace[p] = a.trace();
    t.inverse_trace[p] = a.inverse().trace();
  }
  return t;
}

double min_eigenvalue(const MetricField& m) { return m.min_eigenvalue(); }

ComplexTensorField inverse(const MetricField& m) {
  ComplexTensorField out(m.geometry(), {IndexKind::holomorphic, IndexKind::antiholomorphic});
  const int n = m.geometry().n();
  for (std::size_t p = 0; p < m.geometry().size(); ++p) {
    const HermitianMatrix inv = m.at(p).inverse();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.at(out.component_index(i, j), p) = inv(i, j);
  }
  return out;
}

ScalarField contract(const MetricField& m, const ComplexTensorField& a) {
  if (!(a.geometry() == m.geometry())) throw Error("contract: geometry mismatch");
  ScalarField out(m.geometry());
  const int n = m.geometry().n();
  for (std::size_t p = 0; p < out.size(); ++p) {
    const HermitianMatrix inv = m.at(p).inverse();
    cplx s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += inv(i, j) * a.at(a.component_index(j, i), p);
    out[p] = s.real();
  }
  return out;
}

ScalarField laplacian_wrt(const MetricField& m, const ScalarField& f) { return contract(m, hessian(f)); }

ScalarField hermitian_norm(const MetricField& m, const ComplexTensorField& a) {
  ScalarField out(m.geometry());
  const int n = m.geometry().n();
  for (std::size_t p = 0; p < out.size(); ++p) {
    const HermitianMatrix inv = m.at(p).inverse();
    // B = G^{-1} A, |A|^2 = tr(B B)
    cplx b[2][2] = {};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) b[i][j] += inv(i, k) * a.at(a.component_index(k, j), p);
    cplx s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += b[i][j] * b[j][i];
    out[p] = std::sqrt(std::max(0.0, s.real()));
  }
  return out;
}

Ricci ricci(const MetricField& m) {
  ComplexTensorField r = hessian(log_det_ratio(m));
  for (std::size_t c = 0; c < r.components(); ++c)
    for (cplx& v : r.component(c)) v = -v;
  ScalarField norm = hermitian_norm(m, r);
  return {std::move(r), std::move(norm)};
}

// --- nonlinearity ------------------------------------------------------------

NonlinearityF::NonlinearityF(double a, double b, std::vector<TrigTerm> terms)
    : a_(a), b_(b), terms_(std::move(terms)), cache_(std::make_shared<Cache>()) {}

NonlinearityF NonlinearityF::with_forcing(ScalarField forcing) const {
  NonlinearityF out(a_, b_, terms_);
  out.shift_ = shift_;
  if (forcing_) forcing += *forcing_;
  out.forcing_ = std::move(forcing);
  return out;
}

NonlinearityF NonlinearityF::shifted(double c) const {
  NonlinearityF out(a_, b_, terms_);
  out.forcing_ = forcing_;
  out.shift_ = shift_ + c;
  return out;
}

double NonlinearityF::s_part(double s) const { return b_ == 0.0 ? a_ * s : a_ * s + b_ * std::sin(s); }
double NonlinearityF::d_s(double s) const { return a_ + b_ * std::cos(s); }
double NonlinearityF::d_ss(double s) const { return -b_ * std::sin(s); }

const ScalarField& NonlinearityF::h(const TorusGeometry& g) const {
  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto key = std::make_pair(g.n(), g.N());
  if (auto it = cache_->h.find(key); it != cache_->h.end()) return *it->second;
  for (const TrigTerm& t : terms_)
    if (static_cast<int>(t.wavevector.size()) > g.real_axes())
      throw Error("NonlinearityF: trig term has more wavevector entries than real axes");
  ScalarField h = ScalarField::sample(g, [&](std::span<const double> x) {
    double v = 0.0;
    for (const TrigTerm& t : terms_) {
      double arg = t.phase;
      for (std::size_t a = 0; a < t.wavevector.size(); ++a) arg += 2.0 * M_PI * t.wavevector[a] * x[a];
      v += t.amplitude * std::cos(arg);
    }
    return v;
  });
  if (forcing_) {
    if (!(forcing_->geometry() == g)) throw Error("NonlinearityF: forcing sampled on a different grid");
    h += *forcing_;
  }
  h += shift_;
  auto stored = std::make_shared<const ScalarField>(std::move(h));
  cache_->h.emplace(key, stored);
  return *stored;
}

double NonlinearityF::upper(double s, const TorusGeometry& g) const { return s_part(s) + h(g).max(); }
double NonlinearityF::lower(double s, const TorusGeometry& g) const { return s_part(s) + h(g).min(); }

double NonlinearityF::kappa(double lo, double hi) const {
  if (lo > hi) std::swap(lo, hi);
  double k = std::max(std::abs(d_s(lo)), std::abs(d_s(hi)));
  if (b_ != 0.0) {
    // interior extrema of cos at multiples of pi
    for (double m = std::ceil(lo / M_PI); m * M_PI <= hi; m += 1.0) k = std::max(k, std::abs(d_s(m * M_PI)));
  }
  return k;
}

FMode parse_fmode(std::string_view name) {
  if (name == "F") return FMode::value;
  if (name == "F'" || name == "d_s") return FMode::d_s;
  if (name == "F''" || name == "d_ss") return FMode::d_ss;
  if (name == "grad_z") return FMode::grad_z;
  if (name == "hess_z") return FMode::hess_z;
  throw Error("eval_F: unknown mode '" + std::string(name) + "'");
}

ScalarField F_value(const NonlinearityF& F, const ScalarField& s) {
  const ScalarField& h = F.h(s.geometry());
  ScalarField out(s.geometry());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = F.s_part(s[p]) + h[p];
  return out;
}

ScalarField F_prime(const NonlinearityF& F, const ScalarField& s) {
  ScalarField out(s.geometry());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = F.d_s(s[p]);
  return out;
}

ScalarField F_second(const NonlinearityF& F, const ScalarField& s) {
  ScalarField out(s.geometry());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = F.d_ss(s[p]);
  return out;
}

ComplexTensorField F_grad_z(const NonlinearityF& F, const TorusGeometry& g) { return gradient(F.h(g)); }
ComplexTensorField F_hess_z(const NonlinearityF& F, const TorusGeometry& g) { return hessian(F.h(g)); }

ComplexTensorField F_prime_grad_z(const NonlinearityF&, const TorusGeometry& g) {
  return ComplexTensorField(g, {IndexKind::holomorphic});
}

FEvaluation eval_F(const NonlinearityF& F, const ScalarField& s, FMode mode) {
  switch (mode) {
    case FMode::value:
      return F_value(F, s);
    case FMode::d_s:
      return F_prime(F, s);
    case FMode::d_ss:
      return F_second(F, s);
    case FMode::grad_z:
      return F_grad_z(F, s.geometry());
    case FMode::hess_z:
      return F_hess_z(F, s.geometry());
  }
  throw Error("eval_F: unknown mode");
}

}  // namespace cmaf
