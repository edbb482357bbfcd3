#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <tuple>

#include "cmaf/field.hpp"
#include "spectral_detail.hpp"

namespace cmaf {
namespace detail {
namespace {

// FFTW planning is not thread safe; execution with the new-array interface is.
std::mutex plan_mutex;

fftw_plan plan_for(const TorusGeometry& g, int sign) {
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto key = std::make_tuple(g.n(), g.N(), sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::vector<int> dims(g.real_axes(), g.N());
  // Planned on fftw_malloc storage and always executed on such storage, so
  // the same (SIMD) codelets run on every call and every thread.
  fftw_complex* scratch = fftw_alloc_complex(g.size());
  fftw_plan plan = fftw_plan_dft(g.real_axes(), dims.data(), scratch, scratch,
                                 sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_free(scratch);
  if (!plan) throw Error("fft: planning failed");
  plans.emplace(key, plan);
  return plan;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

namespace {

struct AlignedBuffer {
  fftw_complex* data = nullptr;
  std::size_t size = 0;
  ~AlignedBuffer() { fftw_free(data); }
  cplx* get(std::size_t n) {
    if (n > size) {
      fftw_free(data);
      data = fftw_alloc_complex(n);
      size = n;
    }
    return reinterpret_cast<cplx*>(data);
  }
};

}  // namespace

thread_local AlignedBuffer fft_buffer;

cplx* transform_buffer(const TorusGeometry& g) { return fft_buffer.get(g.size()); }

void transform_in_buffer(const TorusGeometry& g, int sign) {
  auto* data = reinterpret_cast<fftw_complex*>(fft_buffer.get(g.size()));
  fftw_execute_dft(plan_for(g, sign), data, data);
}

void fft(const TorusGeometry& g, std::span<const cplx> in, std::span<cplx> out, int sign) {
  if (in.size() != g.size() || out.size() != g.size()) throw Error("fft: size mismatch");
  cplx* work = transform_buffer(g);
  std::copy(in.begin(), in.end(), work);
  transform_in_buffer(g, sign);
  std::copy(work, work + g.size(), out.begin());
}

const WavevectorTable& wavevector_table(const TorusGeometry& g) {
  static std::map<std::pair<int, int>, std::unique_ptr<WavevectorTable>> tables;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = tables[{g.n(), g.N()}];
  if (!slot) {
    slot = std::make_unique<WavevectorTable>();
    slot->signed_k.resize(g.size());
    slot->derivative_k.resize(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
      Wavevector k{0, 0, 0, 0}, d{0, 0, 0, 0};
      for (int a = 0; a < g.real_axes(); ++a) {
        k[a] = wavenumber(g.index_along(p, a), g.N());
        d[a] = derivative_wavenumber(g.index_along(p, a), g.N());
      }
      slot->signed_k[p] = k;
      slot->derivative_k[p] = d;
    }
  }
  return *slot;
}

Spectrum::Spectrum(const ScalarField& f)
    : geom_(f.geometry()), coeffs_(f.size()), table_(&wavevector_table(f.geometry())) {
  cplx* work = transform_buffer(geom_);
  for (std::size_t p = 0; p < f.size(); ++p) work[p] = f[p];
  transform_in_buffer(geom_, -1);
  const double scale = 1.0 / static_cast<double>(f.size());
  for (std::size_t p = 0; p < f.size(); ++p) coeffs_[p] = work[p] * scale;
}

Spectrum::Spectrum(const TorusGeometry& g, std::span<const cplx> values)
    : geom_(g), coeffs_(values.size()), table_(&wavevector_table(g)) {
  fft(geom_, values, coeffs_, -1);
  const double scale = 1.0 / static_cast<double>(values.size());
  for (cplx& c : coeffs_) c *= scale;
}

Wavevector Spectrum::signed_wavevector(std::size_t p) const { return table_->signed_k[p]; }

Wavevector Spectrum::derivative_wavevector(std::size_t p) const { return table_->derivative_k[p]; }

}  // namespace detail

using detail::derivative_symbol;
using detail::Spectrum;
using detail::Wavevector;

namespace {

ScalarField real_part(const TorusGeometry& g, std::span<const cplx> v) {
  ScalarField out(g);
  for (std::size_t p = 0; p < v.size(); ++p) out[p] = v[p].real();
  return out;
}

void check_axis(const TorusGeometry& g, int j) {
  if (j < 0 || j >= g.n()) throw Error("complex axis " + std::to_string(j) + " out of range");
}

}  // namespace

ComplexTensorField complex_derivative(const ScalarField& f, int j, bool conjugate) {
  require_finite(f, "complex_derivative");
  check_axis(f.geometry(), j);
  ComplexTensorField out(f.geometry(), {});
  Spectrum(f).synthesize([&](const Wavevector& k) { return derivative_symbol(k, j, conjugate); }, out.component(0));
  return out;
}

ComplexTensorField complex_derivative(const ComplexTensorField& f, int j, bool conjugate) {
  check_axis(f.geometry(), j);
  ComplexTensorField out(f.geometry(), f.kinds());
  for (std::size_t c = 0; c < f.components(); ++c) {
    for (std::size_t p = 0; p < f.geometry().size(); ++p)
      if (!std::isfinite(f.at(c, p).real()) || !std::isfinite(f.at(c, p).imag()))
        throw NonFiniteError("complex_derivative", p);
    Spectrum(f.geometry(), f.component(c))
        .synthesize([&](const Wavevector& k) { return derivative_symbol(k, j, conjugate); }, out.component(c));
  }
  return out;
}

ComplexTensorField gradient(const ScalarField& f) {
  require_finite(f, "gradient");
  const auto& g = f.geometry();
  ComplexTensorField out(g, {IndexKind::holomorphic});
  Spectrum s(f);
  for (int i = 0; i < g.n(); ++i)
    s.synthesize([&](const Wavevector& k) { return derivative_symbol(k, i, false); }, out.component(i));
  return out;
}

ComplexTensorField hessian(const ScalarField& f) {
  require_finite(f, "hessian");
  const auto& g = f.geometry();
  const int n = g.n();
  ComplexTensorField out(g, {IndexKind::holomorphic, IndexKind::antiholomorphic});
  Spectrum s(f);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      auto comp = out.component(out.component_index(i, j));
      s.synthesize(
          [&](const Wavevector& k) { return derivative_symbol(k, i, false) * derivative_symbol(k, j, true); }, comp);
      if (i == j) {
        for (cplx& v : comp) v = cplx(v.real(), 0.0);
      } else {
        auto mirror = out.component(out.component_index(j, i));
        for (std::size_t p = 0; p < comp.size(); ++p) mirror[p] = std::conj(comp[p]);
      }
    }
  }
  return out;
}

ComplexTensorField holomorphic_hessian(const ScalarField& f) {
  require_finite(f, "holomorphic_hessian");
  const auto& g = f.geometry();
  const int n = g.n();
  ComplexTensorField out(g, {IndexKind::holomorphic, IndexKind::holomorphic});
  Spectrum s(f);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      auto comp = out.component(out.component_index(i, j));
      s.synthesize(
          [&](const Wavevector& k) { return derivative_symbol(k, i, false) * derivative_symbol(k, j, false); }, comp);
      if (i != j) {
        auto mirror = out.component(out.component_index(j, i));
        std::copy(comp.begin(), comp.end(), mirror.begin());
      }
    }
  }
  return out;
}

ComplexTensorField third_mixed(const ScalarField& f) {
  require_finite(f, "third_mixed");
  const auto& g = f.geometry();
  const int n = g.n();
  ComplexTensorField out(g, {IndexKind::holomorphic, IndexKind::antiholomorphic, IndexKind::holomorphic});
  Spectrum s(f);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        s.synthesize(
            [&](const Wavevector& w) {
              return derivative_symbol(w, k, false) * derivative_symbol(w, i, false) * derivative_symbol(w, j, true);
            },
            out.component(out.component_index(i, j, k)));
  return out;
}

ScalarField grad_norm_sq(const ScalarField& f) {
  const auto grad = gradient(f);
  ScalarField out(f.geometry());
  for (int i = 0; i < f.geometry().n(); ++i) {
    auto c = grad.component(i);
    for (std::size_t p = 0; p < c.size(); ++p) out[p] += std::norm(c[p]);
  }
  return out;
}

ScalarField flat_laplacian(const ScalarField& f) {
  require_finite(f, "flat_laplacian");
  const auto& g = f.geometry();
  std::vector<cplx> out(g.size());
  Spectrum(f).synthesize(
      [&](const Wavevector& k) {
        double s = 0.0;
        for (int a = 0; a < g.real_axes(); ++a) s += static_cast<double>(k[a]) * k[a];
        return cplx(-M_PI * M_PI * s, 0.0);
      },
      out);
  return real_part(g, out);
}

ScalarField fourier_truncate(const ScalarField& f, int K) {
  const auto& g = f.geometry();
  if (K < 0 || 2 * K > g.N())
    throw Error("fourier_truncate: cutoff " + std::to_string(K) + " outside [0, " + std::to_string(g.N() / 2) + "]");
  require_finite(f, "fourier_truncate");
  Spectrum s(f);
  std::vector<cplx> work(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const Wavevector k = s.signed_wavevector(p);
    bool keep = true;
    for (int a = 0; a < g.real_axes(); ++a) keep = keep && std::abs(k[a]) <= K;
    work[p] = keep ? s.coeffs()[p] : cplx(0.0, 0.0);
  }
  detail::fft(g, work, work, +1);
  return real_part(g, work);
}

ScalarField heat_mollify(const ScalarField& f, double t) {
  if (!(t >= 0.0)) throw Error("heat_mollify: time must be nonnegative");
  const auto& g = f.geometry();
  require_finite(f, "heat_mollify");
  Spectrum s(f);
  std::vector<cplx> work(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const Wavevector k = s.signed_wavevector(p);
    double k2 = 0.0;
    for (int a = 0; a < g.real_axes(); ++a) k2 += static_cast<double>(k[a]) * k[a];
    work[p] = s.coeffs()[p] * std::exp(-M_PI * M_PI * k2 * t);
  }
  detail::fft(g, work, work, +1);
  return real_part(g, work);
}

ScalarField random_rough_field(const TorusGeometry& g, std::uint64_t seed, double alpha, double scale) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("random_rough_field: alpha must lie in (0, 1)");
  const int N = g.N();
  const int axes = g.real_axes();
  const double decay = 0.5 * axes + alpha;
  std::vector<cplx> coeffs(g.size(), cplx(0.0, 0.0));
  for (std::size_t p = 0; p < g.size(); ++p) {
    Wavevector k{0, 0, 0, 0};
    bool nyquist = false;
    int first_nonzero = 0;
    for (int a = 0; a < axes; ++a) {
      const int i = g.index_along(p, a);
      nyquist = nyquist || 2 * i == N;
      k[a] = detail::wavenumber(i, N);
      if (first_nonzero == 0 && k[a] != 0) first_nonzero = k[a];
    }
    // one draw per +-k pair, owned by the representative whose first nonzero component is positive
    if (nyquist || first_nonzero <= 0) continue;
    std::uint64_t h = detail::splitmix64(seed);
    for (int a = 0; a < axes; ++a) h = detail::splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(k[a]) + 0x10000));
    std::mt19937_64 rng(h);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double a_k = normal(rng);
    const double b_k = normal(rng);
    double k2 = 0.0;
    for (int a = 0; a < axes; ++a) k2 += static_cast<double>(k[a]) * k[a];
    const double sigma = std::pow(k2, -0.5 * decay);
    // sigma (a cos(2 pi k.x) + b sin(2 pi k.x)) split over +-k
    const cplx c = 0.5 * sigma * cplx(a_k, -b_k);
    std::size_t mirror = 0;
    for (int a = 0; a < axes; ++a) mirror += static_cast<std::size_t>((N - g.index_along(p, a)) % N) * g.stride(a);
    coeffs[p] = c;
    coeffs[mirror] = std::conj(c);
  }
  detail::fft(g, coeffs, coeffs, +1);
  ScalarField out = real_part(g, coeffs);
  out *= scale;
  return out;
}

}  // namespace cmaf
