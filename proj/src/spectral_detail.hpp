#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <span>
#include <vector>

#include "cmaf/field.hpp"

namespace cmaf::detail {

// Unnormalized multidimensional DFT over the grid; sign = -1 forward, +1 inverse.
void fft(const TorusGeometry& g, std::span<const cplx> in, std::span<cplx> out, int sign);

// Per-thread aligned scratch of g.size() values and an in-place transform
// of it; the buffer is reused by every transform on the calling thread.
cplx* transform_buffer(const TorusGeometry& g);
void transform_in_buffer(const TorusGeometry& g, int sign);

// Signed wavenumber of grid index i on an N-point axis, in (-N/2, N/2].
inline int wavenumber(int i, int N) { return i <= N / 2 ? i : i - N; }

// Wavenumber used inside derivative symbols: the Nyquist mode has no
// well-defined derivative on a real grid and is mapped to 0.
inline int derivative_wavenumber(int i, int N) {
  if (2 * i == N) return 0;
  return wavenumber(i, N);
}

using Wavevector = std::array<int, 4>;

// Symbol of d/dz_j (conjugate = false) or d/dzbar_j, given the
// derivative wavenumbers of a mode.
inline cplx derivative_symbol(const Wavevector& k, int j, bool conjugate) {
  const double kx = k[2 * j];
  const double ky = k[2 * j + 1];
  return conjugate ? cplx(-M_PI * ky, M_PI * kx) : cplx(M_PI * ky, M_PI * kx);
}

struct WavevectorTable {
  std::vector<Wavevector> signed_k;
  std::vector<Wavevector> derivative_k;
};
// Per-geometry table, built once and shared.
const WavevectorTable& wavevector_table(const TorusGeometry& g);

// Normalized Fourier coefficients of a grid function.
class Spectrum {
 public:
  explicit Spectrum(const ScalarField& f);
  Spectrum(const TorusGeometry& g, std::span<const cplx> values);

  const TorusGeometry& geometry() const { return geom_; }
  std::span<const cplx> coeffs() const { return coeffs_; }

  Wavevector signed_wavevector(std::size_t p) const;
  Wavevector derivative_wavevector(std::size_t p) const;

  // out = inverse transform of coeffs * symbol(derivative wavevector).
  template <class Symbol>
  void synthesize(Symbol&& symbol, std::span<cplx> out) const {
    cplx* work = transform_buffer(geom_);
    for (std::size_t p = 0; p < coeffs_.size(); ++p) work[p] = coeffs_[p] * symbol(table_->derivative_k[p]);
    transform_in_buffer(geom_, +1);
    std::copy(work, work + coeffs_.size(), out.begin());
  }

 private:
  TorusGeometry geom_;
  std::vector<cplx> coeffs_;
  const WavevectorTable* table_;
};

}  // namespace cmaf::detail
