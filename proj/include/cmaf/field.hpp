#pragma once

// Periodic grids on the flat torus C^n / (Z + iZ)^n, scalar and complex
// tensor fields, and spectral complex calculus.
//
// Conventions shared by every module:
//   * real axes are ordered (x_1, y_1, ..., x_n, y_n), last axis fastest;
//   * z_j = x_j + i y_j, d/dz_j = (d/dx_j - i d/dy_j)/2,
//     d/dzbar_j = (d/dx_j + i d/dy_j)/2;
//   * the background metric is the identity in z-coordinates and the
//     total volume is 1, so integrals are grid means.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cmaf/error.hpp"

namespace cmaf {

using cplx = std::complex<double>;

class TorusGeometry {
 public:
  TorusGeometry(int n, int N);

  int n() const { return n_; }
  int N() const { return N_; }
  int real_axes() const { return 2 * n_; }
  std::size_t size() const { return size_; }
  double spacing() const { return 1.0 / N_; }

  // grid index of point p along a real axis
  int index_along(std::size_t p, int axis) const;
  double coord(std::size_t p, int axis) const { return index_along(p, axis) * spacing(); }
  std::size_t stride(int axis) const;

  bool operator==(const TorusGeometry& o) const { return n_ == o.n_ && N_ == o.N_; }

 private:
  int n_;
  int N_;
  std::size_t size_;
};

class ScalarField {
 public:
  explicit ScalarField(const TorusGeometry& g, double value = 0.0);
  ScalarField(const TorusGeometry& g, std::vector<double> values);

  // f(x) with x the real coordinates of a grid point, ordered as the axes.
  template <class Fn>
  static ScalarField sample(const TorusGeometry& g, Fn&& fn) {
    ScalarField out(g);
    std::vector<double> x(g.real_axes());
    for (std::size_t p = 0; p < g.size(); ++p) {
      for (int a = 0; a < g.real_axes(); ++a) x[a] = g.coord(p, a);
      out.values_[p] = fn(std::span<const double>(x));
    }
    return out;
  }

  const TorusGeometry& geometry() const { return geom_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t p) const { return values_[p]; }
  double& operator[](std::size_t p) { return values_[p]; }

  // Reductions run in index order so results do not depend on threading.
  double max() const;
  double min() const;
  double sup_abs() const;
  double mean() const;
  std::size_t argmin() const;
  std::size_t argmax() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);
  ScalarField& operator+=(double s);

 private:
  TorusGeometry geom_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);
ScalarField operator+(ScalarField a, double s);

// sup |a - b|
double sup_distance(const ScalarField& a, const ScalarField& b);

enum class IndexKind { holomorphic, antiholomorphic };

// Complex tensor over the grid, components stored one after another
// (component-major). Component multi-indices are row-major in [0, n).
class ComplexTensorField {
 public:
  ComplexTensorField(const TorusGeometry& g, std::vector<IndexKind> kinds);

  const TorusGeometry& geometry() const { return geom_; }
  const std::vector<IndexKind>& kinds() const { return kinds_; }
  int rank() const { return static_cast<int>(kinds_.size()); }
  std::size_t components() const { return components_; }

  std::size_t component_index(std::span<const int> idx) const;
  std::size_t component_index(int i, int j) const { return static_cast<std::size_t>(i) * geom_.n() + j; }
  std::size_t component_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * geom_.n() + j) * geom_.n() + k;
  }

  std::span<cplx> component(std::size_t c) { return {data_.data() + c * geom_.size(), geom_.size()}; }
  std::span<const cplx> component(std::size_t c) const {
    return {data_.data() + c * geom_.size(), geom_.size()};
  }
  cplx& at(std::size_t c, std::size_t p) { return data_[c * geom_.size() + p]; }
  cplx at(std::size_t c, std::size_t p) const { return data_[c * geom_.size() + p]; }

  // For a rank-2 (holomorphic, antiholomorphic) tensor: max over points of
  // |a_{i jbar} - conj(a_{j ibar})|.
  double hermitian_defect() const;
  double sup_abs() const;

  ScalarField real_component(std::size_t c) const;

 private:
  TorusGeometry geom_;
  std::vector<IndexKind> kinds_;
  std::size_t components_;
  std::vector<cplx> data_;
};

// Throws NonFiniteError naming the first non-finite grid index.
void require_finite(const ScalarField& f, const char* what = "field");

// --- spectral calculus -----------------------------------------------------

// d/dz_j f (or d/dzbar_j f); rank-0 result.
ComplexTensorField complex_derivative(const ScalarField& f, int j, bool conjugate);
// Applied componentwise to a complex field; kinds are kept.
ComplexTensorField complex_derivative(const ComplexTensorField& f, int j, bool conjugate);

// phi_i
ComplexTensorField gradient(const ScalarField& f);
// phi_{i jbar}; Hermitian.
ComplexTensorField hessian(const ScalarField& f);
// phi_{ij}; symmetric.
ComplexTensorField holomorphic_hessian(const ScalarField& f);
// phi_{i jbar k} = d_k d_i dbar_j phi, symmetric in (i, k).
ComplexTensorField third_mixed(const ScalarField& f);
// sum_i |phi_i|^2
ScalarField grad_norm_sq(const ScalarField& f);
// Delta_g f = sum_i f_{i ibar} (Kahler Laplacian of the flat metric).
ScalarField flat_laplacian(const ScalarField& f);

// Keep Fourier modes with max over axes |k| <= K.
ScalarField fourier_truncate(const ScalarField& f, int K);
// Heat-kernel mollification exp(t Delta_g).
ScalarField heat_mollify(const ScalarField& f, double t);

// Real Gaussian Fourier series with per-mode standard deviation
// |k|^-(n + alpha) (2n real dimensions), mean zero, times scale. Each
// wavevector draws from its own seeded stream, so the same continuum datum
// is sampled at every resolution (modes below the grid's Nyquist).
ScalarField random_rough_field(const TorusGeometry& g, std::uint64_t seed, double alpha, double scale);

}  // namespace cmaf
