#include "cmaf/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmaf {

TorusGeometry::TorusGeometry(int n, int N) : n_(n), N_(N), size_(1) {
  if (n < 1 || n > 2) throw Error("TorusGeometry: complex dimension must be 1 or 2, got " + std::to_string(n));
  if (N < 4 || (N & (N - 1)) != 0)
    throw Error("TorusGeometry: grid size must be a power of two >= 4, got " + std::to_string(N));
  for (int a = 0; a < 2 * n; ++a) size_ *= static_cast<std::size_t>(N);
}

std::size_t TorusGeometry::stride(int axis) const {
  std::size_t s = 1;
  for (int a = real_axes() - 1; a > axis; --a) s *= static_cast<std::size_t>(N_);
  return s;
}

int TorusGeometry::index_along(std::size_t p, int axis) const {
  return static_cast<int>((p / stride(axis)) % static_cast<std::size_t>(N_));
}

ScalarField::ScalarField(const TorusGeometry& g, double value) : geom_(g), values_(g.size(), value) {}

ScalarField::ScalarField(const TorusGeometry& g, std::vector<double> values) : geom_(g), values_(std::move(values)) {
  if (values_.size() != g.size())
    throw Error("ScalarField: expected " + std::to_string(g.size()) + " values, got " +
                std::to_string(values_.size()));
}

double ScalarField::max() const { return values_[argmax()]; }
double ScalarField::min() const { return values_[argmin()]; }

std::size_t ScalarField::argmax() const {
  std::size_t best = 0;
  for (std::size_t p = 1; p < values_.size(); ++p)
    if (values_[p] > values_[best]) best = p;
  return best;
}

std::size_t ScalarField::argmin() const {
  std::size_t best = 0;
  for (std::size_t p = 1; p < values_.size(); ++p)
    if (values_[p] < values_[best]) best = p;
  return best;
}

double ScalarField::sup_abs() const {
  double s = 0.0;
  for (double v : values_) s = std::max(s, std::abs(v));
  return s;
}

double ScalarField::mean() const {
  // pairwise summation keeps the mean accurate to ~1e-16 on large grids
  auto sum = [&](auto&& self, std::size_t lo, std::size_t hi) -> double {
    if (hi - lo <= 64) {
      double s = 0.0;
      for (std::size_t p = lo; p < hi; ++p) s += values_[p];
      return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return self(self, lo, mid) + self(self, mid, hi);
  };
  return sum(sum, 0, values_.size()) / static_cast<double>(values_.size());
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  if (!(geom_ == o.geom_)) throw Error("ScalarField: geometry mismatch");
  for (std::size_t p = 0; p < values_.size(); ++p) values_[p] += o.values_[p];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  if (!(geom_ == o.geom_)) throw Error("ScalarField: geometry mismatch");
  for (std::size_t p = 0; p < values_.size(); ++p) values_[p] -= o.values_[p];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ScalarField& ScalarField::operator+=(double s) {
  for (double& v : values_) v += s;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }
ScalarField operator+(ScalarField a, double s) { return a += s; }

double sup_distance(const ScalarField& a, const ScalarField& b) {
  if (!(a.geometry() == b.geometry())) throw Error("sup_distance: geometry mismatch");
  double d = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) d = std::max(d, std::abs(a[p] - b[p]));
  return d;
}

ComplexTensorField::ComplexTensorField(const TorusGeometry& g, std::vector<IndexKind> kinds)
    : geom_(g), kinds_(std::move(kinds)), components_(1) {
  for (std::size_t r = 0; r < kinds_.size(); ++r) components_ *= static_cast<std::size_t>(g.n());
  data_.assign(components_ * g.size(), cplx(0.0, 0.0));
}

std::size_t ComplexTensorField::component_index(std::span<const int> idx) const {
  if (static_cast<int>(idx.size()) != rank()) throw Error("ComplexTensorField: wrong number of indices");
  std::size_t c = 0;
  for (int i : idx) c = c * geom_.n() + i;
  return c;
}

double ComplexTensorField::hermitian_defect() const {
  if (rank() != 2 || kinds_[0] != IndexKind::holomorphic || kinds_[1] != IndexKind::antiholomorphic)
    throw Error("hermitian_defect: needs a (1,1) tensor");
  double d = 0.0;
  const int n = geom_.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (std::size_t p = 0; p < geom_.size(); ++p)
        d = std::max(d, std::abs(at(component_index(i, j), p) - std::conj(at(component_index(j, i), p))));
  return d;
}

double ComplexTensorField::sup_abs() const {
  double s = 0.0;
  for (const cplx& v : data_) s = std::max(s, std::abs(v));
  return s;
}

ScalarField ComplexTensorField::real_component(std::size_t c) const {
  ScalarField out(geom_);
  auto src = component(c);
  for (std::size_t p = 0; p < src.size(); ++p) out[p] = src[p].real();
  return out;
}

void require_finite(const ScalarField& f, const char* what) {
  auto v = f.values();
  for (std::size_t p = 0; p < v.size(); ++p)
    if (!std::isfinite(v[p])) throw NonFiniteError(what, p);
}

}  // namespace cmaf
