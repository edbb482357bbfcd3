#pragma once

// Pointwise Kahler-metric algebra for g_phi = g + Hess(phi) on the flat
// torus, and the nonlinearity F(s, z) = a s + b sin(s) + h(z).

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cmaf/field.hpp"

namespace cmaf {

inline constexpr double kPositivityFloor = 1e-8;

// n x n Hermitian matrix, n <= 2, closed-form algebra.
struct HermitianMatrix {
  int n = 1;
  std::array<cplx, 4> m{};  // row-major, m[i*2+j] = a_{i jbar}

  cplx operator()(int i, int j) const { return m[i * 2 + j]; }
  cplx& operator()(int i, int j) { return m[i * 2 + j]; }

  double trace() const;
  double det() const;
  double min_eigenvalue() const;
  std::array<double, 2> eigenvalues() const;  // ascending; second unused when n == 1
  HermitianMatrix inverse() const;
};

class MetricField {
 public:
  // (g_phi)_{i jbar} = delta_ij + phi_{i jbar}; throws ConeExitError when
  // the smallest eigenvalue is <= eps_pd.
  static MetricField from_potential(const ScalarField& phi, double eps_pd = kPositivityFloor);
  static MetricField from_tensor(ComplexTensorField h, double eps_pd = kPositivityFloor);

  const TorusGeometry& geometry() const { return h_.geometry(); }
  const ComplexTensorField& tensor() const { return h_; }
  HermitianMatrix at(std::size_t p) const;

  double min_eigenvalue() const { return min_eig_; }
  std::size_t min_eigenvalue_point() const { return min_eig_point_; }

 private:
  explicit MetricField(ComplexTensorField h);
  ComplexTensorField h_;
  double min_eig_ = 0.0;
  std::size_t min_eig_point_ = 0;
};

ScalarField det_ratio(const MetricField& m);
ScalarField log_det_ratio(const MetricField& m);

struct Traces {
  ScalarField trace;          // tr_g g_phi = n + Delta_g phi
  ScalarField inverse_trace;  // tr_{g_phi} g
};
Traces traces(const MetricField& m);

double min_eigenvalue(const MetricField& m);

// Pointwise matrix inverse G^{-1}; the contraction g^{i jbar} a_{i jbar}
// equals tr(G^{-1} A).
ComplexTensorField inverse(const MetricField& m);

// g_phi^{i jbar} f_{i jbar}
ScalarField laplacian_wrt(const MetricField& m, const ScalarField& f);
// tr(G^{-1} A) pointwise for a (1,1) tensor A.
ScalarField contract(const MetricField& m, const ComplexTensorField& a);

struct Ricci {
  ComplexTensorField tensor;  // -d_i dbar_j log det g_phi
  ScalarField norm;           // |Ric|_{g_phi}
};
Ricci ricci(const MetricField& m);

// |A|_{g_phi} for a Hermitian (1,1) tensor: sqrt(tr(G^-1 A G^-1 A)).
ScalarField hermitian_norm(const MetricField& m, const ComplexTensorField& a);

// amplitude * cos(2 pi k.x + phase); k has one entry per real axis.
struct TrigTerm {
  double amplitude = 0.0;
  std::vector<int> wavevector;
  double phase = 0.0;
};

class NonlinearityF {
 public:
  NonlinearityF(double a = 0.0, double b = 0.0, std::vector<TrigTerm> terms = {});

  double a() const { return a_; }
  double b() const { return b_; }
  const std::vector<TrigTerm>& terms() const { return terms_; }

  // Adds a grid-sampled forcing to h(z). Only valid on its own geometry.
  NonlinearityF with_forcing(ScalarField forcing) const;
  const std::optional<ScalarField>& forcing() const { return forcing_; }

  // F shifted by a constant: h -> h + c.
  NonlinearityF shifted(double c) const;

  double s_part(double s) const;    // a s + b sin s
  double d_s(double s) const;       // F'
  double d_ss(double s) const;      // F''

  const ScalarField& h(const TorusGeometry& g) const;
  double upper(double s, const TorusGeometry& g) const;  // sup_z F(s, z)
  double lower(double s, const TorusGeometry& g) const;  // inf_z F(s, z)
  // sup |F'| over s in [lo, hi]
  double kappa(double lo, double hi) const;

 private:
  double a_;
  double b_;
  std::vector<TrigTerm> terms_;
  std::optional<ScalarField> forcing_;
  double shift_ = 0.0;
  struct Cache {
    std::mutex mutex;
    std::map<std::pair<int, int>, std::shared_ptr<const ScalarField>> h;
  };
  std::shared_ptr<Cache> cache_;
};

enum class FMode { value, d_s, d_ss, grad_z, hess_z };
FMode parse_fmode(std::string_view name);

using FEvaluation = std::variant<ScalarField, ComplexTensorField>;
FEvaluation eval_F(const NonlinearityF& F, const ScalarField& s, FMode mode);

ScalarField F_value(const NonlinearityF& F, const ScalarField& s);
ScalarField F_prime(const NonlinearityF& F, const ScalarField& s);
ScalarField F_second(const NonlinearityF& F, const ScalarField& s);
ComplexTensorField F_grad_z(const NonlinearityF& F, const TorusGeometry& g);   // h_i
ComplexTensorField F_hess_z(const NonlinearityF& F, const TorusGeometry& g);   // h_{i jbar}
// F'_i: z-derivative of F'; identically zero for this family.
ComplexTensorField F_prime_grad_z(const NonlinearityF& F, const TorusGeometry& g);

}  // namespace cmaf
