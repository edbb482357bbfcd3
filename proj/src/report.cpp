#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "cmaf/harness.hpp"

namespace cmaf {

Verdict check_le(std::string name, std::string inequality, double lhs, double rhs) {
  Verdict v;
  v.name = std::move(name);
  v.inequality = std::move(inequality);
  v.lhs = lhs;
  v.rhs = rhs;
  v.pass = std::isfinite(lhs) && lhs <= rhs;
  return v;
}

bool ExperimentReport::all_pass() const {
  for (const Verdict& v : verdicts)
    if (!v.pass) return false;
  return true;
}

const Verdict& ExperimentReport::verdict(const std::string& name) const {
  for (const Verdict& v : verdicts)
    if (v.name == name) return v;
  throw Error("report has no verdict named " + name);
}

namespace {

// JSON has no inf / nan; both are written as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

json ExperimentReport::to_json() const {
  json j;
  j["experiment"] = kind_name(kind);
  j["all_pass"] = all_pass();
  json vs = json::array();
  for (const Verdict& v : verdicts) {
    json e;
    e["name"] = v.name;
    e["inequality"] = v.inequality;
    e["lhs"] = number(v.lhs);
    e["rhs"] = number(v.rhs);
    e["margin"] = number(v.margin());
    e["pass"] = v.pass;
    if (v.waived) e["waived"] = true;
    if (!v.note.empty()) e["note"] = v.note;
    vs.push_back(std::move(e));
  }
  j["verdicts"] = std::move(vs);
  j["measured"] = measured;
  j["warnings"] = warnings;
  j["files"] = files;
  j["config"] = config;
  return j;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task) {
  if (count == 0) return;
  std::vector<std::exception_ptr> errors(count);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(count, std::max(1u, threads)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (std::thread& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

double min_eig_scaled(const ComplexTensorField& hess, double s) {
  const TorusGeometry& g = hess.geometry();
  const int n = g.n();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.size(); ++p) {
    HermitianMatrix m;
    m.n = n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = (i == j ? 1.0 : 0.0) + s * hess.at(hess.component_index(i, j), p);
    lo = std::min(lo, m.min_eigenvalue());
  }
  return lo;
}

}  // namespace

double scale_to_min_eigenvalue(const ScalarField& f, double target) {
  if (!(target > 0.0 && target < 1.0)) throw Error("scale_to_min_eigenvalue: target must lie in (0, 1)");
  const ComplexTensorField hess = hessian(f);
  if (!(hess.sup_abs() > 0.0)) throw Error("scale_to_min_eigenvalue: field has no curvature to scale");
  // min eigenvalue is concave in s and equals 1 at s = 0
  double lo = 0.0;
  double hi = 1.0;
  while (min_eig_scaled(hess, hi) >= target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw Error("scale_to_min_eigenvalue: no scale reaches the target");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (min_eig_scaled(hess, mid) >= target ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace cmaf
