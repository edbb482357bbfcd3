// Python bindings: numpy in, numpy out. Fields are arrays of shape (N,) * 2n,
// axes ordered (x1, y1, ..., xn, yn).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cmaf/elliptic.hpp"
#include "cmaf/flow.hpp"
#include "cmaf/harness.hpp"

namespace py = pybind11;
using namespace cmaf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ScalarField to_field(const Array& a) {
  const int dims = static_cast<int>(a.ndim());
  if (dims != 2 && dims != 4) throw py::value_error("field must have 2 (n=1) or 4 (n=2) axes");
  const int N = static_cast<int>(a.shape(0));
  for (int d = 1; d < dims; ++d)
    if (a.shape(d) != N) throw py::value_error("field axes must all have the same length");
  TorusGeometry g(dims / 2, N);
  return ScalarField(g, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const ScalarField& f) {
  std::vector<py::ssize_t> shape(f.geometry().real_axes(), f.geometry().N());
  Array out(shape);
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

NonlinearityF make_F(double a, double b, const std::vector<std::tuple<double, std::vector<int>, double>>& h,
                     double shift) {
  std::vector<TrigTerm> terms;
  for (const auto& [amp, k, phase] : h) terms.push_back(TrigTerm{amp, k, phase});
  return NonlinearityF(a, b, std::move(terms)).shifted(shift);
}

py::object json_to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json py_to_json(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict elliptic_dict(const EllipticReport& r) {
  py::dict d;
  d["solution"] = to_array(r.solution);
  d["c"] = r.c;
  d["residual"] = r.residual_sup;
  d["pointwise_residual"] = r.pointwise_residual_sup;
  d["iterations"] = r.newton_iters;
  d["converged"] = r.converged;
  d["residual_history"] = r.residual_history;
  return d;
}

EllipticOptions elliptic_options(double tol, int max_iters) {
  EllipticOptions o;
  o.tol = tol;
  o.max_iters = max_iters;
  return o;
}

}  // namespace

PYBIND11_MODULE(_cmaflow, m) {
  m.doc() = "Complex Monge-Ampere flow on the flat torus";
  py::register_exception<Error>(m, "CmafError");

  m.def(
      "coordinates",
      [](int n, int N) {
        TorusGeometry g(n, N);
        py::list axes;
        for (int a = 0; a < g.real_axes(); ++a) {
          const int axis = a;
          axes.append(to_array(ScalarField::sample(g, [&](std::span<const double> x) { return x[axis]; })));
        }
        return axes;
      },
      py::arg("n"), py::arg("N"), "Grid coordinates, one array per real axis.");

  m.def(
      "random_rough_field",
      [](int n, int N, std::uint64_t seed, double alpha, double scale) {
        return to_array(random_rough_field(TorusGeometry(n, N), seed, alpha, scale));
      },
      py::arg("n"), py::arg("N"), py::arg("seed"), py::arg("alpha") = 0.5, py::arg("scale") = 1.0);

  m.def(
      "log_det_ratio", [](const Array& phi) { return to_array(log_det_ratio(MetricField::from_potential(to_field(phi)))); },
      py::arg("phi"), "log det(g + ddbar phi); raises when g_phi is not positive.");

  m.def(
      "solve_fixed_rhs",
      [](const Array& f, double tol, int max_iters) {
        return elliptic_dict(solve_fixed_rhs(to_field(f), elliptic_options(tol, max_iters)));
      },
      py::arg("f"), py::arg("tol") = 1e-10, py::arg("max_iters") = 50, "Solve det(g_psi) = c f, mean-zero gauge.");

  m.def(
      "solve_self_consistent",
      [](int n, int N, double a, double b, const std::vector<std::tuple<double, std::vector<int>, double>>& h,
         double shift, double tol, int max_iters) {
        return elliptic_dict(
            solve_self_consistent(make_F(a, b, h, shift), TorusGeometry(n, N), elliptic_options(tol, max_iters)));
      },
      py::arg("n"), py::arg("N"), py::arg("a") = 1.0, py::arg("b") = 0.0,
      py::arg("h") = std::vector<std::tuple<double, std::vector<int>, double>>{}, py::arg("shift") = 0.0,
      py::arg("tol") = 1e-10, py::arg("max_iters") = 50,
      "Solve log det(g_phi) + a s + b sin s + h(z) + shift = 0.");

  m.def(
      "run_flow",
      [](const Array& phi0, double T, double a, double b,
         const std::vector<std::tuple<double, std::vector<int>, double>>& h, double shift, double dt_init,
         double safety, double log_c, std::vector<double> snapshot_times) {
        FlowConfig cfg;
        cfg.T = T;
        cfg.dt_init = dt_init;
        cfg.safety = safety;
        cfg.log_c = log_c;
        cfg.snapshot_times = std::move(snapshot_times);
        const ScalarField start = to_field(phi0);
        Trajectory traj;
        {
          py::gil_scoped_release release;
          traj = run(start, make_F(a, b, h, shift), cfg);
        }
        py::dict d;
        py::list times, phis;
        for (const FlowState& st : traj.snapshots) {
          times.append(st.t);
          phis.append(to_array(st.phi));
        }
        d["times"] = times;
        d["phi"] = phis;
        d["steps"] = traj.series.size() - 1;
        std::vector<double> mass;
        for (const StepRecord& r : traj.series) mass.push_back(r.mean_det_ratio);
        d["mean_det_ratio"] = mass;
        return d;
      },
      py::arg("phi0"), py::arg("T"), py::arg("a") = 1.0, py::arg("b") = 0.0,
      py::arg("h") = std::vector<std::tuple<double, std::vector<int>, double>>{}, py::arg("shift") = 0.0,
      py::arg("dt_init") = 1e-3, py::arg("safety") = 0.25, py::arg("log_c") = 0.0,
      py::arg("snapshot_times") = std::vector<double>{});

  m.def(
      "read_snapshot",
      [](const std::string& path) {
        const FlowState st = read_snapshot(path);
        return py::make_tuple(st.t, to_array(st.phi));
      },
      py::arg("path"), "Returns (t, phi) from a .cmaf snapshot.");

  m.def(
      "run_experiment",
      [](const py::object& config, const std::string& out_dir, unsigned threads) {
        const ExperimentConfig cfg = parse_config(py_to_json(config));
        RunOptions opts;
        opts.out_dir = out_dir;
        opts.threads = threads;
        ExperimentReport rep;
        {
          py::gil_scoped_release release;
          rep = run_experiment(cfg, opts);
        }
        return json_to_py(rep.to_json());
      },
      py::arg("config"), py::arg("out_dir"), py::arg("threads") = 1,
      "Run an experiment from a config dict; returns the report as a dict.");
}
