// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance --out DIR [--only 1,2,...]
//
// Experiments run from the configs shipped in configs/; their outputs land in DIR.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmaf/elliptic.hpp"
#include "cmaf/flow.hpp"
#include "cmaf/harness.hpp"
#include "cmaf/monitors.hpp"
#include "oracles.hpp"

using namespace cmaf;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = CMAF_CONFIG_DIR;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!ok) notes.push_back("failed: " + what);
  }
  void info(const std::string& what) { notes.push_back(what); }
};

// Everything later criteria aggregate over: phi_dot envelopes and mass defects.
struct Ledger {
  std::vector<std::pair<std::string, double>> phidot_excess;  // <= 0 passes
  std::vector<std::pair<std::string, double>> mass;           // <= 1e-9 passes
  fs::path cauchy_report;
  fs::path smoothing_report;
};

constexpr double kPhiDotSlack = 1e-3;
constexpr double kMassTol = 1e-9;

void record_trajectory(Ledger& led, const std::string& name, const Trajectory& traj, const NonlinearityF& F) {
  const PhiDotCheck pd = phidot_envelope(traj, F, kPhiDotSlack);
  const double s0 = *pd.series.values.front();
  double excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pd.series.times.size(); ++i)
    excess = std::max(excess, *pd.series.values[i] - (1.0 + kPhiDotSlack) * s0 * std::exp(pd.kappa * pd.series.times[i]));
  led.phidot_excess.emplace_back(name, excess);
  double mass = 0.0;
  for (const StepRecord& r : traj.series) mass = std::max(mass, std::abs(r.mean_det_ratio - 1.0));
  for (const FlowState& st : traj.snapshots) mass = std::max(mass, std::abs(det_ratio(st.metric).mean() - 1.0));
  led.mass.emplace_back(name, mass);
}

void record_report(Ledger& led, const std::string& name, const ExperimentReport& rep) {
  for (const Verdict& v : rep.verdicts) {
    const auto ends_with = [&](const std::string& suffix) {
      return v.name.size() >= suffix.size() && v.name.compare(v.name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    // the harness checks lhs <= phidot_floor with floor 0, the same inequality as here
    if (ends_with("phidot_envelope")) led.phidot_excess.emplace_back(name + ":" + v.name, v.lhs);
    if (ends_with("mass")) led.mass.emplace_back(name + ":" + v.name, v.lhs);
  }
}

ExperimentReport run_config(const std::string& file, const fs::path& out, unsigned threads) {
  ExperimentConfig cfg = load_config(kConfigs / file);
  RunOptions opts;
  opts.out_dir = out;
  opts.threads = threads;
  return run_experiment(cfg, opts);
}

ScalarField smooth_datum(const TorusGeometry& g) {
  return ScalarField::sample(g, [](std::span<const double> x) {
    return 0.03 * std::cos(2 * M_PI * x[0]) + 0.008 * std::sin(2 * M_PI * (x[0] + 2 * x[1]));
  });
}

// --- 1 ----------------------------------------------------------------------------

Outcome manufactured_elliptic(Ledger&) {
  Outcome o;
  TorusGeometry g(1, 64);
  const auto t0 = std::chrono::steady_clock::now();
  auto f = ScalarField::sample(g, [](std::span<const double> x) {
    return 1.0 - 0.05 * M_PI * M_PI * std::cos(2 * M_PI * x[0]);
  });
  EllipticOptions opts;
  opts.tol = 1e-12;
  const EllipticReport rep = solve_fixed_rhs(f, opts);
  const double secs = seconds_since(t0);
  auto exact = ScalarField::sample(g, [](std::span<const double> x) { return 0.05 * std::cos(2 * M_PI * x[0]); });
  const double err = sup_distance(rep.solution, exact);
  o.require(rep.converged, "Newton converged");
  o.require(err <= 1e-8, "sup|psi - exact| <= 1e-8");
  o.require(rep.newton_iters <= 15, "Newton iterations <= 15");
  o.require(secs < 5.0, "wall time < 5 s");
  o.info("error " + fmt("%.3g", err) + ", iterations " + std::to_string(rep.newton_iters) + ", " +
         fmt("%.2f", secs) + " s");
  return o;
}

// --- 2 ----------------------------------------------------------------------------

Outcome stationarity(Ledger& led, const fs::path& out) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport rep = run_config("stationarity.json", out / "stationarity", 1);
  const double secs = seconds_since(t0);
  record_report(led, "stationarity", rep);
  const double drift = rep.verdict("stationarity_drift").lhs;
  const double phidot = rep.verdict("stationarity_phi_dot").lhs;
  o.require(rep.verdict("elliptic_converged").pass, "elliptic solve converged");
  o.require(drift <= 1e-6, "sup_t sup|phi(t) - phi(0)| <= 1e-6");
  o.require(phidot <= 1e-6, "sup_t sup|phi_dot| <= 1e-6");
  o.require(secs < 60.0, "wall time < 60 s");
  o.info("drift " + fmt("%.3g", drift) + ", phi_dot " + fmt("%.3g", phidot) + ", " + fmt("%.1f", secs) + " s");
  return o;
}

// --- 3 ----------------------------------------------------------------------------

Outcome c0_envelopes_closed_form(Ledger& led) {
  Outcome o;
  TorusGeometry g(1, 32);
  const ScalarField phi0 = smooth_datum(g);
  const double M0 = phi0.max();
  const double m0 = phi0.min();
  struct Case {
    const char* name;
    NonlinearityF F;
    std::function<double(double, double)> exact;  // envelope value from start s0 at time t
  };
  const std::vector<Case> cases = {
      {"F=1", NonlinearityF(0.0, 0.0).shifted(1.0), [](double s0, double t) { return s0 + t; }},
      {"F=1-s", NonlinearityF(-1.0, 0.0).shifted(1.0),
       [](double s0, double t) { return 1.0 - (1.0 - s0) * std::exp(-t); }},
      {"F=-s", NonlinearityF(-1.0, 0.0), [](double s0, double t) { return s0 * std::exp(-t); }},
  };
  const std::vector<double> times = {0.25, 0.5, 1.0};
  for (const Case& c : cases) {
    FlowConfig cfg;
    cfg.T = 1.0;
    cfg.snapshot_times = {0.25, 0.5, 0.75};
    const Trajectory traj = run(phi0, c.F, cfg);
    const EnvelopeCheck env = c0_envelopes(traj, c.F);
    o.require(env.max_violation <= 1e-5, std::string(c.name) + " envelope violation <= 1e-5");
    record_trajectory(led, std::string("envelope ") + c.name, traj, c.F);

    // ODE values against closed forms, from the datum's extrema and from 0
    double ode_err = 0.0;
    for (auto [hi, lo] : {std::pair{M0, m0}, std::pair{0.0, 0.0}}) {
      const Envelopes e = comparison_envelopes(hi, lo, c.F, g, times);
      for (std::size_t i = 0; i < times.size(); ++i) {
        ode_err = std::max(ode_err, std::abs(e.upper[i] - c.exact(hi, times[i])));
        ode_err = std::max(ode_err, std::abs(e.lower[i] - c.exact(lo, times[i])));
      }
    }
    o.require(ode_err <= 1e-8, std::string(c.name) + " envelope ODE matches closed form to 1e-8");
    o.info(std::string(c.name) + ": violation " + fmt("%.2g", env.max_violation) + ", ODE error " +
           fmt("%.2g", ode_err));
  }
  const Envelopes m1 = comparison_envelopes(0.0, 0.0, cases[1].F, g, {1.0});
  o.require(std::abs(m1.upper[0] - 0.632121) <= 5e-7, "M_1 = 0.632121 for F = 1 - s from 0");
  o.info("M_1(F=1-s) = " + fmt("%.9f", m1.upper[0]));
  return o;
}

// --- 7 ----------------------------------------------------------------------------

Outcome parabolic_identities(Ledger& led) {
  Outcome o;
  TorusGeometry g(1, 16);
  const NonlinearityF F(1.0, 0.5, {TrigTerm{0.05, {1, 1}, 0.0}});
  const ScalarField phi0 = smooth_datum(g);

  // (d/dt - Delta_phi) phi_dot = F'(phi) phi_dot
  std::vector<double> errs;
  for (double delta : {0.004, 0.002}) {
    const double t0 = 0.1;
    FlowConfig cfg;
    cfg.T = 0.2;
    cfg.dt_init = delta / 4;
    cfg.snapshot_times = {t0 - delta, t0, t0 + delta};
    const Trajectory traj = run(phi0, F, cfg);
    record_trajectory(led, "phi_dot identity, delta " + fmt("%g", delta), traj, F);
    const std::size_t i = 2;
    ScalarField d = parabolic_defect(traj, DefectQuantity::phi_dot, i);
    const FlowState& st = traj.snapshots[i];
    const ScalarField fp = F_prime(F, st.phi);
    for (std::size_t p = 0; p < g.size(); ++p) d[p] -= fp[p] * (*st.phi_dot)[p];
    errs.push_back(d.sup_abs());
  }
  const double order = std::log2(errs[0] / errs[1]);
  o.require(errs[1] <= 1e-3, "phi_dot defect <= 1e-3");
  o.require(order >= 1.8, "phi_dot defect order >= 1.8");
  o.info("phi_dot defect " + fmt("%.3g", errs[0]) + " -> " + fmt("%.3g", errs[1]) + ", order " + fmt("%.2f", order));

  // -T = d/dt g_phi + Ric(g_phi)
  std::vector<double> terrs;
  for (double delta : {4e-4, 2e-4}) {
    const double t0 = 0.02;
    FlowConfig cfg;
    cfg.T = 0.03;
    cfg.dt_init = delta / 4;
    cfg.snapshot_times = {t0 - delta, t0, t0 + delta};
    const Trajectory traj = run(phi0, F, cfg);
    record_trajectory(led, "T identity, delta " + fmt("%g", delta), traj, F);
    const FlowState& a = traj.at_time(t0 - delta);
    const FlowState& b = traj.at_time(t0);
    const FlowState& c = traj.at_time(t0 + delta);
    const ComplexTensorField T = stress_tensor_T(b, F);
    const ComplexTensorField ric = ricci(b.metric).tensor;
    double e = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      const cplx dg = (c.metric.tensor().at(0, p) - a.metric.tensor().at(0, p)) / (2 * delta);
      e = std::max(e, std::abs(-T.at(0, p) - dg - ric.at(0, p)));
    }
    terrs.push_back(e);
  }
  const double torder = std::log2(terrs[0] / terrs[1]);
  o.require(terrs[1] <= 1e-3, "T identity defect <= 1e-3");
  o.require(torder >= 1.8, "T identity defect order >= 1.8");
  o.info("T defect " + fmt("%.3g", terrs[0]) + " -> " + fmt("%.3g", terrs[1]) + ", order " + fmt("%.2f", torder));
  return o;
}

// --- 5, 6 ---------------------------------------------------------------------------

Outcome cauchy(Ledger& led, const fs::path& out) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport rep = run_config("cauchy.json", out / "cauchy_t1", 1);
  const double secs = seconds_since(t0);
  led.cauchy_report = out / "cauchy_t1" / "report.json";
  record_report(led, "cauchy", rep);
  int pairs = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (const Verdict& v : rep.verdicts)
    if (v.name.rfind("cauchy_stability_", 0) == 0) {
      ++pairs;
      worst_margin = std::min(worst_margin, v.margin());
      o.require(v.pass && v.margin() >= 0.0, v.name + " holds with nonnegative margin");
    }
  o.require(pairs == 6, "six truncation pairs");
  for (const char* name : {"cauchy_datum_convergence", "cauchy_constant_convergence", "cauchy_phidot0_convergence"})
    o.require(rep.verdict(name).pass, std::string(name) + " strictly decreasing");
  o.require(secs < 600.0, "wall time < 10 min");
  o.info(std::to_string(pairs) + " pairs, smallest margin " + fmt("%.3g", worst_margin) + ", " + fmt("%.0f", secs) +
         " s");
  for (const Verdict& v : rep.verdicts)
    if (!v.pass) o.require(false, "harness verdict " + v.name);
  return o;
}

Outcome smoothing(Ledger& led, const fs::path& out) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport rep = run_config("smoothing.json", out / "smoothing_t1", 1);
  const double secs = seconds_since(t0);
  led.smoothing_report = out / "smoothing_t1" / "report.json";
  record_report(led, "smoothing", rep);
  const json& grids = rep.measured["grids"];
  const json& coarse = grids.at(0);
  const json& fine = grids.at(1);
  o.require(coarse["N"] == 64 && fine["N"] == 128, "grids N = 64, 128");
  o.require(rep.measured["rough"].get<bool>(), "datum is rough above the coarse grid's modes");
  const double Lc = coarse["laplacian_t_star"], Lf = fine["laplacian_t_star"];
  const double agree = std::abs(Lf - Lc) / Lf;
  o.require(agree <= 0.10, "sup|Delta phi(t*)| agrees within 10%");
  const double growth = fine["laplacian_0"].get<double>() / coarse["laplacian_0"].get<double>();
  o.require(growth >= 1.2, "sup|Delta phi(0)| grows >= 20%");
  double cstab = std::numeric_limits<double>::infinity();
  if (coarse["gradient_shape_constant"].is_number() && fine["gradient_shape_constant"].is_number()) {
    const double Cc = coarse["gradient_shape_constant"], Cf = fine["gradient_shape_constant"];
    cstab = std::abs(Cf - Cc) / std::abs(Cf);
  }
  o.require(cstab <= 0.20, "gradient shape constant stable within 20%");
  o.info("t* agreement " + fmt("%.3g", agree) + ", growth at 0 " + fmt("%.3g", growth) + ", C_grad change " +
         fmt("%.3g", cstab) + ", " + fmt("%.0f", secs) + " s");
  return o;
}

// --- 4, 8 ---------------------------------------------------------------------------

Outcome phidot_everywhere(const Ledger& led) {
  Outcome o;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& [name, excess] : led.phidot_excess) {
    o.require(std::isfinite(excess) && excess <= 0.0, name);
    worst = std::max(worst, excess);
  }
  o.require(!led.phidot_excess.empty(), "at least one run checked");
  o.info(std::to_string(led.phidot_excess.size()) + " runs, largest excess " + fmt("%.3g", worst));
  return o;
}

Outcome mass_everywhere(const Ledger& led) {
  Outcome o;
  double worst = 0.0;
  for (const auto& [name, m] : led.mass) {
    o.require(std::isfinite(m) && m <= kMassTol, name);
    worst = std::max(worst, m);
  }
  o.require(!led.mass.empty(), "at least one run checked");
  o.info(std::to_string(led.mass.size()) + " runs, largest defect " + fmt("%.3g", worst));
  return o;
}

// --- 9 ------------------------------------------------------------------------------

Outcome oracle_agreement(Ledger&) {
  Outcome o;
  struct Term {
    double a;
    std::array<int, 4> k;
  };
  const std::vector<Term> terms = {{0.7, {1, 0, 0, 0}}, {-0.3, {2, -1, 0, 1}}, {0.45, {0, 3, 1, 0}},
                                   {0.2, {-3, 2, 2, -1}}, {0.1, {1, 1, -2, 3}}};
  double spec_err = 0.0, hess_err = 0.0, hess_scale = 0.0;
  for (int n : {1, 2}) {
    TorusGeometry g(n, n == 1 ? 32 : 8);
    const int axes = g.real_axes();
    auto phase = [&](const Term& t, std::span<const double> x) {
      double s = 0.0;
      for (int a = 0; a < axes; ++a) s += 2 * M_PI * t.k[a] * x[a];
      return s;
    };
    const ScalarField f = ScalarField::sample(g, [&](std::span<const double> x) {
      double v = 0.0;
      for (const Term& t : terms) v += t.a * std::sin(phase(t, x));
      return v;
    });
    const ComplexTensorField hess = hessian(f);
    for (int j = 0; j < n; ++j) {
      const ComplexTensorField d = complex_derivative(f, j, false);
      for (std::size_t p = 0; p < g.size(); ++p) {
        std::vector<double> x(axes);
        for (int a = 0; a < axes; ++a) x[a] = g.coord(p, a);
        cplx dz = 0.0;
        cplx dzdzbar = 0.0;
        for (const Term& t : terms) {
          const double c = 2 * M_PI * t.a * std::cos(phase(t, x));
          const double s = 2 * M_PI * t.a * std::sin(phase(t, x));
          dz += 0.5 * cplx(c * t.k[2 * j], -c * t.k[2 * j + 1]);
          // d_z d_zbar = (d_xx + d_yy) / 4
          dzdzbar += -0.25 * 2 * M_PI * s * (t.k[2 * j] * t.k[2 * j] + t.k[2 * j + 1] * t.k[2 * j + 1]);
        }
        spec_err = std::max(spec_err, std::abs(d.at(0, p) - dz));
        hess_err = std::max(hess_err, std::abs(hess.at(hess.component_index(j, j), p) - dzdzbar));
        hess_scale = std::max(hess_scale, std::abs(dzdzbar));
      }
    }
  }
  o.require(spec_err <= 1e-12, "spectral first derivatives exact to 1e-12");
  // second derivatives reach ~90 here; 1e-12 is applied relative to that scale
  o.require(hess_err <= 1e-12 * std::max(1.0, hess_scale), "spectral d_z d_zbar exact to 1e-12 relative");

  auto smooth = [](std::span<const double> x) {
    return std::exp(0.3 * std::sin(2 * M_PI * x[0])) * std::cos(2 * M_PI * x[1]) + 0.2 * std::sin(4 * M_PI * x[0]);
  };
  std::vector<double> first, second;
  for (int N : {32, 64, 128}) {
    TorusGeometry g(1, N);
    const ScalarField f = ScalarField::sample(g, smooth);
    const ComplexTensorField spec = complex_derivative(f, 0, false);
    const std::vector<cplx> fd = oracle::fd_dz(f, 0, false);
    const ComplexTensorField h = hessian(f);
    const ScalarField fd2 = oracle::fd_dzdzbar(f, 0);
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      e1 = std::max(e1, std::abs(spec.at(0, p) - fd[p]));
      e2 = std::max(e2, std::abs(h.at(0, p).real() - fd2[p]));
    }
    first.push_back(e1);
    second.push_back(e2);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i + 1 < first.size(); ++i)
    for (double r : {std::log2(first[i] / first[i + 1]), std::log2(second[i] / second[i + 1])}) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  o.require(lo >= 1.8 && hi <= 2.2, "finite-difference orders in [1.8, 2.2]");
  o.info("hessian error " + fmt("%.2g", hess_err) + " at scale " + fmt("%.3g", hess_scale));
  o.info("spectral error " + fmt("%.2g", spec_err) + ", FD orders in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) +
         "]");
  return o;
}

// --- 10 -----------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Outcome determinism(const Ledger& led, const fs::path& out) {
  Outcome o;
  for (const auto& [file, dir, first] : {std::tuple{"cauchy.json", "cauchy_t8", led.cauchy_report},
                                         std::tuple{"smoothing.json", "smoothing_t8", led.smoothing_report}}) {
    if (first.empty() || !fs::exists(first)) {
      o.require(false, std::string(file) + ": single-thread report missing");
      continue;
    }
    run_config(file, out / dir, 8);
    const std::string a = slurp(first);
    const std::string b = slurp(out / dir / "report.json");
    o.require(!a.empty() && a == b, std::string(file) + ": report.json identical for threads 1 and 8");
    o.info(std::string(file) + ": " + std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different"));
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance_out";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: acceptance --out DIR [--only 1,2,...]\n");
      return 2;
    }
  }
  fs::create_directories(out);

  Ledger led;
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> body;
  };
  // 4 and 8 aggregate over the runs made by the others, so they come after them
  const std::vector<Criterion> criteria = {
      {1, "elliptic manufactured recovery", [&] { return manufactured_elliptic(led); }},
      {2, "stationarity of the fixed point", [&] { return stationarity(led, out); }},
      {3, "C0 envelopes", [&] { return c0_envelopes_closed_form(led); }},
      {5, "Cauchy stability in the truncation level", [&] { return cauchy(led, out); }},
      {6, "smoothing of rough data", [&] { return smoothing(led, out); }},
      {7, "parabolic identities", [&] { return parabolic_identities(led); }},
      {9, "oracle agreement", [&] { return oracle_agreement(led); }},
      {4, "phi_dot envelope on every run", [&] { return phidot_everywhere(led); }},
      {8, "conservation of total volume", [&] { return mass_everywhere(led); }},
      {10, "determinism across thread counts", [&] { return determinism(led, out); }},
  };

  std::vector<std::pair<int, std::string>> lines;
  bool all = true;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    all = all && o.pass;
    std::string line = std::string(o.pass ? "PASS" : "FAIL") + "  " + std::to_string(c.id) + ". " + c.title;
    for (const std::string& n : o.notes) line += "\n        " + n;
    std::fprintf(stderr, "[%d done]\n", c.id);
    lines.emplace_back(c.id, line);
  }
  std::sort(lines.begin(), lines.end());
  std::string text;
  for (const auto& [id, line] : lines) text += line + "\n";
  text += all ? "acceptance: all criteria pass\n" : "acceptance: some criteria FAIL\n";
  std::fputs(text.c_str(), stdout);
  std::ofstream(out / "summary.txt") << text;
  return all ? 0 : 1;
}
