#include <fstream>
#include <set>

#include "cmaf/harness.hpp"

namespace cmaf {

namespace {

// Tracks which keys of one JSON object were consumed so leftovers can be
// reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("config " + where_ + ": expected an object");
  }

  const json* find(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void get(const char* key, double& out) {
    if (const json* v = find(key)) out = as_double(*v, key);
  }
  void get(const char* key, int& out) {
    if (const json* v = find(key)) out = as_int(*v, key);
  }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected a boolean");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
        fail(key, "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array");
      out.clear();
      for (const json& e : *v) out.push_back(as_double(e, key));
    }
  }
  void get(const char* key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array");
      out.clear();
      for (const json& e : *v) out.push_back(as_int(e, key));
    }
  }
  void get(const char* key, std::vector<TrigTerm>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array of terms");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        Reader r((*v)[i], where_ + "." + key + "[" + std::to_string(i) + "]");
        TrigTerm t;
        r.get("amplitude", t.amplitude);
        r.get("wavevector", t.wavevector);
        r.get("phase", t.phase);
        r.finish();
        out.push_back(std::move(t));
      }
    }
  }

  std::optional<Reader> sub(const char* key) {
    if (const json* v = find(key)) return Reader(*v, where_ + "." + key);
    return std::nullopt;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("config " + where_ + ": unknown key \"" + it.key() + "\"");
  }

 private:
  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError("config " + where_ + "." + key + ": " + what);
  }
  double as_double(const json& v, const char* key) const {
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }
  int as_int(const json& v, const char* key) const {
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

json terms_json(const std::vector<TrigTerm>& terms) {
  json a = json::array();
  for (const TrigTerm& t : terms) a.push_back({{"amplitude", t.amplitude}, {"wavevector", t.wavevector}, {"phase", t.phase}});
  return a;
}

void check_terms(const std::vector<TrigTerm>& terms, int n, const std::string& where) {
  for (const TrigTerm& t : terms)
    if (static_cast<int>(t.wavevector.size()) != 2 * n)
      throw ConfigError("config " + where + ": wavevector needs " + std::to_string(2 * n) + " entries");
}

bool strictly_increasing(const std::vector<int>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] <= v[i - 1]) return false;
  return true;
}

}  // namespace

ExperimentKind parse_kind(const std::string& name) {
  if (name == "solve-elliptic") return ExperimentKind::solve_elliptic;
  if (name == "run-flow") return ExperimentKind::run_flow;
  if (name == "monitor") return ExperimentKind::monitor;
  if (name == "stationarity") return ExperimentKind::stationarity;
  if (name == "cauchy") return ExperimentKind::cauchy;
  if (name == "smoothing") return ExperimentKind::smoothing;
  throw ConfigError("unknown experiment \"" + name + "\"");
}

std::string kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::solve_elliptic: return "solve-elliptic";
    case ExperimentKind::run_flow: return "run-flow";
    case ExperimentKind::monitor: return "monitor";
    case ExperimentKind::stationarity: return "stationarity";
    case ExperimentKind::cauchy: return "cauchy";
    case ExperimentKind::smoothing: return "smoothing";
  }
  return "?";
}

NonlinearityF FSpec::build() const {
  NonlinearityF F(a, b, h);
  return shift != 0.0 ? F.shifted(shift) : F;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Reader r(j, "<root>");
  std::string kind;
  r.get("experiment", kind);
  if (!kind.empty()) c.kind = parse_kind(kind);
  if (auto g = r.sub("geometry")) {
    g->get("n", c.n);
    g->get("N", c.N);
    g->get("refinements", c.refinements);
    g->finish();
  }
  if (auto f = r.sub("F")) {
    f->get("a", c.F.a);
    f->get("b", c.F.b);
    f->get("h", c.F.h);
    f->get("shift", c.F.shift);
    f->finish();
  }
  r.get("seed", c.seed);
  if (auto d = r.sub("datum")) {
    d->get("kind", c.datum);
    d->get("alpha", c.alpha);
    d->get("min_eigenvalue", c.min_eigenvalue);
    d->get("terms", c.datum_terms);
    d->finish();
  }
  if (auto d = r.sub("initial")) {
    d->get("kind", c.initial.kind);
    d->get("terms", c.initial.terms);
    d->get("constant", c.initial.constant);
    d->get("path", c.initial.path);
    d->finish();
  }
  r.get("truncation", c.truncation);
  r.get("consistency_forcing", c.consistency_forcing);
  if (auto f = r.sub("flow")) {
    f->get("T", c.flow.T);
    f->get("dt_init", c.flow.dt_init);
    f->get("safety", c.flow.safety);
    f->get("log_c", c.flow.log_c);
    f->get("snapshot_times", c.flow.snapshot_times);
    f->get("snapshot_count", c.snapshot_count);
    f->get("eps_pd", c.flow.eps_pd);
    f->get("max_halvings", c.flow.max_halvings);
    f->finish();
  }
  if (auto e = r.sub("elliptic")) {
    e->get("mode", c.elliptic_mode);
    e->get("tol", c.elliptic.tol);
    e->get("max_iters", c.elliptic.max_iters);
    e->get("max_halvings", c.elliptic.max_halvings);
    e->get("eps_pd", c.elliptic.eps_pd);
    e->get("krylov_restart", c.elliptic.krylov_restart);
    e->get("krylov_max_iters", c.elliptic.krylov_max_iters);
    e->finish();
  }
  if (auto h = r.sub("horizon")) {
    h->get("window", c.window);
    h->get("T_cap", c.T_cap);
    h->finish();
  }
  if (auto s = r.sub("smoothing")) {
    s->get("t_star", c.t_star);
    s->get("t_min", c.t_min);
    s->finish();
  }
  if (auto m = r.sub("monitors")) {
    m->get("A", c.monitor_A);
    m->get("alpha", c.monitor_alpha);
    m->finish();
  }
  if (auto t = r.sub("tolerances")) {
    t->get("stationarity", c.tol_stationarity);
    t->get("numerical", c.tol_numerical);
    t->get("envelope", c.tol_envelope);
    t->get("mass", c.tol_mass);
    t->get("phidot_slack", c.phidot_slack);
    t->get("phidot_floor", c.phidot_floor);
    t->get("step_error_rerun", c.step_error_rerun);
    t->get("laplacian_agreement", c.tol_laplacian_agreement);
    t->get("roughness_growth", c.min_roughness_growth);
    t->get("gradient_constant", c.tol_gradient_constant);
    t->finish();
  }
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

void ExperimentConfig::validate() const {
  const TorusGeometry g(n, N);  // throws on bad n / N
  check_terms(F.h, n, "F.h");
  check_terms(datum_terms, n, "datum.terms");
  check_terms(initial.terms, n, "initial.terms");
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw ConfigError(std::string("config: ") + what + " must be positive");
  };
  positive(tol_stationarity, "tolerances.stationarity");
  positive(tol_numerical, "tolerances.numerical");
  positive(tol_envelope, "tolerances.envelope");
  positive(tol_mass, "tolerances.mass");
  positive(phidot_slack, "tolerances.phidot_slack");
  if (!(phidot_floor >= 0.0)) throw ConfigError("config: tolerances.phidot_floor must be non-negative");
  positive(window, "horizon.window");
  positive(T_cap, "horizon.T_cap");
  positive(monitor_A, "monitors.A");
  positive(monitor_alpha, "monitors.alpha");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: datum.alpha must lie in (0, 1)");
  if (!(min_eigenvalue > 0.0 && min_eigenvalue < 1.0))
    throw ConfigError("config: datum.min_eigenvalue must lie in (0, 1)");
  if (datum != "rough" && datum != "trig") throw ConfigError("config: datum.kind must be rough or trig");
  if (initial.kind != "zero" && initial.kind != "trig" && initial.kind != "rough" && initial.kind != "snapshot")
    throw ConfigError("config: initial.kind must be zero, trig, rough or snapshot");
  if (initial.kind == "snapshot" && initial.path.empty()) throw ConfigError("config: initial.path is required");
  if (elliptic_mode != "self_consistent" && elliptic_mode != "fixed_rhs")
    throw ConfigError("config: elliptic.mode must be self_consistent or fixed_rhs");
  if (snapshot_count < 2) throw ConfigError("config: flow.snapshot_count must be at least 2");
  if (kind != ExperimentKind::cauchy) flow.validate();
  if (!(flow.safety > 0.0 && flow.safety < 1.0)) throw ConfigError("config: flow.safety must lie in (0, 1)");
  if (!(flow.dt_init > 0.0)) throw ConfigError("config: flow.dt_init must be positive");

  switch (kind) {
    case ExperimentKind::stationarity:
      // F' = a + b cos(s) >= 0 everywhere
      if (F.a < std::abs(F.b)) throw ConfigError("config: stationarity needs F' >= 0 (a >= |b|)");
      break;
    case ExperimentKind::cauchy:
      if (truncation.empty()) throw ConfigError("config: truncation list is empty");
      if (!strictly_increasing(truncation)) throw ConfigError("config: truncation levels must increase");
      for (int K : truncation)
        if (K < 0 || K > N / 2) throw ConfigError("config: truncation level " + std::to_string(K) + " outside [0, N/2]");
      break;
    case ExperimentKind::smoothing:
      if (refinements.size() < 2) throw ConfigError("config: smoothing needs at least two refinements");
      if (!strictly_increasing(refinements)) throw ConfigError("config: refinements must increase");
      for (int r : refinements) TorusGeometry(n, r);
      if (!(t_star > 0.0)) throw ConfigError("config: smoothing.t_star must be positive");
      if (t_star > flow.T)
        throw ConfigError("config: smoothing.t_star = " + std::to_string(t_star) + " lies beyond the horizon T = " +
                          std::to_string(flow.T));
      for (std::size_t i = 0; i < t_min.size(); ++i) {
        if (!(t_min[i] > 0.0 && t_min[i] <= flow.T)) throw ConfigError("config: smoothing.t_min entries must lie in (0, T]");
        if (i && !(t_min[i] < t_min[i - 1])) throw ConfigError("config: smoothing.t_min must decrease");
      }
      break;
    default:
      break;
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = kind_name(kind);
  j["geometry"] = {{"n", n}, {"N", N}, {"refinements", refinements}};
  j["F"] = {{"a", F.a}, {"b", F.b}, {"h", terms_json(F.h)}, {"shift", F.shift}};
  j["seed"] = seed;
  j["datum"] = {{"kind", datum}, {"alpha", alpha}, {"min_eigenvalue", min_eigenvalue}, {"terms", terms_json(datum_terms)}};
  j["initial"] = {{"kind", initial.kind}, {"terms", terms_json(initial.terms)}, {"constant", initial.constant},
                  {"path", initial.path}};
  j["truncation"] = truncation;
  j["consistency_forcing"] = consistency_forcing;
  j["flow"] = {{"T", flow.T},
               {"dt_init", flow.dt_init},
               {"safety", flow.safety},
               {"log_c", flow.log_c},
               {"snapshot_times", flow.snapshot_times},
               {"snapshot_count", snapshot_count},
               {"eps_pd", flow.eps_pd},
               {"max_halvings", flow.max_halvings}};
  j["elliptic"] = {{"mode", elliptic_mode},
                   {"tol", elliptic.tol},
                   {"max_iters", elliptic.max_iters},
                   {"max_halvings", elliptic.max_halvings},
                   {"eps_pd", elliptic.eps_pd},
                   {"krylov_restart", elliptic.krylov_restart},
                   {"krylov_max_iters", elliptic.krylov_max_iters}};
  j["horizon"] = {{"window", window}, {"T_cap", T_cap}};
  j["smoothing"] = {{"t_star", t_star}, {"t_min", t_min}};
  j["monitors"] = {{"A", monitor_A}, {"alpha", monitor_alpha}};
  j["tolerances"] = {{"stationarity", tol_stationarity},
                     {"numerical", tol_numerical},
                     {"envelope", tol_envelope},
                     {"mass", tol_mass},
                     {"phidot_slack", phidot_slack},
                     {"phidot_floor", phidot_floor},
                     {"step_error_rerun", step_error_rerun},
                     {"laplacian_agreement", tol_laplacian_agreement},
                     {"roughness_growth", min_roughness_growth},
                     {"gradient_constant", tol_gradient_constant}};
  return j;
}

}  // namespace cmaf
