#pragma once

// Experiment pipeline, configuration, serialization.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmaf/elliptic.hpp"
#include "cmaf/flow.hpp"
#include "cmaf/kahler.hpp"
#include "cmaf/monitors.hpp"

namespace cmaf {

using json = nlohmann::ordered_json;

// --- snapshots ------------------------------------------------------------

inline constexpr char kSnapshotMagic[4] = {'C', 'M', 'A', 'F'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

class SnapshotError : public Error {
 public:
  using Error::Error;
};

// "CMAF", u32 version, u32 n, u32 N, f64 t, N^(2n) f64 values; little-endian.
void write_snapshot(const FlowState& state, const std::filesystem::path& path);
// Returns the stored field; the metric is rebuilt, phi_dot is evaluated when F is given.
FlowState read_snapshot(const std::filesystem::path& path, const NonlinearityF* F = nullptr, double log_c = 0.0);
// Geometry check: rejects a file whose (n, N) differ from `expected`.
FlowState read_snapshot(const std::filesystem::path& path, const TorusGeometry& expected,
                        const NonlinearityF* F = nullptr, double log_c = 0.0);

// Write-temp-then-rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // NaN is written as "nan"
  std::string to_string() const;
};

// --- configuration ----------------------------------------------------------

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ExperimentKind { solve_elliptic, run_flow, monitor, stationarity, cauchy, smoothing };
ExperimentKind parse_kind(const std::string& name);
std::string kind_name(ExperimentKind k);

struct FSpec {
  double a = 1.0;
  double b = 0.0;
  std::vector<TrigTerm> h;
  double shift = 0.0;
  NonlinearityF build() const;
};

// Initial data for run-flow / monitor / solve-elliptic.
struct DatumSpec {
  std::string kind = "zero";  // zero | trig | rough | snapshot
  std::vector<TrigTerm> terms;
  double constant = 0.0;
  std::string path;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::stationarity;
  int n = 1;
  int N = 64;
  std::vector<int> refinements;  // smoothing
  FSpec F;
  std::uint64_t seed = 20240611;
  double alpha = 0.5;             // roughness exponent
  double min_eigenvalue = 0.2;    // rough datum scaling target
  std::string datum = "rough";    // smoothing: rough | trig
  std::vector<TrigTerm> datum_terms;
  DatumSpec initial;
  std::vector<int> truncation;    // cauchy K list
  bool consistency_forcing = true;
  FlowConfig flow;
  int snapshot_count = 11;        // uniform snapshots in [0, T] when none are listed
  EllipticOptions elliptic;
  std::string elliptic_mode = "self_consistent";  // or fixed_rhs
  double window = 1.0;
  double T_cap = 5.0;
  double t_star = 0.05;
  std::vector<double> t_min;
  double tol_stationarity = 1e-6;
  double tol_numerical = 1e-6;
  double tol_envelope = 1e-5;
  double tol_mass = 1e-9;
  double phidot_slack = 1e-3;
  double phidot_floor = 0.0;  // absolute allowance for roundoff in sup|phi_dot|
  bool step_error_rerun = true;
  double tol_laplacian_agreement = 0.10;
  double min_roughness_growth = 1.2;
  double tol_gradient_constant = 0.20;
  double monitor_A = 1.0;
  double monitor_alpha = 0.1;

  void validate() const;
  json to_json() const;
};

// Strict parse: unknown keys anywhere are rejected.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// --- reports ------------------------------------------------------------------

struct Verdict {
  std::string name;
  std::string inequality;  // "lhs <= rhs" in words
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  bool waived = false;
  std::string note;
  double margin() const { return rhs - lhs; }
};

// lhs <= rhs
Verdict check_le(std::string name, std::string inequality, double lhs, double rhs);

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::stationarity;
  json config;
  std::vector<Verdict> verdicts;
  json measured = json::object();
  std::vector<std::string> files;  // relative to the output directory
  json runtime = json::object();   // timings; kept out of report.json
  std::vector<std::string> warnings;

  bool all_pass() const;
  const Verdict& verdict(const std::string& name) const;
  json to_json() const;
};

struct RunOptions {
  std::filesystem::path out_dir;
  unsigned threads = 1;
  bool emit_plots_data = false;
  std::function<void(const std::string&)> log;  // progress lines; may be empty
};

// Runs the experiment, writes report.json, runtime.json and the data files.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

ExperimentReport experiment_stationarity(const ExperimentConfig& cfg, const RunOptions& opts);
ExperimentReport experiment_cauchy(const ExperimentConfig& cfg, const RunOptions& opts);
ExperimentReport experiment_smoothing(const ExperimentConfig& cfg, const RunOptions& opts);

// --- helpers shared with the experiments -----------------------------------

// Runs task(i) for i in [0, count) on up to `threads` workers; the first
// exception by index is rethrown after all tasks finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task);

// Multiplier s (by bisection) with min eigenvalue of g_{s f} >= target.
double scale_to_min_eigenvalue(const ScalarField& f, double target);

}  // namespace cmaf
