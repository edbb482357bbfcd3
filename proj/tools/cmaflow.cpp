// cmaflow: batch front end for the elliptic solver, the flow and the experiments.
//
//   cmaflow solve-elliptic --config c.json --out dir
//   cmaflow run-flow       --config c.json --out dir
//   cmaflow monitor        --config c.json --out dir
//   cmaflow experiment stationarity|cauchy|smoothing --config c.json --out dir
//
// Exit code 0 iff every verdict passes; 1 when some verdict fails; 2 on errors.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cmaf/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool plots = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory")->required();
  cmd->add_option("--seed", c.seed, "override the configured seed");
  cmd->add_option("--threads", c.threads, "worker threads for independent runs")->check(CLI::Range(1u, 1024u));
  cmd->add_flag("--emit-plots-data", c.plots, "also write CSVs shaped for plotting");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

int execute(cmaf::ExperimentKind kind, const Common& c) {
  std::ifstream is(c.config);
  cmaf::json j = cmaf::json::parse(is);
  if (!j.is_object()) throw cmaf::ConfigError("config: expected an object");
  const std::string name = cmaf::kind_name(kind);
  if (j.contains("experiment") && j["experiment"] != name)
    throw cmaf::ConfigError("config is for \"" + j["experiment"].dump() + "\", not \"" + name + "\"");
  j["experiment"] = name;
  if (c.seed) j["seed"] = *c.seed;
  const cmaf::ExperimentConfig cfg = cmaf::parse_config(j);

  cmaf::RunOptions opts;
  opts.out_dir = c.out;
  opts.threads = c.threads;
  opts.emit_plots_data = c.plots;
  if (!c.quiet) opts.log = [](const std::string& line) { std::cerr << "cmaflow: " << line << '\n'; };
  const cmaf::ExperimentReport report = cmaf::run_experiment(cfg, opts);

  for (const cmaf::Verdict& v : report.verdicts)
    std::printf("%-5s %-48s lhs=%.6g rhs=%.6g%s\n", v.pass ? "PASS" : "FAIL", v.name.c_str(), v.lhs, v.rhs,
                v.waived ? " (waived)" : "");
  for (const std::string& w : report.warnings) std::printf("warning: %s\n", w.c_str());
  std::printf("report: %s\n", (opts.out_dir / "report.json").string().c_str());
  return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex Monge-Ampere flow on the flat torus"};
  app.require_subcommand(1);

  Common common;
  std::optional<cmaf::ExperimentKind> chosen;

  struct Simple {
    const char* name;
    const char* help;
    cmaf::ExperimentKind kind;
  };
  for (const Simple& s : {Simple{"solve-elliptic", "solve the elliptic equation", cmaf::ExperimentKind::solve_elliptic},
                          Simple{"run-flow", "run the parabolic flow", cmaf::ExperimentKind::run_flow},
                          Simple{"monitor", "run the flow and evaluate the estimate monitors",
                                 cmaf::ExperimentKind::monitor}}) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, common);
    const cmaf::ExperimentKind kind = s.kind;
    cmd->callback([&chosen, kind] { chosen = kind; });
  }

  CLI::App* exp = app.add_subcommand("experiment", "run a verification experiment");
  exp->require_subcommand(1);
  for (const char* name : {"stationarity", "cauchy", "smoothing"}) {
    CLI::App* cmd = exp->add_subcommand(name, std::string(name) + " experiment");
    add_common(cmd, common);
    const cmaf::ExperimentKind kind = cmaf::parse_kind(name);
    cmd->callback([&chosen, kind] { chosen = kind; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return execute(*chosen, common);
  } catch (const std::exception& e) {
    std::cerr << "cmaflow: error: " << e.what() << '\n';
    return 2;
  }
}
