#pragma once

#include <CLI11.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "graph.hpp"
#include "harness.hpp"
#include "sweeps.hpp"
#include "trajectory.hpp"

// Command-line front end. cli_main is the testable entry point: it takes the
// argument list without the program name and writes through the supplied
// streams. Exit codes: 0 success, 1 validation/usage error, 2 runtime error.

namespace dsg {

namespace detail {

inline int run_simulate(const std::string& config_path,
                        std::optional<std::uint64_t> seed,
                        std::optional<int> steps, std::optional<int> runs,
                        std::optional<int> workers,
                        std::optional<std::string> out_dir, std::ostream& out) {
  ExperimentConfig cfg = parse_config_file(config_path);
  if (seed) cfg.seed = *seed;
  if (steps) cfg.steps = *steps;
  if (runs) {
    cfg.runs = *runs;
    cfg.record_trajectories = std::min(cfg.record_trajectories, cfg.runs);
  }
  if (workers) cfg.workers = *workers;
  if (out_dir) cfg.outputs = *out_dir;

  const ResolvedExperiment rx = resolve_config(cfg);
  const ExperimentResult res = run_experiment(rx);
  emit_outputs(res, rx.cfg, rx.cfg.outputs);

  const auto last = static_cast<std::size_t>(res.series.steps - 1);
  out << "wrote " << rx.cfg.outputs << " (runs = " << rx.cfg.runs
      << ", steps = " << rx.cfg.steps << ")\n";
  out << "final max-node MSE: cooperative " << res.series.max_coop[last]
      << ", non-cooperative " << res.series.max_nonco[last] << "\n";
  out << "final min-node MSE: cooperative " << res.series.min_coop[last]
      << ", non-cooperative " << res.series.min_nonco[last] << "\n";
  return 0;
}

inline int run_diagnose(const std::string& trajectory_path, int stride, bool full,
                        std::optional<double> constant,
                        std::optional<std::string> csv_path, std::ostream& out) {
  const TrajectoryRecord rec = read_trajectory_csv_file(trajectory_path);
  std::optional<double> n_user;
  if (constant) n_user = *constant;
  const auto rep = excitation_report(rec, n_user, full ? 1 : stride);
  out << excitation_summary(rep);

  const auto trace = noise_accumulation_trace(rec);
  double max_norm = 0.0, final_tail = 0.0;
  if (!trace.s_norm.empty()) {
    max_norm = *std::max_element(trace.s_norm.begin(), trace.s_norm.end());
    final_tail = trace.tail_osc.front();
  }
  out << "noise accumulation: max ||S_k|| = " << max_norm
      << ", max oscillation after step 1 = " << final_tail << "\n";

  if (csv_path) {
    std::ofstream csv(*csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + *csv_path);
    write_excitation_csv(csv, rep);
    out << "wrote per-step diagnostics to " << *csv_path << "\n";
  }
  return 0;
}

inline int run_lemma_check(const std::string& config_path, int instances,
                           std::optional<std::uint64_t> seed, std::ostream& out) {
  ExperimentConfig cfg = parse_config_file(config_path);
  if (seed) cfg.seed = *seed;
  const ResolvedExperiment rx = resolve_config(cfg);  // enforces the step condition
  out << "config check: mu*(1+4*nu) = "
      << rx.cfg.params.mu * (1.0 + 4.0 * rx.cfg.params.nu)
      << " <= 1, step condition holds\n";

  const std::uint64_t master = rx.cfg.seed;
  bool all_ok = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    out << (pass ? "PASS" : "FAIL") << "  " << name << " (" << detail << ")\n";
    all_ok = all_ok && pass;
  };

  const auto eig = step_operator_bound_sweep(instances, master);
  report("step-operator spectrum within [0, 1]", eig.pass,
         std::to_string(eig.instances) + " instances, eig range [" +
             std::to_string(eig.min_eigenvalue) + ", " +
             std::to_string(eig.max_eigenvalue) + "]");

  const auto energy = transition_energy_sweep(std::max(1, instances / 2), master);
  report("transition energy sums bounded by m*n", energy.pass,
         std::to_string(energy.chains) + " chains, worst excess = " +
             std::to_string(energy.max_energy_over_cap));

  const auto window = window_bound_sweep(std::max(1, instances / 2), master);
  report("windowed minimum-eigenvalue bound", window.pass,
         std::to_string(window.windows) + " windows, min slack = " +
             std::to_string(window.min_slack));

  const auto contraction = contraction_sweep(std::max(1, instances / 2), master);
  report("determinant and norm contraction", contraction.pass,
         std::to_string(contraction.chains) + " chains, min det margin = " +
             std::to_string(contraction.min_det_margin) + ", max ||Psi|| = " +
             std::to_string(contraction.max_psi_norm));

  if (!all_ok) throw std::runtime_error("at least one property sweep failed");
  out << "all property sweeps passed\n";
  return 0;
}

inline int run_graph_report(const std::string& edge_path, std::ostream& out) {
  const Topology topo = load_edge_list(edge_path);
  const auto conn = connectivity_and_diameter(topo);
  out << "nodes: " << topo.n << "\n";
  out << "edges: " << topo.edges.size() << "\n";
  out << "connected: " << (conn.connected ? "yes" : "no") << "\n";
  if (conn.connected && conn.diameter)
    out << "diameter: " << *conn.diameter << "\n";
  else
    out << "diameter: - (graph is disconnected)\n";

  const WeightMatrix w = build_metropolis(topo);
  const LaplacianSpectrum spec = laplacian_spectrum(w);
  out << "weight-Laplacian eigenvalues:";
  for (int i = 0; i < spec.eigenvalues.size(); ++i)
    out << ' ' << detail::full_precision(spec.eigenvalues(i));
  out << "\n";
  out << "algebraic connectivity (second smallest): "
      << detail::full_precision(spec.l2) << "\n";
  if (!conn.connected)
    out << "warning: disconnected graphs cannot satisfy the cooperative "
           "excitation condition\n";
  return 0;
}

}  // namespace detail

// args excludes the program name.
inline int cli_main(std::vector<std::string> args, std::ostream& out,
                    std::ostream& err) {
  CLI::App app{"distributed stochastic-gradient network estimation toolkit"};
  app.name("dsgnet");
  app.require_subcommand(1);

  std::string config_path, trajectory_path, edge_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps, runs, workers;
  std::optional<std::string> out_dir, csv_path;
  std::optional<double> constant;
  int stride = 10;
  bool full = false;
  int instances = 200;

  auto* simulate = app.add_subcommand(
      "simulate", "run the paired cooperative / non-cooperative experiment");
  simulate->add_option("config", config_path, "experiment config file")->required();
  simulate->add_option("--seed", seed, "override the config seed");
  simulate->add_option("--steps", steps, "override the horizon");
  simulate->add_option("--runs", runs, "override the Monte Carlo run count");
  simulate->add_option("--workers", workers, "override the worker count");
  simulate->add_option("--out", out_dir, "override the output directory");

  auto* diagnose = app.add_subcommand(
      "diagnose", "excitation and noise diagnostics for a recorded trajectory");
  diagnose->add_option("trajectory", trajectory_path, "trajectory CSV file")
      ->required();
  diagnose->add_option("--stride", stride, "Gram sampling stride (default 10)");
  diagnose->add_flag("--full", full, "evaluate the Gram at every step");
  diagnose->add_option("--constant", constant,
                       "use this bound constant instead of the fitted one");
  diagnose->add_option("--csv", csv_path, "also write per-step diagnostics here");

  auto* lemma = app.add_subcommand(
      "lemma-check", "validate the config and run random-instance property sweeps");
  lemma->add_option("config", config_path, "experiment config file")->required();
  lemma->add_option("--instances", instances,
                    "random instances for the spectrum sweep (default 200)");
  lemma->add_option("--seed", seed, "override the config seed");

  auto* graph = app.add_subcommand("graph", "spectrum and diameter report");
  graph->add_option("edgelist", edge_path, "edge list file")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (simulate->parsed())
      return detail::run_simulate(config_path, seed, steps, runs, workers, out_dir,
                                  out);
    if (diagnose->parsed())
      return detail::run_diagnose(trajectory_path, stride, full, constant, csv_path,
                                  out);
    if (lemma->parsed())
      return detail::run_lemma_check(config_path, instances, seed, out);
    if (graph->parsed()) return detail::run_graph_report(edge_path, out);
    err << "error: no subcommand selected\n\n" << app.help();
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dsg
