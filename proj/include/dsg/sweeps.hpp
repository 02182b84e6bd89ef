#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "estimator.hpp"
#include "graph.hpp"
#include "rng.hpp"
#include "signals.hpp"

// Randomized property sweeps over the step operators and their products.
// The same batch generators back both the verification CLI subcommand and
// the acceptance checks, so a reported margin always refers to reproducible
// instances (master seed + index).

namespace dsg {

// Random connected graph: random attachment tree plus extra edges.
inline Topology random_connected_topology(std::uint64_t seed, int n,
                                          double extra_prob = 0.3) {
  if (n < 1) throw std::invalid_argument("graph needs at least one node");
  std::vector<std::pair<int, int>> edges;
  std::uint64_t t = 0;
  for (int v = 1; v < n; ++v)
    edges.emplace_back(uniform_int(seed, t++, 0, v - 1), v);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (uniform_unit(raw_draw(seed, 1000000 + t++)) < extra_prob)
        edges.emplace_back(a, b);
  return make_topology(n, std::move(edges));
}

struct SweepInstance {
  WeightMatrix w;
  AlgorithmParams params;
  StackedOperators ops;
};

// One random legal algorithm state: connected graph, regressors, energies at
// least 1 + |phi|^2, and diffused energy shares, with mu*(1+4*nu) <= 1. Every
// fourth instance sits exactly at the step-condition boundary.
inline SweepInstance make_random_instance(std::uint64_t master, std::uint64_t index,
                                          int n_max = 5, int m_max = 3) {
  const std::uint64_t seed = substream_seed(master, index, StreamKind::instance);
  std::uint64_t t = 0;
  const int n = uniform_int(seed, t++, 1, n_max);
  const int m = uniform_int(seed, t++, 1, m_max);
  const auto topo = random_connected_topology(raw_draw(seed, t++), n, 0.4);
  auto w = build_metropolis(topo);

  const double nu = uniform_range(seed, t++, 0.0, 1.5);
  const double slack =
      index % 4 == 0 ? 1.0 : uniform_range(seed, t++, 0.1, 0.999);
  const double mu = std::min(0.999999, slack / (1.0 + 4.0 * nu));
  const auto conn = connectivity_and_diameter(topo);
  AlgorithmParams params{mu, nu, std::max(1, conn.diameter.value_or(1))};

  std::vector<Eigen::VectorXd> phi(static_cast<std::size_t>(n));
  std::vector<double> r(static_cast<std::size_t>(n));
  std::vector<double> x0(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(m);
    for (int c = 0; c < m; ++c)
      v(c) = 3.0 * gaussian_draw(seed, t++);
    const double extra = uniform_range(seed, t++, 0.0, 20.0);
    const auto idx = static_cast<std::size_t>(i);
    phi[idx] = v;
    r[idx] = 1.0 + v.squaredNorm() + extra;
    x0[idx] = v.squaredNorm() / r[idx];
  }
  auto xq = diffuse_energy(w, x0, params.Q);
  auto ops = build_stacked_operators(w, params, phi, r, xq);
  return SweepInstance{std::move(w), params, std::move(ops)};
}

struct EigRangeSweep {
  int instances = 0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool pass = false;
};

// Eigenvalue range of mu*G over random instances: the step condition keeps
// every eigenvalue inside [0, 1].
inline EigRangeSweep step_operator_bound_sweep(int count, std::uint64_t master) {
  EigRangeSweep res;
  res.instances = count;
  res.min_eigenvalue = std::numeric_limits<double>::infinity();
  res.max_eigenvalue = -std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < count; ++idx) {
    const auto inst = make_random_instance(master, static_cast<std::uint64_t>(idx));
    const Eigen::MatrixXd mg = inst.params.mu * inst.ops.G;
    const auto eig = checked_symmetric_eig(0.5 * (mg + mg.transpose()));
    res.min_eigenvalue = std::min(res.min_eigenvalue, eig.values(0));
    res.max_eigenvalue =
        std::max(res.max_eigenvalue, eig.values(eig.values.size() - 1));
  }
  res.pass = res.min_eigenvalue >= -1e-12 && res.max_eigenvalue <= 1.0 + 1e-12;
  return res;
}

struct RecordedChain {
  WeightMatrix w;
  LaplacianSpectrum spectrum;
  AlgorithmParams params;
  std::vector<StackedOperators> ops;
};

// A real multi-step recursion on a random connected graph with i.i.d.
// gaussian regressors and noise, recording the stacked operator every step.
// strict_slack < 1 keeps mu*(1+4*nu) strictly inside the unit interval so the
// chain satisfies every product-level precondition at once.
inline RecordedChain make_random_chain(std::uint64_t master, std::uint64_t index,
                                       int steps, int n_min, int n_max, int m_max,
                                       double max_slack = 0.95) {
  const std::uint64_t seed = substream_seed(master, index, StreamKind::instance);
  std::uint64_t t = 0;
  const int n = uniform_int(seed, t++, n_min, n_max);
  const int m = uniform_int(seed, t++, 1, m_max);
  const auto topo = random_connected_topology(raw_draw(seed, t++), n, 0.4);
  auto w = build_metropolis(topo);
  auto spectrum = laplacian_spectrum(w);

  const double nu = uniform_range(seed, t++, 0.0, 1.2);
  const double slack = uniform_range(seed, t++, 0.2, max_slack);
  const double mu = slack / (1.0 + 4.0 * nu);
  const auto conn = connectivity_and_diameter(topo);
  AlgorithmParams params{mu, nu, std::max(1, conn.diameter.value_or(1))};

  RecordedChain chain{std::move(w), std::move(spectrum), params, {}};
  chain.ops.reserve(static_cast<std::size_t>(steps));
  NetworkRunner runner(chain.w, params);
  auto st = init_network(n, m);
  IidGaussianStream stream(n, m, 1.0, raw_draw(seed, t++));
  Eigen::VectorXd theta(m);
  for (int c = 0; c < m; ++c) theta(c) = uniform_range(seed, t++, -2.0, 2.0);
  const std::uint64_t noise_seed = raw_draw(seed, t++);
  for (int k = 1; k <= steps; ++k) {
    const auto phi = stream.step(k);
    const auto eps =
        sample_noise({NoiseModel::Kind::gaussian_iid, 0.7, 0.0}, noise_seed, k, n);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      y[static_cast<std::size_t>(i)] =
          phi[static_cast<std::size_t>(i)].dot(theta) +
          eps[static_cast<std::size_t>(i)];
    runner.step(st, phi, y);
    chain.ops.push_back(build_stacked_operators(chain.w, params, phi, st.r, st.x_q));
  }
  return chain;
}

struct EnergySweep {
  int chains = 0;
  double max_energy_over_cap = -std::numeric_limits<double>::infinity();
  bool pass = false;
};

// Transition energy sums over random chains, evaluated at the chain end and
// two interior cuts; each sum must stay within the stacked dimension.
inline EnergySweep transition_energy_sweep(int chains, std::uint64_t master,
                                           int steps = 50) {
  EnergySweep res;
  res.chains = chains;
  for (int idx = 0; idx < chains; ++idx) {
    const auto chain =
        make_random_chain(master, static_cast<std::uint64_t>(idx), steps, 1, 3, 2);
    const auto probe = make_transition_probe(chain.ops, chain.params);
    const double cap = static_cast<double>(probe.dim());
    for (int k : {steps / 2, 3 * steps / 4, steps}) {
      const double e = transition_energy_sum(probe, k);
      res.max_energy_over_cap = std::max(res.max_energy_over_cap, e - cap);
    }
  }
  res.pass = res.max_energy_over_cap <= 1e-8;
  return res;
}

struct ContractionSweep {
  int chains = 0;
  double min_det_margin = std::numeric_limits<double>::infinity();
  double max_psi_norm = 0.0;
  bool pass = false;
};

// Determinant and product-norm contraction over the same chain family.
inline ContractionSweep contraction_sweep(int chains, std::uint64_t master,
                                          int steps = 50) {
  ContractionSweep res;
  res.chains = chains;
  for (int idx = 0; idx < chains; ++idx) {
    const auto chain =
        make_random_chain(master, static_cast<std::uint64_t>(idx), steps, 1, 3, 2);
    const auto rep = contraction_checks(chain.ops, chain.params);
    res.min_det_margin = std::min(res.min_det_margin, rep.min_det_margin);
    res.max_psi_norm = std::max(res.max_psi_norm, rep.max_psi_norm);
  }
  res.pass = res.min_det_margin >= -1e-12 && res.max_psi_norm <= 1.0 + 1e-12;
  return res;
}

struct WindowBoundSweep {
  int windows = 0;
  double min_slack = std::numeric_limits<double>::infinity();  // lhs - rhs
  bool pass = false;
};

// Windowed minimum-eigenvalue bound on random connected graphs with full
// diffusion depth.
inline WindowBoundSweep window_bound_sweep(int windows, std::uint64_t master,
                                           int steps = 30) {
  WindowBoundSweep res;
  res.windows = windows;
  for (int idx = 0; idx < windows; ++idx) {
    const auto chain =
        make_random_chain(master, static_cast<std::uint64_t>(idx), steps, 2, 5, 3);
    const auto bound =
        windowed_min_eigenvalue_bound(chain.ops, chain.spectrum, chain.w, chain.params);
    res.min_slack = std::min(res.min_slack, bound.lhs - bound.rhs);
  }
  res.pass = res.min_slack >= -1e-10;
  return res;
}

struct EquivalenceSweep {
  int runs = 0;
  double max_relative_deviation = 0.0;
  bool pass = false;
};

// Per-node recursion vs the stacked error recursion, run side by side with
// shared regressors and noise. The deviation is relative to max(1, |error|).
inline EquivalenceSweep matrix_equivalence_sweep(int runs, std::uint64_t master,
                                                 int steps = 100) {
  EquivalenceSweep res;
  res.runs = runs;
  const int n_choices[] = {1, 2, 3, 5};
  for (int run = 0; run < runs; ++run) {
    const std::uint64_t seed =
        substream_seed(master, static_cast<std::uint64_t>(run), StreamKind::run);
    std::uint64_t t = 0;
    const int n = n_choices[uniform_int(seed, t++, 0, 3)];
    const int m = uniform_int(seed, t++, 1, 3);
    const auto topo = random_connected_topology(raw_draw(seed, t++), n, 0.4);
    const auto w = build_metropolis(topo);
    const double nu = uniform_range(seed, t++, 0.0, 1.2);
    const double mu = uniform_range(seed, t++, 0.2, 0.95) / (1.0 + 4.0 * nu);
    const auto conn = connectivity_and_diameter(topo);
    const AlgorithmParams params{mu, nu, std::max(1, conn.diameter.value_or(1))};

    NetworkRunner runner(w, params);
    auto st = init_network(n, m);
    Eigen::VectorXd theta(m);
    for (int c = 0; c < m; ++c) theta(c) = uniform_range(seed, t++, -2.0, 2.0);
    const Eigen::VectorXd stacked_theta = replicate_parameter(theta, n);
    Eigen::VectorXd err = stacked_theta;  // estimates start at zero
    IidGaussianStream stream(n, m, 1.0, raw_draw(seed, t++));
    const std::uint64_t noise_seed = raw_draw(seed, t++);

    for (int k = 1; k <= steps; ++k) {
      const auto phi = stream.step(k);
      const auto eps = sample_noise({NoiseModel::Kind::gaussian_iid, 0.5, 0.0},
                                    noise_seed, k, n);
      std::vector<double> y(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        y[static_cast<std::size_t>(i)] =
            phi[static_cast<std::size_t>(i)].dot(theta) +
            eps[static_cast<std::size_t>(i)];
      runner.step(st, phi, y);
      const auto ops = build_stacked_operators(w, params, phi, st.r, st.x_q);
      err = matrix_form_step(err, ops, params, stacked_theta, eps);

      const Eigen::VectorXd direct =
          stacked_theta - stack_sensor_vectors(st.theta_hat);
      const double dev =
          (err - direct).norm() / std::max(1.0, direct.norm());
      res.max_relative_deviation = std::max(res.max_relative_deviation, dev);
    }
  }
  res.pass = res.max_relative_deviation <= 1e-10;
  return res;
}

// Noise-free runs: the stacked error evolves exactly as the accumulated
// transition product applied to the initial error.
inline EquivalenceSweep noiseless_identity_sweep(int runs, std::uint64_t master,
                                                 int steps = 200) {
  EquivalenceSweep res;
  res.runs = runs;
  for (int run = 0; run < runs; ++run) {
    const std::uint64_t seed =
        substream_seed(master, static_cast<std::uint64_t>(run), StreamKind::run);
    std::uint64_t t = 0;
    const int n = uniform_int(seed, t++, 2, 4);
    const int m = uniform_int(seed, t++, 1, 3);
    const auto topo = random_connected_topology(raw_draw(seed, t++), n, 0.4);
    const auto w = build_metropolis(topo);
    const double nu = uniform_range(seed, t++, 0.0, 1.2);
    const double mu = uniform_range(seed, t++, 0.2, 0.95) / (1.0 + 4.0 * nu);
    const auto conn = connectivity_and_diameter(topo);
    const AlgorithmParams params{mu, nu, std::max(1, conn.diameter.value_or(1))};

    NetworkRunner runner(w, params);
    auto st = init_network(n, m);
    Eigen::VectorXd theta(m);
    for (int c = 0; c < m; ++c) theta(c) = uniform_range(seed, t++, -2.0, 2.0);
    const Eigen::VectorXd err0 = replicate_parameter(theta, n);
    Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(n * m, n * m);
    IidGaussianStream stream(n, m, 1.0, raw_draw(seed, t++));

    for (int k = 1; k <= steps; ++k) {
      const auto phi = stream.step(k);
      std::vector<double> y(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        y[static_cast<std::size_t>(i)] = phi[static_cast<std::size_t>(i)].dot(theta);
      runner.step(st, phi, y);
      const auto ops = build_stacked_operators(w, params, phi, st.r, st.x_q);
      prod = ((Eigen::MatrixXd::Identity(n * m, n * m) - params.mu * ops.G) * prod)
                 .eval();
      const Eigen::VectorXd predicted = prod * err0;
      const Eigen::VectorXd actual =
          err0 - stack_sensor_vectors(st.theta_hat);
      const double dev =
          (predicted - actual).norm() / std::max(1.0, actual.norm());
      res.max_relative_deviation = std::max(res.max_relative_deviation, dev);
    }
  }
  res.pass = res.max_relative_deviation <= 1e-10;
  return res;
}

struct DegenerationSweep {
  int runs = 0;
  double max_deviation = 0.0;
  bool pass = false;
};

// Single sensor: the network recursion collapses to the standard normalized
// SG update for any consensus gain.
inline DegenerationSweep single_node_degeneration_sweep(int runs,
                                                        std::uint64_t master,
                                                        int steps = 50) {
  DegenerationSweep res;
  res.runs = runs;
  const auto w = build_metropolis(make_topology(1, {}));
  for (int run = 0; run < runs; ++run) {
    const std::uint64_t seed =
        substream_seed(master, static_cast<std::uint64_t>(run), StreamKind::run);
    std::uint64_t t = 0;
    const int m = uniform_int(seed, t++, 1, 4);
    const double nu = uniform_range(seed, t++, 0.0, 5.0);
    const double mu = std::min(0.9, uniform_range(seed, t++, 0.2, 1.0) / (1.0 + 4.0 * nu));
    const AlgorithmParams params{mu, nu, 1};

    NetworkRunner runner(w, params);
    auto st = init_network(1, m);
    Eigen::VectorXd plain = Eigen::VectorXd::Zero(m);
    double plain_r = 1.0;
    IidGaussianStream stream(1, m, 1.5, raw_draw(seed, t++));
    Eigen::VectorXd theta(m);
    for (int c = 0; c < m; ++c) theta(c) = uniform_range(seed, t++, -2.0, 2.0);
    const std::uint64_t noise_seed = raw_draw(seed, t++);

    for (int k = 1; k <= steps; ++k) {
      const auto phi = stream.step(k);
      const auto eps = sample_noise({NoiseModel::Kind::gaussian_iid, 0.8, 0.0},
                                    noise_seed, k, 1);
      const double y = phi[0].dot(theta) + eps[0];
      runner.step(st, phi, {y});
      standard_sg_step(plain, plain_r, phi[0], y, params.mu);
      res.max_deviation = std::max(
          res.max_deviation, (st.theta_hat[0] - plain).lpNorm<Eigen::Infinity>());
      res.max_deviation =
          std::max(res.max_deviation, std::abs(st.r[0] - plain_r));
    }
  }
  res.pass = res.max_deviation <= 1e-14;
  return res;
}

}  // namespace dsg
