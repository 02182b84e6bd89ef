#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graph.hpp"

// Distributed stochastic-gradient estimation with energy diffusion. Each step
// k (1-based) consumes one regressor phi and one observation y per sensor:
//
//   r_i       += |phi_i|^2                    (r_0 = 1)
//   x_i(0)     = |phi_i|^2 / r_i
//   x(Q)       = Q diffusion rounds of x(0) through the weight matrix
//   z_i        = x_i(Q) * sum_l a_li (th_i - th_l)
//   th_i'      = th_i + mu (phi_i / r_i)(y_i - phi_i . th_i)
//                     - mu nu sum_j a_ij (z_i - z_j)
//
// all sums over graph neighbors, with every z computed from the estimates
// frozen at the start of the step (synchronous update).

namespace dsg {

struct AlgorithmParams {
  double mu = 0.0;  // gradient gain, in (0, 1)
  double nu = 0.0;  // consensus gain, >= 0
  int Q = 1;        // diffusion rounds per step
};

inline void validate_params(const AlgorithmParams& p) {
  if (!std::isfinite(p.mu) || p.mu <= 0.0 || p.mu >= 1.0)
    throw std::invalid_argument("mu must lie in (0, 1)");
  if (!std::isfinite(p.nu) || p.nu < 0.0)
    throw std::invalid_argument("nu must be finite and nonnegative");
  if (p.mu * (1.0 + 4.0 * p.nu) > 1.0)
    throw std::invalid_argument(
        "step condition violated: mu*(1+4*nu) = " +
        std::to_string(p.mu * (1.0 + 4.0 * p.nu)) + " exceeds 1");
  if (p.Q < 1) throw std::invalid_argument("Q must be at least 1");
}

// Strict inequality version of the step condition; equality is legal for a
// single step but the convergence guarantees need strictness.
inline bool strict_step_condition(const AlgorithmParams& p) {
  return p.mu * (1.0 + 4.0 * p.nu) < 1.0;
}

// Q must cover the network diameter so diffused energies mix globally.
inline void require_diffusion_depth(const AlgorithmParams& p,
                                    const Connectivity& conn) {
  if (!conn.connected)
    throw std::invalid_argument("the sensor graph must be connected");
  if (p.Q < conn.diameter.value())
    throw std::invalid_argument(
        "Q = " + std::to_string(p.Q) + " is below the network diameter " +
        std::to_string(conn.diameter.value()));
}

struct NetworkState {
  int k = 0;  // completed steps
  int n = 0;
  int m = 0;
  std::vector<Eigen::VectorXd> theta_hat;
  std::vector<double> r;
  std::vector<double> x_q;  // diffused energies from the latest step
};

inline NetworkState init_network(int n, int m,
                                 const std::vector<Eigen::VectorXd>& theta0 = {}) {
  if (n < 1 || m < 1) throw std::invalid_argument("network needs n >= 1, m >= 1");
  NetworkState st;
  st.n = n;
  st.m = m;
  if (theta0.empty()) {
    st.theta_hat.assign(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(m));
  } else {
    if (static_cast<int>(theta0.size()) != n)
      throw std::invalid_argument("initial estimates must cover all sensors");
    for (const auto& t : theta0)
      if (t.size() != m || !t.allFinite())
        throw std::invalid_argument("initial estimates must be finite m-vectors");
    st.theta_hat = theta0;
  }
  st.r.assign(static_cast<std::size_t>(n), 1.0);
  st.x_q.assign(static_cast<std::size_t>(n), 0.0);
  return st;
}

namespace detail {

inline void diffuse_rounds(const Eigen::MatrixXd& a,
                           const std::vector<std::vector<int>>& adj,
                           std::vector<double>& x, std::vector<double>& buf,
                           int Q) {
  const int n = static_cast<int>(x.size());
  for (int q = 0; q < Q; ++q) {
    for (int i = 0; i < n; ++i) {
      double acc = a(i, i) * x[static_cast<std::size_t>(i)];
      for (int j : adj[static_cast<std::size_t>(i)])
        acc += a(i, j) * x[static_cast<std::size_t>(j)];
      buf[static_cast<std::size_t>(i)] = acc;
    }
    x.swap(buf);
  }
}

}  // namespace detail

// Q rounds of neighborhood averaging of per-sensor energies.
inline std::vector<double> diffuse_energy(const WeightMatrix& w,
                                          const std::vector<double>& x0, int Q) {
  const int n = w.topology.n;
  if (static_cast<int>(x0.size()) != n)
    throw std::invalid_argument("energy vector size does not match the graph");
  if (Q < 1) throw std::invalid_argument("Q must be at least 1");
  for (double v : x0)
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("energies must be finite and nonnegative");
  std::vector<double> x = x0, buf(x0.size());
  detail::diffuse_rounds(w.a, w.topology.adjacency(), x, buf, Q);
  return x;
}

// Runs the per-sensor recursion with cached adjacency and scratch buffers;
// preferred for long Monte Carlo loops. network_step wraps one-shot use.
class NetworkRunner {
 public:
  NetworkRunner(const WeightMatrix& w, AlgorithmParams params)
      : w_(&w), adj_(w.topology.adjacency()), params_(params) {
    validate_params(params_);
  }

  void step(NetworkState& st, const std::vector<Eigen::VectorXd>& phi,
            const std::vector<double>& y) {
    const int n = st.n;
    const int m = st.m;
    if (w_->topology.n != n)
      throw std::invalid_argument("network state does not match the graph");
    if (static_cast<int>(phi.size()) != n || static_cast<int>(y.size()) != n)
      throw std::invalid_argument("step inputs must cover all sensors");
    for (int i = 0; i < n; ++i) {
      if (phi[static_cast<std::size_t>(i)].size() != m ||
          !phi[static_cast<std::size_t>(i)].allFinite() ||
          !std::isfinite(y[static_cast<std::size_t>(i)]))
        throw std::invalid_argument("step inputs must be finite and m-dimensional");
    }
    resize_scratch(n, m);

    // Energies first: r is cumulative through this step's regressor.
    for (int i = 0; i < n; ++i) {
      const auto& p = phi[static_cast<std::size_t>(i)];
      const double sq = p.squaredNorm();
      st.r[static_cast<std::size_t>(i)] += sq;
      x_[static_cast<std::size_t>(i)] = sq / st.r[static_cast<std::size_t>(i)];
    }
    detail::diffuse_rounds(w_->a, adj_, x_, xbuf_, params_.Q);

    // Consensus compensators from the frozen estimates.
    for (int i = 0; i < n; ++i) {
      auto& zi = z_[static_cast<std::size_t>(i)];
      zi.setZero();
      for (int l : adj_[static_cast<std::size_t>(i)])
        zi += w_->a(l, i) * (st.theta_hat[static_cast<std::size_t>(i)] -
                             st.theta_hat[static_cast<std::size_t>(l)]);
      zi *= x_[static_cast<std::size_t>(i)];
    }

    for (int i = 0; i < n; ++i) {
      auto& cons = consensus_[static_cast<std::size_t>(i)];
      cons.setZero();
      for (int j : adj_[static_cast<std::size_t>(i)])
        cons += w_->a(i, j) *
                (z_[static_cast<std::size_t>(i)] - z_[static_cast<std::size_t>(j)]);
      const auto& p = phi[static_cast<std::size_t>(i)];
      const double innovation =
          y[static_cast<std::size_t>(i)] - p.dot(st.theta_hat[static_cast<std::size_t>(i)]);
      next_[static_cast<std::size_t>(i)] =
          st.theta_hat[static_cast<std::size_t>(i)] +
          (params_.mu * innovation / st.r[static_cast<std::size_t>(i)]) * p -
          (params_.mu * params_.nu) * cons;
    }
    st.theta_hat.swap(next_);
    st.x_q = x_;
    ++st.k;
  }

  const AlgorithmParams& params() const { return params_; }

 private:
  void resize_scratch(int n, int m) {
    if (static_cast<int>(x_.size()) != n) {
      x_.resize(static_cast<std::size_t>(n));
      xbuf_.resize(static_cast<std::size_t>(n));
    }
    if (static_cast<int>(z_.size()) != n || (n > 0 && z_[0].size() != m)) {
      z_.assign(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(m));
      consensus_.assign(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(m));
      next_.assign(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(m));
    }
  }

  const WeightMatrix* w_;
  std::vector<std::vector<int>> adj_;
  AlgorithmParams params_;
  std::vector<double> x_, xbuf_;
  std::vector<Eigen::VectorXd> z_, consensus_, next_;
};

// One synchronous update of the whole network.
inline void network_step(NetworkState& st, const WeightMatrix& w,
                         const AlgorithmParams& params,
                         const std::vector<Eigen::VectorXd>& phi,
                         const std::vector<double>& y) {
  NetworkRunner runner(w, params);
  runner.step(st, phi, y);
}

// Non-cooperative baseline: the same gradient step without any network terms.
inline void standard_sg_step(Eigen::VectorXd& theta_hat, double& r,
                             const Eigen::VectorXd& phi, double y, double mu) {
  if (!std::isfinite(mu) || !std::isfinite(y) || !phi.allFinite())
    throw std::invalid_argument("standard SG step inputs must be finite");
  if (!(r >= 1.0))
    throw std::invalid_argument("r must be at least 1");
  r += phi.squaredNorm();
  const double innovation = y - phi.dot(theta_hat);
  theta_hat += (mu * innovation / r) * phi;
}

// Dense stacked operators for one step; desk-scale only.
inline constexpr int kStackedDimCap = 400;

struct StackedOperators {
  int n = 0;
  int m = 0;
  Eigen::MatrixXd Phi;     // mn x n, block column i holds phi_i
  Eigen::VectorXd r;       // n
  Eigen::VectorXd x_q;     // n, diffused energies
  Eigen::MatrixXd A;       // mn x mn, block diag of phi_i phi_i^T / r_i
  Eigen::MatrixXd L_lift;  // mn x mn, (I - weights) lifted by I_m
  Eigen::MatrixXd G;       // mn x mn, A + nu * L_lift diag(x_q ox 1_m) L_lift
};

inline StackedOperators build_stacked_operators(
    const WeightMatrix& w, const AlgorithmParams& params,
    const std::vector<Eigen::VectorXd>& phi, const std::vector<double>& r,
    const std::vector<double>& x_q, int dim_cap = kStackedDimCap) {
  const int n = w.topology.n;
  if (static_cast<int>(phi.size()) != n || static_cast<int>(r.size()) != n ||
      static_cast<int>(x_q.size()) != n)
    throw std::invalid_argument("stacked inputs must cover all sensors");
  const int m = static_cast<int>(phi[0].size());
  if (static_cast<long long>(m) * n > dim_cap)
    throw std::invalid_argument(
        "stacked dimension m*n = " + std::to_string(m * n) +
        " exceeds the dense cap " + std::to_string(dim_cap));
  for (int i = 0; i < n; ++i) {
    const auto& p = phi[static_cast<std::size_t>(i)];
    if (p.size() != m || !p.allFinite())
      throw std::invalid_argument("regressors must be finite m-vectors");
    const double ri = r[static_cast<std::size_t>(i)];
    if (!std::isfinite(ri) || ri < 1.0 || ri * (1.0 + 1e-12) < p.squaredNorm())
      throw std::invalid_argument(
          "r must be >= 1 and dominate the current regressor energy");
    const double xi = x_q[static_cast<std::size_t>(i)];
    if (!std::isfinite(xi) || xi < 0.0)
      throw std::invalid_argument("diffused energies must be finite and nonnegative");
  }

  StackedOperators ops;
  ops.n = n;
  ops.m = m;
  ops.Phi = Eigen::MatrixXd::Zero(m * n, n);
  ops.r = Eigen::VectorXd(n);
  ops.x_q = Eigen::VectorXd(n);
  ops.A = Eigen::MatrixXd::Zero(m * n, m * n);
  for (int i = 0; i < n; ++i) {
    const auto& p = phi[static_cast<std::size_t>(i)];
    ops.Phi.block(i * m, i, m, 1) = p;
    ops.r(i) = r[static_cast<std::size_t>(i)];
    ops.x_q(i) = x_q[static_cast<std::size_t>(i)];
    ops.A.block(i * m, i * m, m, m) = p * p.transpose() / ops.r(i);
  }
  ops.L_lift = Eigen::MatrixXd::Zero(m * n, m * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double lij = (i == j ? 1.0 : 0.0) - w.a(i, j);
      if (lij != 0.0)
        ops.L_lift.block(i * m, j * m, m, m) =
            lij * Eigen::MatrixXd::Identity(m, m);
    }
  Eigen::VectorXd x_lift(m * n);
  for (int i = 0; i < n; ++i) x_lift.segment(i * m, m).setConstant(ops.x_q(i));
  ops.G = ops.A + params.nu * (ops.L_lift * x_lift.asDiagonal() * ops.L_lift);
  return ops;
}

// One step of the stacked error recursion:
//   err' = (I - mu G) err - mu Phi R^{-1} noise
// Theta (the stacked true parameter) fixes the expected dimension; the error
// dynamics themselves do not depend on it.
inline Eigen::VectorXd matrix_form_step(const Eigen::VectorXd& theta_err,
                                        const StackedOperators& ops,
                                        const AlgorithmParams& params,
                                        const Eigen::VectorXd& Theta,
                                        const std::vector<double>& noise) {
  const int mn = ops.n * ops.m;
  if (theta_err.size() != mn || Theta.size() != mn)
    throw std::invalid_argument("stacked vectors must have dimension m*n");
  if (static_cast<int>(noise.size()) != ops.n)
    throw std::invalid_argument("noise must cover all sensors");
  Eigen::VectorXd scaled(ops.n);
  for (int i = 0; i < ops.n; ++i)
    scaled(i) = noise[static_cast<std::size_t>(i)] / ops.r(i);
  return theta_err - params.mu * (ops.G * theta_err) -
         params.mu * (ops.Phi * scaled);
}

// Stack per-sensor vectors into one mn-vector (sensor-major).
inline Eigen::VectorXd stack_sensor_vectors(const std::vector<Eigen::VectorXd>& v) {
  if (v.empty()) throw std::invalid_argument("nothing to stack");
  const int n = static_cast<int>(v.size());
  const int m = static_cast<int>(v[0].size());
  Eigen::VectorXd out(n * m);
  for (int i = 0; i < n; ++i) {
    if (v[static_cast<std::size_t>(i)].size() != m)
      throw std::invalid_argument("stacked vectors must share one dimension");
    out.segment(i * m, m) = v[static_cast<std::size_t>(i)];
  }
  return out;
}

inline Eigen::VectorXd replicate_parameter(const Eigen::VectorXd& theta, int n) {
  Eigen::VectorXd out(theta.size() * n);
  for (int i = 0; i < n; ++i)
    out.segment(i * static_cast<int>(theta.size()),
                static_cast<int>(theta.size())) = theta;
  return out;
}

}  // namespace dsg
