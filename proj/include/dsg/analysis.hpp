#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "estimator.hpp"
#include "graph.hpp"
#include "trajectory.hpp"

// Diagnostics over recorded runs: excitation-condition verdicts, transition
// products and their contraction properties, noise accumulation tails, and
// empirical convergence-rate fits.

namespace dsg {

struct SymEig {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
};

// Symmetric eigensolve with a reconstruction sanity check: V D V^T must match
// the input to 1e-10 relative in Frobenius norm.
inline SymEig checked_symmetric_eig(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols())
    throw std::invalid_argument("eigensolve needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("symmetric eigensolver failed to converge");
  const Eigen::MatrixXd rebuilt = solver.eigenvectors() *
                                  solver.eigenvalues().asDiagonal() *
                                  solver.eigenvectors().transpose();
  const double scale = std::max(1.0, M.norm());
  if ((rebuilt - M).norm() > 1e-10 * scale)
    throw std::runtime_error("eigendecomposition failed the reconstruction check");
  return SymEig{solver.eigenvalues(), solver.eigenvectors()};
}

inline double spectral_norm(const Eigen::MatrixXd& M) {
  const Eigen::MatrixXd gram = M.transpose() * M;
  const auto eig = checked_symmetric_eig(0.5 * (gram + gram.transpose()));
  return std::sqrt(std::max(0.0, eig.values(eig.values.size() - 1)));
}

// Symmetric PSD square root; tiny negative eigenvalues are clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M) {
  const auto eig = checked_symmetric_eig(M);
  const double top = std::max(1.0, std::abs(eig.values(eig.values.size() - 1)));
  Eigen::VectorXd roots(eig.values.size());
  for (int i = 0; i < eig.values.size(); ++i) {
    const double v = eig.values(i);
    if (v < -1e-8 * top)
      throw std::runtime_error("matrix is not positive semidefinite");
    roots(i) = std::sqrt(std::max(0.0, v));
  }
  return eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
}

// Window of step operators G_1..G_T with the products
//   psi(k, j) = (I - mu G_{k}) ... (I - mu G_{j+1})
// in 1-based step terms; indices here are 0-based offsets into the window, so
// psi(k, j) multiplies factors j..k-1 and psi(j, j) = I.
class TransitionProbe {
 public:
  TransitionProbe(std::vector<Eigen::MatrixXd> gs, double mu)
      : gs_(std::move(gs)), mu_(mu) {
    if (gs_.empty()) throw std::invalid_argument("transition window is empty");
    dim_ = static_cast<int>(gs_.front().rows());
    for (const auto& g : gs_)
      if (g.rows() != dim_ || g.cols() != dim_)
        throw std::invalid_argument("window operators must share one dimension");
  }

  int length() const { return static_cast<int>(gs_.size()); }
  int dim() const { return dim_; }
  double mu() const { return mu_; }

  Eigen::MatrixXd factor(int p) const {
    return Eigen::MatrixXd::Identity(dim_, dim_) - mu_ * gs_.at(static_cast<std::size_t>(p));
  }

  const Eigen::MatrixXd& gradient_operator(int p) const {
    return gs_.at(static_cast<std::size_t>(p));
  }

  // Left product over factors j..k-1.
  Eigen::MatrixXd psi(int k, int j) const {
    if (j < 0 || k < j || k > length())
      throw std::invalid_argument("transition product needs 0 <= j <= k <= window length");
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(dim_, dim_);
    for (int t = j; t < k; ++t) p = factor(t) * p;
    return p;
  }

  // Symmetric PSD root with B(j)^2 = mu G_j.
  Eigen::MatrixXd B(int j) const {
    return psd_sqrt(mu_ * gs_.at(static_cast<std::size_t>(j)));
  }

 private:
  std::vector<Eigen::MatrixXd> gs_;
  double mu_;
  int dim_ = 0;
};

inline TransitionProbe make_transition_probe(
    const std::vector<StackedOperators>& ops, const AlgorithmParams& params,
    int dim_cap = kStackedDimCap) {
  if (ops.empty()) throw std::invalid_argument("operator window is empty");
  std::vector<Eigen::MatrixXd> gs;
  gs.reserve(ops.size());
  for (const auto& op : ops) {
    if (op.n * op.m > dim_cap)
      throw std::invalid_argument("operator window exceeds the dense cap");
    gs.push_back(op.G);
  }
  return TransitionProbe(std::move(gs), params.mu);
}

// One transition product Psi(k, j) over a window of stacked operators.
inline Eigen::MatrixXd transition_product(const std::vector<StackedOperators>& ops,
                                          const AlgorithmParams& params, int j,
                                          int k) {
  return make_transition_probe(ops, params).psi(k, j);
}

// Energy sum sum_{j<k} |psi(k, j+1) B_j|^2; bounded by the window dimension
// whenever mu (1 + 4 nu) <= 1.
inline double transition_energy_sum(const TransitionProbe& probe, int k) {
  if (k < 0 || k > probe.length())
    throw std::invalid_argument("energy sum window exceeds the probe");
  double sum = 0.0;
  Eigen::MatrixXd tail = Eigen::MatrixXd::Identity(probe.dim(), probe.dim());
  for (int j = k - 1; j >= 0; --j) {
    // tail holds psi(k, j+1) on entry.
    const double norm = spectral_norm(tail * probe.B(j));
    sum += norm * norm;
    if (j > 0) tail = (tail * probe.factor(j)).eval();
  }
  return sum;
}

struct MinEigenBoundResult {
  double lhs = 0.0;            // lambda_min of the summed step operators
  double rhs = 0.0;            // sigma * lambda_min of the summed gradient Grams
  double sigma = 0.0;
  double min_mix_weight = 0.0; // smallest entry of the Q-step averaging matrix
  double gram_lambda_min = 0.0;
};

// Window lower bound: the summed step operators dominate the summed per-sensor
// gradient Grams by the explicit factor
//   sigma = l2^2 a nu / (2 n + l2^2 a nu n)
// with a the minimum entry of the Q-round averaging matrix (positive once Q
// reaches the diameter) and l2 the Fiedler eigenvalue.
inline MinEigenBoundResult windowed_min_eigenvalue_bound(
    const std::vector<StackedOperators>& ops, const LaplacianSpectrum& spectrum,
    const WeightMatrix& w, const AlgorithmParams& params) {
  if (ops.empty()) throw std::invalid_argument("operator window is empty");
  const int n = ops.front().n;
  const int m = ops.front().m;
  if (w.topology.n != n)
    throw std::invalid_argument("operator window does not match the graph");

  Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(n, n);
  for (int q = 0; q < params.Q; ++q) mix = (mix * w.a).eval();
  const double a = mix.minCoeff();
  if (n > 1 && a <= 0.0)
    throw std::runtime_error(
        "the Q-round averaging matrix has a non-positive entry (" +
        std::to_string(a) + "); Q below the diameter or graph disconnected");

  const double l2sq = spectrum.l2 * spectrum.l2;
  const double numer = l2sq * a * params.nu;
  const double sigma = n == 1 ? 0.0 : numer / (2.0 * n + numer * n);

  Eigen::MatrixXd g_sum = Eigen::MatrixXd::Zero(n * m, n * m);
  Eigen::MatrixXd gram_sum = Eigen::MatrixXd::Zero(m, m);
  for (const auto& op : ops) {
    if (op.n != n || op.m != m)
      throw std::invalid_argument("window operators must share dimensions");
    g_sum += op.G;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd phi = op.Phi.block(i * m, i, m, 1);
      gram_sum += phi * phi.transpose() / op.r(i);
    }
  }
  MinEigenBoundResult res;
  res.sigma = sigma;
  res.min_mix_weight = a;
  res.lhs = checked_symmetric_eig(0.5 * (g_sum + g_sum.transpose())).values(0);
  res.gram_lambda_min =
      checked_symmetric_eig(0.5 * (gram_sum + gram_sum.transpose())).values(0);
  res.rhs = sigma * res.gram_lambda_min;
  return res;
}

struct ContractionReport {
  int steps = 0;
  double min_det_margin = 0.0;  // min over k of det(I - mu G_k) - base^(mn)
  double max_psi_norm = 0.0;    // max over j <= k of |psi(k, j)|
  bool det_ok = false;
  bool norm_ok = false;
};

// Determinant and norm contraction checks over a window. The determinant of
// the gradient block I - A_k factors exactly as prod_i (1 - |phi_i|^2 / r_i),
// which serves as the independent base for the comparison.
inline ContractionReport contraction_checks(const std::vector<StackedOperators>& ops,
                                            const AlgorithmParams& params) {
  if (!strict_step_condition(params))
    throw std::invalid_argument("contraction checks need mu*(1+4*nu) < 1");
  const auto probe = make_transition_probe(ops, params);
  const int mn = probe.dim();
  ContractionReport rep;
  rep.steps = probe.length();
  rep.min_det_margin = std::numeric_limits<double>::infinity();

  for (int t = 0; t < rep.steps; ++t) {
    const auto& op = ops[static_cast<std::size_t>(t)];
    const double det_lhs =
        (Eigen::MatrixXd::Identity(mn, mn) - params.mu * op.G).determinant();
    double base = 1.0;
    for (int i = 0; i < op.n; ++i) {
      const Eigen::VectorXd phi = op.Phi.block(i * op.m, i, op.m, 1);
      base *= 1.0 - phi.squaredNorm() / op.r(i);
    }
    const double det_rhs = std::pow(base, mn);
    rep.min_det_margin = std::min(rep.min_det_margin, det_lhs - det_rhs);
  }

  // All products psi(k, j): grow each starting point forward one factor at a
  // time so the whole triangle costs O(steps^2) small multiplies. psi(j, j)
  // is the identity, norm exactly 1.
  rep.max_psi_norm = 1.0;
  for (int j = 0; j < rep.steps; ++j) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(mn, mn);
    for (int k = j; k < rep.steps; ++k) {
      p = (probe.factor(k) * p).eval();
      rep.max_psi_norm = std::max(rep.max_psi_norm, spectral_norm(p));
    }
  }
  rep.det_ok = rep.min_det_margin >= -1e-12;
  rep.norm_ok = rep.max_psi_norm <= 1.0 + 1e-12;
  return rep;
}

struct NoiseTrace {
  std::vector<double> s_norm;    // |S_k|
  std::vector<double> tail_osc;  // max_{k' >= k} |S_{k'} - S_k|
};

// Partial sums S_k = sum_{j<=k} Phi_j R_j^{-1} eps_j and their tail
// oscillation; a settling tail is the empirical signature of the noise series
// converging.
inline NoiseTrace noise_accumulation_trace(const TrajectoryRecord& rec) {
  if (rec.steps.empty()) throw std::invalid_argument("trajectory is empty");
  const int n = rec.n, m = rec.m;
  const std::size_t T = rec.steps.size();
  std::vector<Eigen::VectorXd> partial;
  partial.reserve(T);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n * m);
  for (const auto& step : rec.steps) {
    for (int i = 0; i < n; ++i)
      s.segment(i * m, m) += step.phi[static_cast<std::size_t>(i)] *
                             (step.eps[static_cast<std::size_t>(i)] /
                              step.r[static_cast<std::size_t>(i)]);
    partial.push_back(s);
  }
  NoiseTrace trace;
  trace.s_norm.resize(T);
  trace.tail_osc.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) trace.s_norm[t] = partial[t].norm();
  for (std::size_t t = 0; t < T; ++t) {
    double worst = 0.0;
    for (std::size_t u = t; u < T; ++u)
      worst = std::max(worst, (partial[u] - partial[t]).norm());
    trace.tail_osc[t] = worst;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Excitation diagnostics.

struct ExcitationRow {
  int k = 0;
  double lambda_max = 0.0;  // of (n/m) I + network Gram
  double lambda_min = 0.0;
  double ratio = 0.0;
  double log_r_norm = 0.0;           // log max_i r_i
  double bound = 0.0;                // N_eff (log |R_k|)^(1/3)
  double condition_number = 0.0;     // max_i r_i / min_i r_i
  std::vector<double> sensor_ratio;  // per-sensor Gram ratios, same (n/m) offset
  std::vector<double> sensor_log_r;
};

struct BoundVerdict {
  bool pass = false;
  double fitted = std::numeric_limits<double>::infinity();
  int k0 = 0;  // first step where the normalizer reached e; 0 if never
  std::string note;
};

struct ExcitationVerdicts {
  BoundVerdict cooperative;               // fitted: network N
  std::vector<BoundVerdict> sensor_pe;    // fitted: per-sensor c1
  std::vector<BoundVerdict> sensor_weak;  // fitted: per-sensor N-tilde
  double max_step_energy_ratio = 1.0;     // max over i,k of r_k / r_{k-1}
};

struct ExcitationReport {
  int n = 0;
  int m = 0;
  int steps = 0;
  int stride = 1;
  std::optional<double> n_user;
  std::vector<ExcitationRow> rows;
  ExcitationVerdicts verdicts;
};

namespace detail {

// Empirical verdict for one bound family. The quotient series q_k =
// ratio_k / bound_k is examined over sampled steps at or after the step k0
// where the normalizer first reached e. Singular-Gram rows (infinite
// quotients) are startup transients and are excluded from the stabilization
// test; the verdict needs at least 6 finite samples, a finite final sample,
// and max tail quotient (last quarter) within 1.5x the max head quotient.
// The fitted constant is the max finite quotient, i.e. the smallest constant
// making the bound hold on every regular sampled step.
inline BoundVerdict judge_bound_family(const std::vector<std::pair<int, double>>& q,
                                       int k0) {
  BoundVerdict v;
  v.k0 = k0;
  if (k0 == 0) {
    v.pass = false;
    v.fitted = std::numeric_limits<double>::infinity();
    v.note = "normalizer never reached e; energies did not grow";
    return v;
  }
  std::vector<double> window;
  for (const auto& [k, quot] : q) {
    if (k < k0) continue;
    if (std::isfinite(quot)) window.push_back(quot);
  }
  v.fitted = window.empty() ? std::numeric_limits<double>::infinity()
                            : *std::max_element(window.begin(), window.end());
  if (window.size() < 6) {
    v.pass = false;
    v.note = "fewer than 6 finite samples in the window";
    return v;
  }
  if (q.empty() || !std::isfinite(q.back().second) || q.back().first < k0) {
    v.pass = false;
    v.note = "final sample is singular";
    return v;
  }
  const std::size_t tail_len = (window.size() + 3) / 4;
  const std::size_t head_len = window.size() - tail_len;
  double head = 0.0, tail = 0.0;
  for (std::size_t t = 0; t < head_len; ++t) head = std::max(head, window[t]);
  for (std::size_t t = head_len; t < window.size(); ++t)
    tail = std::max(tail, window[t]);
  if (tail > 1.5 * head) {
    v.pass = false;
    v.note = "quotient still growing at the end of the run";
    return v;
  }
  v.pass = true;
  v.note = "stable";
  return v;
}

}  // namespace detail

// Eigenvalue-ratio diagnostics for the network-wide and per-sensor cumulative
// Gram matrices. Gram eigensolves happen every `stride` steps (and at the
// final step); energy thresholds are tracked exactly at every step.
inline ExcitationReport excitation_report(const TrajectoryRecord& rec,
                                          std::optional<double> n_user = std::nullopt,
                                          int stride = 10) {
  if (rec.steps.empty()) throw std::invalid_argument("trajectory is empty");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  const int n = rec.n, m = rec.m;
  const int T = static_cast<int>(rec.steps.size());
  const double inf = std::numeric_limits<double>::infinity();

  ExcitationReport rep;
  rep.n = n;
  rep.m = m;
  rep.steps = T;
  rep.stride = stride;
  rep.n_user = n_user;

  Eigen::MatrixXd net_gram = Eigen::MatrixXd::Zero(m, m);
  std::vector<Eigen::MatrixXd> sensor_gram(static_cast<std::size_t>(n),
                                           Eigen::MatrixXd::Zero(m, m));
  int k0_net = 0;
  std::vector<int> k0_sensor(static_cast<std::size_t>(n), 0);
  double max_step_ratio = 1.0;
  std::vector<double> prev_r(static_cast<std::size_t>(n), 1.0);

  for (int k = 1; k <= T; ++k) {
    const auto& step = rec.steps[static_cast<std::size_t>(k - 1)];
    double r_max = 0.0, r_min = inf;
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const auto& phi = step.phi[idx];
      net_gram += phi * phi.transpose();
      sensor_gram[idx] += phi * phi.transpose();
      const double ri = step.r[idx];
      r_max = std::max(r_max, ri);
      r_min = std::min(r_min, ri);
      max_step_ratio = std::max(max_step_ratio, ri / prev_r[idx]);
      prev_r[idx] = ri;
      if (k0_sensor[idx] == 0 && std::log(ri) >= 1.0) k0_sensor[idx] = k;
    }
    if (k0_net == 0 && std::log(r_max) >= 1.0) k0_net = k;

    if (k % stride != 0 && k != T) continue;

    ExcitationRow row;
    row.k = k;
    row.log_r_norm = std::log(r_max);
    row.condition_number = r_max / r_min;
    const auto net_eig = checked_symmetric_eig(net_gram);
    const double offset = static_cast<double>(n) / m;
    row.lambda_min = offset + std::max(0.0, net_eig.values(0));
    row.lambda_max = offset + std::max(0.0, net_eig.values(m - 1));
    row.ratio = row.lambda_max / row.lambda_min;
    row.sensor_ratio.resize(static_cast<std::size_t>(n));
    row.sensor_log_r.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const auto eig = checked_symmetric_eig(sensor_gram[idx]);
      // The same identity offset regularizes the per-sensor spectra: a
      // sensor excited in fewer than m directions keeps lambda_min pinned at
      // n/m while lambda_max grows, so its ratio diverges (finitely).
      const double top = offset + std::max(0.0, eig.values(m - 1));
      const double bottom = offset + std::max(0.0, eig.values(0));
      row.sensor_ratio[idx] = top / bottom;
      row.sensor_log_r[idx] = std::log(step.r[idx]);
    }
    rep.rows.push_back(std::move(row));
  }

  // Verdicts: quotient series per bound family.
  std::vector<std::pair<int, double>> q_net;
  for (const auto& row : rep.rows)
    if (row.k >= k0_net && k0_net > 0)
      q_net.emplace_back(row.k, row.ratio / std::cbrt(row.log_r_norm));
  rep.verdicts.cooperative = detail::judge_bound_family(q_net, k0_net);
  rep.verdicts.max_step_energy_ratio = max_step_ratio;

  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    std::vector<std::pair<int, double>> q_pe, q_weak;
    for (const auto& row : rep.rows) {
      if (k0_sensor[idx] == 0 || row.k < k0_sensor[idx]) continue;
      q_pe.emplace_back(row.k, row.sensor_ratio[idx]);
      q_weak.emplace_back(row.k,
                          row.sensor_ratio[idx] / std::cbrt(row.sensor_log_r[idx]));
    }
    rep.verdicts.sensor_pe.push_back(detail::judge_bound_family(q_pe, k0_sensor[idx]));
    rep.verdicts.sensor_weak.push_back(
        detail::judge_bound_family(q_weak, k0_sensor[idx]));
  }

  // Bound column with the user-supplied or fitted network constant.
  const double n_eff = n_user ? *n_user : rep.verdicts.cooperative.fitted;
  for (auto& row : rep.rows)
    row.bound = n_eff * std::cbrt(std::max(0.0, row.log_r_norm));
  return rep;
}

inline void write_excitation_csv(std::ostream& out, const ExcitationReport& rep) {
  out << "k,lambda_max,lambda_min,ratio,bound,log_R_norm,condition_number";
  for (int i = 1; i <= rep.n; ++i) out << ",sensor_ratio_" << i;
  for (int i = 1; i <= rep.n; ++i) out << ",sensor_log_r_" << i;
  out << "\n";
  for (const auto& row : rep.rows) {
    out << row.k << ',' << detail::full_precision(row.lambda_max) << ','
        << detail::full_precision(row.lambda_min) << ','
        << detail::full_precision(row.ratio) << ','
        << detail::full_precision(row.bound) << ','
        << detail::full_precision(row.log_r_norm) << ','
        << detail::full_precision(row.condition_number);
    for (double v : row.sensor_ratio) out << ',' << detail::full_precision(v);
    for (double v : row.sensor_log_r) out << ',' << detail::full_precision(v);
    out << "\n";
  }
}

inline std::string excitation_summary(const ExcitationReport& rep) {
  std::ostringstream out;
  const auto& v = rep.verdicts;
  out << "excitation diagnostics: n=" << rep.n << " m=" << rep.m
      << " steps=" << rep.steps << " sampled=" << rep.rows.size()
      << " stride=" << rep.stride << "\n";
  out << "network cooperative bound: " << (v.cooperative.pass ? "PASS" : "FAIL")
      << " (fitted N = " << v.cooperative.fitted << ", K0 = " << v.cooperative.k0
      << "; " << v.cooperative.note << ")\n";
  int pe_pass = 0, weak_pass = 0;
  for (const auto& s : v.sensor_pe) pe_pass += s.pass ? 1 : 0;
  for (const auto& s : v.sensor_weak) weak_pass += s.pass ? 1 : 0;
  out << "per-sensor PE bound: " << pe_pass << "/" << rep.n << " PASS\n";
  out << "per-sensor log-energy bound: " << weak_pass << "/" << rep.n << " PASS\n";
  for (int i = 0; i < rep.n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out << "  sensor " << (i + 1) << ": PE "
        << (v.sensor_pe[idx].pass ? "PASS" : "FAIL")
        << " (fitted c1 = " << v.sensor_pe[idx].fitted << "), log-energy "
        << (v.sensor_weak[idx].pass ? "PASS" : "FAIL")
        << " (fitted N~ = " << v.sensor_weak[idx].fitted << ")\n";
  }
  if (!rep.rows.empty()) {
    const auto& last = rep.rows.back();
    out << "final step " << last.k << ": ratio = " << last.ratio
        << ", log |R| = " << last.log_r_norm
        << ", condition number = " << last.condition_number << "\n";
  }
  out << "max single-step energy ratio: " << v.max_step_energy_ratio << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Convergence-rate fit.

struct RateFit {
  double d1_hat = 0.0;
  double residual_rms = 0.0;
  int window_first_k = 0;
  int window_last_k = 0;
  int points = 0;
  // (k, log |R_k|, error) for every step, fitted or not.
  std::vector<std::array<double, 3>> series;
};

// Least squares of log err on log log |R| over the post-burn-in window: the
// window is the steps with log |R_k| >= 1, with the first `burn_in` fraction
// dropped. Returns the negated slope, so a decaying error gives d1_hat > 0.
inline RateFit rate_fit_series(const std::vector<std::array<double, 3>>& series,
                               double burn_in = 0.5) {
  if (!(burn_in >= 0.0 && burn_in < 1.0))
    throw std::invalid_argument("burn-in fraction must lie in [0, 1)");
  RateFit fit;
  fit.series = series;
  std::vector<std::size_t> window;
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (series[t][1] < 1.0) continue;
    if (!std::isfinite(series[t][2]))
      throw std::runtime_error("non-finite error inside the fit window");
    window.push_back(t);
  }
  const std::size_t skip = static_cast<std::size_t>(burn_in * window.size());
  std::vector<std::size_t> kept(window.begin() + static_cast<std::ptrdiff_t>(skip),
                                window.end());
  std::vector<std::size_t> usable;
  for (auto t : kept)
    if (series[t][2] > 0.0) usable.push_back(t);
  if (usable.empty() && !kept.empty()) {
    // Exactly-zero error everywhere in the window: converged run, flat fit.
    fit.points = static_cast<int>(kept.size());
    fit.window_first_k = static_cast<int>(series[kept.front()][0]);
    fit.window_last_k = static_cast<int>(series[kept.back()][0]);
    return fit;
  }
  if (usable.size() < 4)
    throw std::invalid_argument("rate fit needs at least 4 usable points");
  fit.points = static_cast<int>(usable.size());
  fit.window_first_k = static_cast<int>(series[usable.front()][0]);
  fit.window_last_k = static_cast<int>(series[usable.back()][0]);

  double sx = 0.0, sy = 0.0;
  for (auto t : usable) {
    sx += std::log(series[t][1]);
    sy += std::log(series[t][2]);
  }
  const double mx = sx / static_cast<double>(usable.size());
  const double my = sy / static_cast<double>(usable.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto t : usable) {
    const double dx = std::log(series[t][1]) - mx;
    const double dy = std::log(series[t][2]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.d1_hat = -slope;
  double rss = 0.0;
  for (auto t : usable) {
    const double dx = std::log(series[t][1]) - mx;
    const double resid = (std::log(series[t][2]) - my) - slope * dx;
    rss += resid * resid;
  }
  fit.residual_rms = std::sqrt(rss / static_cast<double>(usable.size()));
  return fit;
}

// Rate fit on a recorded run; the error series is the max-node distance to
// the true parameter.
inline RateFit rate_fit(const TrajectoryRecord& rec, const Eigen::VectorXd& theta,
                        double burn_in = 0.5) {
  if (rec.steps.empty()) throw std::invalid_argument("trajectory is empty");
  if (theta.size() != rec.m)
    throw std::invalid_argument("true parameter dimension does not match");
  std::vector<std::array<double, 3>> series;
  series.reserve(rec.steps.size());
  for (std::size_t t = 0; t < rec.steps.size(); ++t) {
    const auto& step = rec.steps[t];
    double r_max = 0.0, err = 0.0;
    for (int i = 0; i < rec.n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      r_max = std::max(r_max, step.r[idx]);
      err = std::max(err, (step.theta_hat[idx] - theta).norm());
    }
    series.push_back({static_cast<double>(t + 1), std::log(r_max), err});
  }
  return rate_fit_series(series);
}

}  // namespace dsg
