#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "estimator.hpp"
#include "graph.hpp"
#include "rng.hpp"
#include "signals.hpp"
#include "trajectory.hpp"

// Experiment orchestration: flat key=value configs, paired-draw Monte Carlo
// over the cooperative and non-cooperative estimators, MSE aggregation, and
// CSV/SVG/summary emission. Determinism contract: (config, seed) fixes every
// output byte, independent of the worker count.

namespace dsg {

struct ExperimentConfig {
  int n = 0;
  int m = 0;
  Eigen::VectorXd theta;
  std::optional<Eigen::VectorXd> theta0;  // initial estimate at every sensor
  std::string topology = "complete";      // preset name or file:<path>
  AlgorithmParams params{0.25, 0.7, 0};   // Q <= 0 resolves to the diameter
  std::string regressor = "example1";     // example1 | iid_gaussian | constant
  double growth = 1.2;
  double xi_std = 0.3;
  double regressor_std = 1.0;
  double constant_value = 1.0;
  NoiseModel noise{NoiseModel::Kind::gaussian_iid, 1.2, 0.0};
  int steps = 600;
  int runs = 1;
  std::uint64_t seed = 1;
  int record_trajectories = 0;
  int sample_stride = 10;
  int workers = 1;
  std::string outputs = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "' needs a number, got '" +
                                v + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size() || x < std::numeric_limits<int>::min() ||
        x > std::numeric_limits<int>::max())
      throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "' needs an integer, got '" +
                                v + "'");
  }
}

inline std::uint64_t parse_uint64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    // stoull accepts a leading minus and wraps; treat that as an error here
    if (pos != v.size() || v.find('-') != std::string::npos)
      throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "' needs an unsigned integer, got '" + v + "'");
  }
}

inline Eigen::VectorXd parse_vector(const std::string& key, const std::string& v) {
  std::vector<double> vals;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty())
      throw std::invalid_argument("config key '" + key + "' has an empty entry");
    vals.push_back(parse_double(key, cell));
  }
  if (vals.empty())
    throw std::invalid_argument("config key '" + key + "' needs at least one value");
  Eigen::VectorXd out(static_cast<int>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) out(static_cast<int>(i)) = vals[i];
  return out;
}

}  // namespace detail

// Flat key = value lines; '#' starts a comment; keys are validated against
// the known set and may not repeat.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::map<std::string, bool> seen;
  bool have_n = false, have_m = false, have_theta = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " is not 'key = value': '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " has an empty key or value");
    if (seen[key])
      throw std::invalid_argument("config key '" + key + "' appears twice");
    seen[key] = true;

    if (key == "n") {
      cfg.n = detail::parse_int(key, value);
      have_n = true;
    } else if (key == "m") {
      cfg.m = detail::parse_int(key, value);
      have_m = true;
    } else if (key == "theta") {
      cfg.theta = detail::parse_vector(key, value);
      have_theta = true;
    } else if (key == "theta0") {
      cfg.theta0 = detail::parse_vector(key, value);
    } else if (key == "topology") {
      cfg.topology = value;
    } else if (key == "mu") {
      cfg.params.mu = detail::parse_double(key, value);
    } else if (key == "nu") {
      cfg.params.nu = detail::parse_double(key, value);
    } else if (key == "Q") {
      cfg.params.Q = detail::parse_int(key, value);
    } else if (key == "regressor") {
      cfg.regressor = value;
    } else if (key == "growth") {
      cfg.growth = detail::parse_double(key, value);
    } else if (key == "xi_std") {
      cfg.xi_std = detail::parse_double(key, value);
    } else if (key == "regressor_std") {
      cfg.regressor_std = detail::parse_double(key, value);
    } else if (key == "constant_value") {
      cfg.constant_value = detail::parse_double(key, value);
    } else if (key == "noise_kind") {
      if (value == "zero")
        cfg.noise.kind = NoiseModel::Kind::zero;
      else if (value == "gaussian_iid")
        cfg.noise.kind = NoiseModel::Kind::gaussian_iid;
      else
        throw std::invalid_argument("noise_kind must be zero or gaussian_iid, got '" +
                                    value + "'");
    } else if (key == "noise_std") {
      cfg.noise.std = detail::parse_double(key, value);
    } else if (key == "noise_exponent") {
      cfg.noise.epsilon_exponent = detail::parse_double(key, value);
    } else if (key == "steps") {
      cfg.steps = detail::parse_int(key, value);
    } else if (key == "runs") {
      cfg.runs = detail::parse_int(key, value);
    } else if (key == "seed") {
      cfg.seed = detail::parse_uint64(key, value);
    } else if (key == "record_trajectories") {
      cfg.record_trajectories = detail::parse_int(key, value);
    } else if (key == "sample_stride") {
      cfg.sample_stride = detail::parse_int(key, value);
    } else if (key == "workers") {
      cfg.workers = detail::parse_int(key, value);
    } else if (key == "outputs") {
      cfg.outputs = value;
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  if (!have_n || !have_m || !have_theta)
    throw std::invalid_argument("config must set n, m, and theta");
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  return parse_config(in);
}

// Fully resolved experiment: validated config plus the graph objects.
struct ResolvedExperiment {
  ExperimentConfig cfg;  // with Q resolved
  Topology topo;
  WeightMatrix w;
  LaplacianSpectrum spectrum;
};

// Closed-form pre-check that the growth-model state stays far below the
// component guard over the whole horizon (40-sigma input envelope).
inline void validate_growth_horizon(const ExperimentConfig& cfg) {
  if (cfg.regressor != "example1" || cfg.xi_std == 0.0) return;
  const double g = cfg.growth;
  double log_bound;
  if (g > 1.0)
    log_bound = cfg.steps * std::log(g) + std::log(40.0 * cfg.xi_std * g / (g - 1.0));
  else
    log_bound = std::log(40.0 * cfg.xi_std * std::max(1, cfg.steps));
  if (log_bound >= std::log(kComponentCap))
    throw std::invalid_argument(
        "steps = " + std::to_string(cfg.steps) + " with growth = " +
        std::to_string(g) +
        " overflows the component guard; shorten the horizon");
}

inline ResolvedExperiment resolve_config(ExperimentConfig cfg) {
  if (cfg.n < 1 || cfg.m < 1)
    throw std::invalid_argument("config needs n >= 1 and m >= 1");
  if (cfg.theta.size() != cfg.m)
    throw std::invalid_argument("theta must have m = " + std::to_string(cfg.m) +
                                " entries, got " + std::to_string(cfg.theta.size()));
  if (!cfg.theta.allFinite())
    throw std::invalid_argument("theta entries must be finite");
  if (cfg.theta0 && (cfg.theta0->size() != cfg.m || !cfg.theta0->allFinite()))
    throw std::invalid_argument("theta0 must be a finite m-vector");
  if (cfg.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (cfg.runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (cfg.record_trajectories < 0 || cfg.record_trajectories > cfg.runs)
    throw std::invalid_argument("record_trajectories must lie in [0, runs]");
  if (cfg.sample_stride < 1) throw std::invalid_argument("sample_stride must be >= 1");
  if (cfg.workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (cfg.outputs.empty()) throw std::invalid_argument("outputs must be nonempty");
  validate_noise_model(cfg.noise);

  if (cfg.regressor == "example1") {
    example1_model(cfg.n, cfg.m, cfg.growth, cfg.xi_std);  // validates its inputs
    validate_growth_horizon(cfg);
  } else if (cfg.regressor == "iid_gaussian") {
    if (!std::isfinite(cfg.regressor_std) || cfg.regressor_std < 0.0)
      throw std::invalid_argument("regressor_std must be finite and nonnegative");
  } else if (cfg.regressor == "constant") {
    if (!std::isfinite(cfg.constant_value))
      throw std::invalid_argument("constant_value must be finite");
  } else {
    throw std::invalid_argument(
        "regressor must be example1, iid_gaussian, or constant; got '" +
        cfg.regressor + "'");
  }

  Topology topo;
  if (cfg.topology == "complete") {
    topo = complete_topology(cfg.n);
  } else if (cfg.topology == "path") {
    topo = path_topology(cfg.n);
  } else if (cfg.topology == "ring") {
    topo = ring_topology(cfg.n);
  } else if (cfg.topology == "star") {
    topo = star_topology(cfg.n);
  } else if (cfg.topology == "ring28plus") {
    if (cfg.n != 28)
      throw std::invalid_argument("topology ring28plus needs n = 28, got n = " +
                                  std::to_string(cfg.n));
    topo = ring28plus_topology();
  } else if (cfg.topology.rfind("file:", 0) == 0) {
    topo = load_edge_list(cfg.topology.substr(5));
    if (topo.n != cfg.n)
      throw std::invalid_argument("edge list defines " + std::to_string(topo.n) +
                                  " nodes but the config says n = " +
                                  std::to_string(cfg.n));
  } else {
    throw std::invalid_argument(
        "topology must be complete, path, ring, star, ring28plus, or file:<path>; "
        "got '" +
        cfg.topology + "'");
  }

  const auto conn = connectivity_and_diameter(topo);
  if (!conn.connected)
    throw std::invalid_argument("the topology must be connected");
  if (cfg.params.Q <= 0) cfg.params.Q = std::max(1, conn.diameter.value_or(1));
  validate_params(cfg.params);

  ResolvedExperiment rx{std::move(cfg), std::move(topo), {}, {}};
  rx.w = build_metropolis(rx.topo);
  rx.spectrum = laplacian_spectrum(rx.w);
  return rx;
}

// Resolved config serialized back to the flat format; parseable by
// parse_config, so every output directory documents how to re-run it.
inline std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto vec = [](const Eigen::VectorXd& v) {
    std::string s;
    for (int i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += detail::full_precision(v(i));
    }
    return s;
  };
  out << "n = " << cfg.n << "\n";
  out << "m = " << cfg.m << "\n";
  out << "theta = " << vec(cfg.theta) << "\n";
  if (cfg.theta0) out << "theta0 = " << vec(*cfg.theta0) << "\n";
  out << "topology = " << cfg.topology << "\n";
  out << "mu = " << detail::full_precision(cfg.params.mu) << "\n";
  out << "nu = " << detail::full_precision(cfg.params.nu) << "\n";
  out << "Q = " << cfg.params.Q << "\n";
  out << "regressor = " << cfg.regressor << "\n";
  if (cfg.regressor == "example1") {
    out << "growth = " << detail::full_precision(cfg.growth) << "\n";
    out << "xi_std = " << detail::full_precision(cfg.xi_std) << "\n";
  } else if (cfg.regressor == "iid_gaussian") {
    out << "regressor_std = " << detail::full_precision(cfg.regressor_std) << "\n";
  } else if (cfg.regressor == "constant") {
    out << "constant_value = " << detail::full_precision(cfg.constant_value) << "\n";
  }
  out << "noise_kind = "
      << (cfg.noise.kind == NoiseModel::Kind::zero ? "zero" : "gaussian_iid") << "\n";
  out << "noise_std = " << detail::full_precision(cfg.noise.std) << "\n";
  out << "noise_exponent = " << detail::full_precision(cfg.noise.epsilon_exponent)
      << "\n";
  out << "steps = " << cfg.steps << "\n";
  out << "runs = " << cfg.runs << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "record_trajectories = " << cfg.record_trajectories << "\n";
  out << "sample_stride = " << cfg.sample_stride << "\n";
  out << "workers = " << cfg.workers << "\n";
  out << "outputs = " << cfg.outputs << "\n";
  return out.str();
}

struct MseSeries {
  int n = 0;
  int steps = 0;
  std::vector<std::vector<double>> coop;   // [step][sensor]
  std::vector<std::vector<double>> nonco;  // [step][sensor]
  std::vector<double> max_coop, min_coop, max_nonco, min_nonco;
};

struct ExperimentResult {
  MseSeries series;
  std::vector<TrajectoryRecord> coop_trajectories;
  std::vector<TrajectoryRecord> nonco_trajectories;
  std::uint64_t regressor_draws_per_run = 0;
  std::uint64_t noise_draws_per_run = 0;
  std::uint64_t total_regressor_draws = 0;
  std::uint64_t total_noise_draws = 0;
  std::string config_echo;
};

namespace detail {

inline std::unique_ptr<RegressorStream> make_regressor_stream(
    const ExperimentConfig& cfg, std::uint64_t run_master) {
  if (cfg.regressor == "example1")
    return std::make_unique<StateSpaceStream>(
        example1_model(cfg.n, cfg.m, cfg.growth, cfg.xi_std), run_master);
  if (cfg.regressor == "iid_gaussian")
    return std::make_unique<IidGaussianStream>(cfg.n, cfg.m, cfg.regressor_std,
                                               run_master);
  return std::make_unique<ConstantStream>(
      cfg.n, Eigen::VectorXd::Constant(cfg.m, cfg.constant_value).eval());
}

struct RunOutput {
  std::vector<std::vector<double>> coop_sq;   // [step][sensor] squared errors
  std::vector<std::vector<double>> nonco_sq;
  std::uint64_t regressor_draws = 0;
  std::uint64_t noise_draws = 0;
  std::optional<TrajectoryRecord> coop_rec;
  std::optional<TrajectoryRecord> nonco_rec;
};

// One Monte Carlo run: both algorithm arms consume literally the same
// regressor and noise arrays step by step (the paired-draw discipline).
inline RunOutput run_single(const ResolvedExperiment& rx, int run_index,
                            const std::string& echo, bool record) {
  const auto& cfg = rx.cfg;
  const int n = cfg.n, m = cfg.m;
  const std::uint64_t rmaster = run_seed(cfg.seed, static_cast<std::uint64_t>(run_index));

  std::vector<Eigen::VectorXd> theta0(
      static_cast<std::size_t>(n),
      cfg.theta0 ? *cfg.theta0 : Eigen::VectorXd::Zero(m).eval());

  auto stream = make_regressor_stream(cfg, rmaster);
  NetworkRunner runner(rx.w, cfg.params);
  auto st = init_network(n, m, theta0);
  std::vector<Eigen::VectorXd> solo = theta0;
  std::vector<double> solo_r(static_cast<std::size_t>(n), 1.0);

  RunOutput out;
  out.coop_sq.assign(static_cast<std::size_t>(cfg.steps),
                     std::vector<double>(static_cast<std::size_t>(n), 0.0));
  out.nonco_sq = out.coop_sq;
  if (record) {
    TrajectoryRecord base;
    base.n = n;
    base.m = m;
    base.seed = rmaster;
    base.config_echo = echo;
    out.coop_rec = base;
    out.nonco_rec = base;
    out.coop_rec->steps.reserve(static_cast<std::size_t>(cfg.steps));
    out.nonco_rec->steps.reserve(static_cast<std::size_t>(cfg.steps));
  }

  for (int k = 1; k <= cfg.steps; ++k) {
    std::vector<Eigen::VectorXd> phi;
    std::vector<double> eps;
    try {
      phi = stream->step(k);
      eps = sample_noise(cfg.noise, rmaster, k, n);
    } catch (const std::exception& e) {
      throw std::runtime_error("run " + std::to_string(run_index + 1) + ", step " +
                               std::to_string(k) + ": " + e.what());
    }
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      y[idx] = phi[idx].dot(cfg.theta) + eps[idx];
    }

    runner.step(st, phi, y);
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      standard_sg_step(solo[idx], solo_r[idx], phi[idx], y[idx], cfg.params.mu);
    }

    const auto kk = static_cast<std::size_t>(k - 1);
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      out.coop_sq[kk][idx] = (st.theta_hat[idx] - cfg.theta).squaredNorm();
      out.nonco_sq[kk][idx] = (solo[idx] - cfg.theta).squaredNorm();
    }

    if (record) {
      TrajectoryStep cs;
      cs.phi = phi;
      cs.y = y;
      cs.eps = eps;
      cs.r = st.r;
      cs.x_q = st.x_q;
      cs.theta_hat = st.theta_hat;
      out.coop_rec->steps.push_back(cs);
      TrajectoryStep ns = cs;
      ns.r = solo_r;
      ns.x_q.assign(static_cast<std::size_t>(n), 0.0);  // no diffusion stage
      ns.theta_hat = solo;
      out.nonco_rec->steps.push_back(std::move(ns));
    }
  }
  out.regressor_draws = stream->draws();
  out.noise_draws =
      cfg.noise.kind == NoiseModel::Kind::zero || cfg.noise.std == 0.0
          ? 0
          : static_cast<std::uint64_t>(cfg.steps) * static_cast<std::uint64_t>(n);
  return out;
}

}  // namespace detail

// Paired-draw Monte Carlo. Runs are processed in fixed-size chunks; workers
// fill a chunk's slots in any order and the reduction walks slots in run
// order, so the aggregate is bitwise identical for every worker count.
inline ExperimentResult run_experiment(const ResolvedExperiment& rx) {
  const auto& cfg = rx.cfg;
  ExperimentResult res;
  res.config_echo = echo_config(cfg);
  res.series.n = cfg.n;
  res.series.steps = cfg.steps;
  res.series.coop.assign(static_cast<std::size_t>(cfg.steps),
                         std::vector<double>(static_cast<std::size_t>(cfg.n), 0.0));
  res.series.nonco = res.series.coop;

  constexpr int kChunk = 16;
  for (int chunk_start = 0; chunk_start < cfg.runs; chunk_start += kChunk) {
    const int chunk_len = std::min(kChunk, cfg.runs - chunk_start);
    std::vector<detail::RunOutput> slots(static_cast<std::size_t>(chunk_len));
    std::vector<std::string> errors(static_cast<std::size_t>(chunk_len));

    auto work = [&](int slot) {
      const int run_index = chunk_start + slot;
      const bool record = run_index < cfg.record_trajectories;
      try {
        slots[static_cast<std::size_t>(slot)] =
            detail::run_single(rx, run_index, res.config_echo, record);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(slot)] = e.what();
      }
    };

    const int threads = std::min(cfg.workers, chunk_len);
    if (threads <= 1) {
      for (int s = 0; s < chunk_len; ++s) work(s);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
          for (int s = next.fetch_add(1); s < chunk_len; s = next.fetch_add(1))
            work(s);
        });
      for (auto& th : pool) th.join();
    }

    for (int s = 0; s < chunk_len; ++s) {
      const auto slot = static_cast<std::size_t>(s);
      if (!errors[slot].empty()) throw std::runtime_error(errors[slot]);
      auto& out = slots[slot];
      for (int k = 0; k < cfg.steps; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        for (int i = 0; i < cfg.n; ++i) {
          const auto idx = static_cast<std::size_t>(i);
          res.series.coop[kk][idx] += out.coop_sq[kk][idx];
          res.series.nonco[kk][idx] += out.nonco_sq[kk][idx];
        }
      }
      if (s == 0 && chunk_start == 0) {
        res.regressor_draws_per_run = out.regressor_draws;
        res.noise_draws_per_run = out.noise_draws;
      }
      res.total_regressor_draws += out.regressor_draws;
      res.total_noise_draws += out.noise_draws;
      if (out.coop_rec) res.coop_trajectories.push_back(std::move(*out.coop_rec));
      if (out.nonco_rec) res.nonco_trajectories.push_back(std::move(*out.nonco_rec));
    }
  }

  res.series.max_coop.resize(static_cast<std::size_t>(cfg.steps));
  res.series.min_coop.resize(static_cast<std::size_t>(cfg.steps));
  res.series.max_nonco.resize(static_cast<std::size_t>(cfg.steps));
  res.series.min_nonco.resize(static_cast<std::size_t>(cfg.steps));
  for (int k = 0; k < cfg.steps; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    double cmax = 0.0, cmin = std::numeric_limits<double>::infinity();
    double nmax = 0.0, nmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      res.series.coop[kk][idx] /= cfg.runs;
      res.series.nonco[kk][idx] /= cfg.runs;
      cmax = std::max(cmax, res.series.coop[kk][idx]);
      cmin = std::min(cmin, res.series.coop[kk][idx]);
      nmax = std::max(nmax, res.series.nonco[kk][idx]);
      nmin = std::min(nmin, res.series.nonco[kk][idx]);
    }
    res.series.max_coop[kk] = cmax;
    res.series.min_coop[kk] = cmin;
    res.series.max_nonco[kk] = nmax;
    res.series.min_nonco[kk] = nmin;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Output emission.

inline std::string mse_csv(const MseSeries& s) {
  std::ostringstream out;
  out << "k";
  for (int i = 1; i <= s.n; ++i) out << ",mse_coop_" << i;
  for (int i = 1; i <= s.n; ++i) out << ",mse_nonco_" << i;
  out << ",max_coop,min_coop,max_nonco,min_nonco\n";
  for (int k = 0; k < s.steps; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    out << (k + 1);
    for (int i = 0; i < s.n; ++i)
      out << ',' << detail::full_precision(s.coop[kk][static_cast<std::size_t>(i)]);
    for (int i = 0; i < s.n; ++i)
      out << ',' << detail::full_precision(s.nonco[kk][static_cast<std::size_t>(i)]);
    out << ',' << detail::full_precision(s.max_coop[kk]) << ','
        << detail::full_precision(s.min_coop[kk]) << ','
        << detail::full_precision(s.max_nonco[kk]) << ','
        << detail::full_precision(s.min_nonco[kk]) << "\n";
  }
  return out.str();
}

// Static log-scale line plot of the four max/min MSE envelopes.
inline std::string svg_mse_plot(const MseSeries& s) {
  constexpr double W = 880, H = 540;
  constexpr double L = 80, R = 850, T = 60, B = 480;
  constexpr double kFloor = 1e-12;

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  const std::vector<const std::vector<double>*> curves = {
      &s.max_coop, &s.min_coop, &s.max_nonco, &s.min_nonco};
  for (const auto* c : curves)
    for (double v : *c) {
      const double cv = std::max(v, kFloor);
      lo = std::min(lo, cv);
      hi = std::max(hi, cv);
    }
  if (!(hi > 0.0)) hi = 1.0;
  double y0 = std::floor(std::log10(lo));
  double y1 = std::ceil(std::log10(hi));
  if (y1 - y0 < 1.0) y1 = y0 + 1.0;

  const double kmax = std::max(1, s.steps);
  auto xmap = [&](double k) { return L + (R - L) * (k - 1.0) / std::max(1.0, kmax - 1.0); };
  auto ymap = [&](double v) {
    const double lv = std::log10(std::max(v, kFloor));
    return B - (B - T) * (lv - y0) / (y1 - y0);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << (W / 2)
      << "\" y=\"28\" text-anchor=\"middle\" font-size=\"18\" "
         "font-family=\"sans-serif\">Max/min node MSE vs step</text>\n";

  // Axes.
  out << "<line x1=\"" << L << "\" y1=\"" << B << "\" x2=\"" << R << "\" y2=\"" << B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << B
      << "\" stroke=\"black\"/>\n";

  // X ticks: five marks from 1 to steps.
  for (int t = 0; t <= 4; ++t) {
    const double k = 1.0 + (kmax - 1.0) * t / 4.0;
    const double x = xmap(k);
    out << "<line x1=\"" << x << "\" y1=\"" << B << "\" x2=\"" << x << "\" y2=\""
        << (B + 6) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << (B + 22)
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
        << static_cast<long long>(std::llround(k)) << "</text>\n";
  }
  out << "<text x=\"" << ((L + R) / 2) << "\" y=\"" << (B + 45)
      << "\" text-anchor=\"middle\" font-size=\"14\" "
         "font-family=\"sans-serif\">step k</text>\n";

  // Y ticks: one per decade (or every other decade when crowded).
  const int decades = static_cast<int>(y1 - y0);
  const int step = decades > 12 ? 2 : 1;
  for (int d = 0; d <= decades; d += step) {
    const double v = std::pow(10.0, y0 + d);
    const double y = ymap(v);
    out << "<line x1=\"" << (L - 6) << "\" y1=\"" << y << "\" x2=\"" << L
        << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << (L - 10) << "\" y=\"" << (y + 4)
        << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">1e"
        << static_cast<int>(y0 + d) << "</text>\n";
  }
  out << "<text x=\"22\" y=\"" << ((T + B) / 2)
      << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 22 "
      << ((T + B) / 2) << ")\">MSE (log scale)</text>\n";

  const char* colors[4] = {"#1f77b4", "#2ca02c", "#d62728", "#ff7f0e"};
  const char* labels[4] = {"cooperative max-node", "cooperative min-node",
                           "non-cooperative max-node", "non-cooperative min-node"};
  for (std::size_t c = 0; c < curves.size(); ++c) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[c]
        << "\" stroke-width=\"1.5\" points=\"";
    for (int k = 0; k < s.steps; ++k) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", xmap(k + 1.0),
                    ymap((*curves[c])[static_cast<std::size_t>(k)]));
      out << buf;
    }
    out << "\"/>\n";
  }
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const double ly = T + 18.0 * static_cast<double>(c) + 8.0;
    out << "<line x1=\"" << (R - 230) << "\" y1=\"" << ly << "\" x2=\"" << (R - 205)
        << "\" y2=\"" << ly << "\" stroke=\"" << colors[c]
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << (R - 200) << "\" y=\"" << (ly + 4)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << labels[c]
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

// Writes mse.csv, summary.txt, mse.svg, the resolved config echo, retained
// trajectory CSVs, and (when a trajectory was retained) the excitation CSV.
inline void emit_outputs(const ExperimentResult& res, const ExperimentConfig& cfg,
                         const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir);

  detail::write_text_file(root / "mse.csv", mse_csv(res.series));
  detail::write_text_file(root / "mse.svg", svg_mse_plot(res.series));
  detail::write_text_file(root / "config_used.cfg", res.config_echo);

  std::ostringstream summary;
  const auto last = static_cast<std::size_t>(res.series.steps - 1);
  summary << "runs = " << cfg.runs << ", steps = " << cfg.steps << ", n = " << cfg.n
          << ", m = " << cfg.m << "\n";
  summary << "final max-node MSE (cooperative):     "
          << detail::full_precision(res.series.max_coop[last]) << "\n";
  summary << "final min-node MSE (cooperative):     "
          << detail::full_precision(res.series.min_coop[last]) << "\n";
  summary << "final max-node MSE (non-cooperative): "
          << detail::full_precision(res.series.max_nonco[last]) << "\n";
  summary << "final min-node MSE (non-cooperative): "
          << detail::full_precision(res.series.min_nonco[last]) << "\n";
  summary << "regressor draws per run = " << res.regressor_draws_per_run
          << ", noise draws per run = " << res.noise_draws_per_run
          << " (both arms share the same draws)\n";
  summary << "total regressor draws = " << res.total_regressor_draws
          << ", total noise draws = " << res.total_noise_draws << "\n";

  for (std::size_t t = 0; t < res.coop_trajectories.size(); ++t) {
    write_trajectory_csv(
        (root / ("trajectory_coop_" + std::to_string(t + 1) + ".csv")).string(),
        res.coop_trajectories[t]);
    write_trajectory_csv(
        (root / ("trajectory_nonco_" + std::to_string(t + 1) + ".csv")).string(),
        res.nonco_trajectories[t]);
  }

  if (!res.coop_trajectories.empty()) {
    const auto rep = excitation_report(res.coop_trajectories.front(), std::nullopt,
                                       cfg.sample_stride);
    std::ostringstream csv;
    write_excitation_csv(csv, rep);
    detail::write_text_file(root / "excitation.csv", csv.str());
    summary << "\n" << excitation_summary(rep);
    try {
      const auto fit = rate_fit(res.coop_trajectories.front(), cfg.theta);
      summary << "fitted error decay exponent (first retained run): "
              << fit.d1_hat << " over " << fit.points << " points\n";
    } catch (const std::exception& e) {
      summary << "rate fit unavailable: " << e.what() << "\n";
    }
  }

  detail::write_text_file(root / "summary.txt", summary.str());
}

}  // namespace dsg
