#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"

// Regressor and observation-noise generation. Streams are deterministic in
// (master seed, sensor, step): regenerating a stream replays it exactly.
// Steps are 1-based; no regressor exists for step 0.

namespace dsg {

inline constexpr double kComponentCap = 1e150;

struct NoiseModel {
  enum class Kind { zero, gaussian_iid };
  Kind kind = Kind::gaussian_iid;
  double std = 1.0;
  // Conditional second-moment growth exponent carried as metadata for
  // diagnostics; must lie in [0, 1).
  double epsilon_exponent = 0.0;
};

inline void validate_noise_model(const NoiseModel& nm) {
  if (!(nm.std >= 0.0) || !std::isfinite(nm.std))
    throw std::invalid_argument("noise std must be finite and nonnegative");
  if (!(nm.epsilon_exponent >= 0.0 && nm.epsilon_exponent < 1.0))
    throw std::invalid_argument("noise exponent must lie in [0, 1)");
}

// Observation noise for all n sensors at step k. Pure: depends only on the
// arguments, so paired experiment arms can regenerate identical noise.
inline std::vector<double> sample_noise(const NoiseModel& nm,
                                        std::uint64_t master_seed, int k,
                                        int n) {
  if (k < 1) throw std::invalid_argument("noise step index must be >= 1");
  if (n < 1) throw std::invalid_argument("noise needs at least one sensor");
  validate_noise_model(nm);
  std::vector<double> eps(static_cast<std::size_t>(n), 0.0);
  if (nm.kind == NoiseModel::Kind::zero || nm.std == 0.0) return eps;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t s = substream_seed(
        master_seed, static_cast<std::uint64_t>(i + 1), StreamKind::observation_noise);
    eps[static_cast<std::size_t>(i)] =
        nm.std * gaussian_draw(s, static_cast<std::uint64_t>(k - 1));
  }
  return eps;
}

struct SensorStateSpace {
  Eigen::MatrixXd A;  // m x m state transition
  Eigen::VectorXd B;  // m, input injection
  Eigen::MatrixXd C;  // m x m, read-out
};

struct StateSpaceRegressorModel {
  int n = 0;
  int m = 0;
  double xi_std = 0.0;
  std::vector<SensorStateSpace> sensors;
};

// Benchmark model: sensor i drives only coordinate j = ((i-1) mod m) + 1 with
// A = growth * I, B = e_j, C = e_j e_j^T; each sensor observes one direction.
inline StateSpaceRegressorModel example1_model(int n, int m, double growth,
                                               double xi_std) {
  if (n < 1 || m < 1) throw std::invalid_argument("model needs n >= 1, m >= 1");
  if (!std::isfinite(growth) || growth < 0.0)
    throw std::invalid_argument("growth factor must be finite and nonnegative");
  if (!std::isfinite(xi_std) || xi_std < 0.0)
    throw std::invalid_argument("xi std must be finite and nonnegative");
  StateSpaceRegressorModel model{n, m, xi_std, {}};
  model.sensors.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int j = i % m;  // 0-based driven coordinate
    SensorStateSpace s;
    s.A = growth * Eigen::MatrixXd::Identity(m, m);
    s.B = Eigen::VectorXd::Zero(m);
    s.B(j) = 1.0;
    s.C = Eigen::MatrixXd::Zero(m, m);
    s.C(j, j) = 1.0;
    model.sensors.push_back(std::move(s));
  }
  return model;
}

// One regressor vector per sensor per step. step(k) must be called with
// k = 1, 2, 3, ... without gaps; components beyond +-1e150 abort the run with
// an error naming the sensor and step.
class RegressorStream {
 public:
  virtual ~RegressorStream() = default;

  int sensor_count() const { return n_; }
  int dim() const { return m_; }
  std::uint64_t draws() const { return draws_; }

  std::vector<Eigen::VectorXd> step(int k) {
    if (k != next_k_)
      throw std::invalid_argument("regressor stream expected step " +
                                  std::to_string(next_k_) + ", got " +
                                  std::to_string(k));
    auto phi = generate(k);
    for (int i = 0; i < n_; ++i) {
      const auto& v = phi[static_cast<std::size_t>(i)];
      if (v.size() != m_)
        throw std::runtime_error("regressor stream produced wrong dimension");
      check_components(v, i + 1, k);
    }
    ++next_k_;
    return phi;
  }

 protected:
  RegressorStream(int n, int m) : n_(n), m_(m) {
    if (n < 1 || m < 1)
      throw std::invalid_argument("regressor stream needs n >= 1, m >= 1");
  }

  virtual std::vector<Eigen::VectorXd> generate(int k) = 0;

  void check_components(const Eigen::VectorXd& v, int sensor_1based, int k) const {
    for (int c = 0; c < v.size(); ++c) {
      const double x = v(c);
      if (!std::isfinite(x) || std::abs(x) > kComponentCap)
        throw std::runtime_error(
            "regressor overflow: |component| exceeds 1e150 at sensor " +
            std::to_string(sensor_1based) + ", step " + std::to_string(k) +
            "; shorten the horizon or reduce the growth factor");
    }
  }

  void count_draws(std::uint64_t d) { draws_ += d; }

 private:
  int n_;
  int m_;
  int next_k_ = 1;
  std::uint64_t draws_ = 0;
};

// phi_k = C u_k with u_k = A u_{k-1} + B xi_k, u_0 = 0. The xi source is
// injectable for tests; the default draws N(0, xi_std^2) from the sensor's
// state-input substream.
class StateSpaceStream final : public RegressorStream {
 public:
  using XiSource = std::function<double(int sensor_1based, int k)>;

  StateSpaceStream(StateSpaceRegressorModel model, std::uint64_t master_seed)
      : RegressorStream(model.n, model.m),
        model_(std::move(model)),
        master_(master_seed) {
    init_states();
    xi_ = [this](int sensor, int k) {
      count_draws(1);
      const std::uint64_t s = substream_seed(
          master_, static_cast<std::uint64_t>(sensor), StreamKind::state_input);
      return model_.xi_std * gaussian_draw(s, static_cast<std::uint64_t>(k - 1));
    };
  }

  StateSpaceStream(StateSpaceRegressorModel model, XiSource xi)
      : RegressorStream(model.n, model.m), model_(std::move(model)), xi_(std::move(xi)) {
    init_states();
  }

 private:
  void init_states() {
    if (static_cast<int>(model_.sensors.size()) != model_.n)
      throw std::invalid_argument("state-space model does not cover all sensors");
    for (const auto& s : model_.sensors)
      if (s.A.rows() != model_.m || s.A.cols() != model_.m ||
          s.B.size() != model_.m || s.C.rows() != model_.m || s.C.cols() != model_.m)
        throw std::invalid_argument("state-space sensor blocks must be m x m / m");
    states_.assign(static_cast<std::size_t>(model_.n),
                   Eigen::VectorXd::Zero(model_.m));
  }

  std::vector<Eigen::VectorXd> generate(int k) override {
    std::vector<Eigen::VectorXd> phi;
    phi.reserve(states_.size());
    for (int i = 0; i < model_.n; ++i) {
      const auto& s = model_.sensors[static_cast<std::size_t>(i)];
      auto& u = states_[static_cast<std::size_t>(i)];
      u = (s.A * u + s.B * xi_(i + 1, k)).eval();
      check_components(u, i + 1, k);  // hidden state obeys the same cap
      phi.push_back(s.C * u);
    }
    return phi;
  }

  StateSpaceRegressorModel model_;
  std::uint64_t master_ = 0;
  XiSource xi_;
  std::vector<Eigen::VectorXd> states_;
};

// Components iid N(0, std^2), independent across sensors and steps.
class IidGaussianStream final : public RegressorStream {
 public:
  IidGaussianStream(int n, int m, double std, std::uint64_t master_seed)
      : RegressorStream(n, m), std_(std), master_(master_seed) {
    if (!std::isfinite(std) || std < 0.0)
      throw std::invalid_argument("regressor std must be finite and nonnegative");
  }

 private:
  std::vector<Eigen::VectorXd> generate(int k) override {
    std::vector<Eigen::VectorXd> phi;
    phi.reserve(static_cast<std::size_t>(sensor_count()));
    for (int i = 0; i < sensor_count(); ++i) {
      const std::uint64_t s = substream_seed(
          master_, static_cast<std::uint64_t>(i + 1), StreamKind::regressor);
      Eigen::VectorXd v(dim());
      for (int c = 0; c < dim(); ++c)
        v(c) = std_ * gaussian_draw(
                          s, static_cast<std::uint64_t>(k - 1) *
                                     static_cast<std::uint64_t>(dim()) +
                                 static_cast<std::uint64_t>(c));
      count_draws(static_cast<std::uint64_t>(dim()));
      phi.push_back(std::move(v));
    }
    return phi;
  }

  double std_;
  std::uint64_t master_;
};

// The same fixed vector for every sensor and step.
class ConstantStream final : public RegressorStream {
 public:
  ConstantStream(int n, Eigen::VectorXd value)
      : RegressorStream(n, static_cast<int>(value.size())), value_(std::move(value)) {}

 private:
  std::vector<Eigen::VectorXd> generate(int) override {
    return std::vector<Eigen::VectorXd>(static_cast<std::size_t>(sensor_count()),
                                        value_);
  }

  Eigen::VectorXd value_;
};

// Replays previously recorded regressors, step-major.
class ReplayStream final : public RegressorStream {
 public:
  ReplayStream(int n, int m, std::vector<std::vector<Eigen::VectorXd>> steps)
      : RegressorStream(n, m), steps_(std::move(steps)) {
    for (const auto& s : steps_)
      if (static_cast<int>(s.size()) != n)
        throw std::invalid_argument("replay data does not cover all sensors");
  }

  int length() const { return static_cast<int>(steps_.size()); }

 private:
  std::vector<Eigen::VectorXd> generate(int k) override {
    if (k > length())
      throw std::invalid_argument("replay stream exhausted at step " +
                                  std::to_string(k));
    return steps_[static_cast<std::size_t>(k - 1)];
  }

  std::vector<std::vector<Eigen::VectorXd>> steps_;
};

}  // namespace dsg
