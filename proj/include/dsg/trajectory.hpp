#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Full per-step run log: everything needed to replay a run through the
// stacked-form oracle or the diagnostics. CSV serialization uses one row per
// (step, sensor), a mandatory header, and full-precision decimal values.
// Comment lines (leading '#') before the header carry the seed and a config
// echo; readers skip and reassemble them.

namespace dsg {

struct TrajectoryStep {
  std::vector<Eigen::VectorXd> phi;
  std::vector<double> y;
  std::vector<double> eps;
  std::vector<double> r;
  std::vector<double> x_q;
  std::vector<Eigen::VectorXd> theta_hat;  // estimates after this step
};

struct TrajectoryRecord {
  int n = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::string config_echo;  // resolved config, newline-separated
  std::vector<TrajectoryStep> steps;
};

namespace detail {

inline std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& rec) {
  if (rec.n < 1 || rec.m < 1)
    throw std::invalid_argument("trajectory must carry n >= 1, m >= 1");
  out << "# seed: " << rec.seed << "\n";
  out << "# n: " << rec.n << "\n";
  out << "# m: " << rec.m << "\n";
  if (!rec.config_echo.empty()) {
    std::istringstream echo(rec.config_echo);
    std::string line;
    while (std::getline(echo, line)) out << "# config: " << line << "\n";
  }
  out << "k,i";
  for (int c = 1; c <= rec.m; ++c) out << ",phi_" << c;
  out << ",y,eps,r,xQ";
  for (int c = 1; c <= rec.m; ++c) out << ",theta_hat_" << c;
  out << "\n";
  for (std::size_t t = 0; t < rec.steps.size(); ++t) {
    const auto& s = rec.steps[t];
    for (int i = 0; i < rec.n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      out << (t + 1) << ',' << (i + 1);
      for (int c = 0; c < rec.m; ++c)
        out << ',' << detail::full_precision(s.phi[idx](c));
      out << ',' << detail::full_precision(s.y[idx]);
      out << ',' << detail::full_precision(s.eps[idx]);
      out << ',' << detail::full_precision(s.r[idx]);
      out << ',' << detail::full_precision(s.x_q[idx]);
      for (int c = 0; c < rec.m; ++c)
        out << ',' << detail::full_precision(s.theta_hat[idx](c));
      out << "\n";
    }
  }
}

inline void write_trajectory_csv(const std::string& path,
                                 const TrajectoryRecord& rec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  write_trajectory_csv(out, rec);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TrajectoryRecord read_trajectory_csv(std::istream& in) {
  TrajectoryRecord rec;
  std::string line;
  // Leading comment block: metadata and config echo.
  std::string header;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] != '#') {
      header = line;
      break;
    }
    const std::string body = line.substr(1);
    auto starts = [&](const std::string& key) {
      return body.rfind(key, 1) != std::string::npos && body.find(key) <= 1;
    };
    if (starts("seed:"))
      rec.seed = std::stoull(body.substr(body.find(':') + 1));
    else if (starts("n:"))
      rec.n = std::stoi(body.substr(body.find(':') + 1));
    else if (starts("m:"))
      rec.m = std::stoi(body.substr(body.find(':') + 1));
    else if (starts("config:")) {
      std::string cfg = body.substr(body.find(':') + 1);
      if (!cfg.empty() && cfg[0] == ' ') cfg.erase(0, 1);
      rec.config_echo += cfg;
      rec.config_echo += '\n';
    }
  }
  if (header.empty())
    throw std::invalid_argument("trajectory file has no header row");

  // Infer m from the header; validate the fixed schema.
  std::vector<std::string> cols;
  {
    std::istringstream hs(header);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  int m = 0;
  while (2 + m < static_cast<int>(cols.size()) &&
         cols[static_cast<std::size_t>(2 + m)] == "phi_" + std::to_string(m + 1))
    ++m;
  const int expected_cols = 2 + m + 4 + m;
  if (m < 1 || static_cast<int>(cols.size()) != expected_cols ||
      cols[0] != "k" || cols[1] != "i" ||
      cols[static_cast<std::size_t>(2 + m)] != "y" ||
      cols[static_cast<std::size_t>(3 + m)] != "eps" ||
      cols[static_cast<std::size_t>(4 + m)] != "r" ||
      cols[static_cast<std::size_t>(5 + m)] != "xQ" ||
      cols[static_cast<std::size_t>(6 + m)] != "theta_hat_1")
    throw std::invalid_argument("trajectory header does not match the schema");
  if (rec.m != 0 && rec.m != m)
    throw std::invalid_argument("trajectory metadata m contradicts the header");
  rec.m = m;

  int current_k = 0;
  std::vector<double> row(static_cast<std::size_t>(expected_cols));
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    for (int c = 0; c < expected_cols; ++c) {
      if (!std::getline(ls, cell, ','))
        throw std::invalid_argument("trajectory row has too few columns");
      try {
        row[static_cast<std::size_t>(c)] = std::stod(cell);
      } catch (const std::exception&) {
        throw std::invalid_argument("trajectory cell is not numeric: " + cell);
      }
    }
    if (std::getline(ls, cell, ','))
      throw std::invalid_argument("trajectory row has too many columns");

    const int k = static_cast<int>(row[0]);
    const int i = static_cast<int>(row[1]);
    if (k == current_k + 1 && i == 1) {
      rec.steps.emplace_back();
      ++current_k;
    } else if (k != current_k) {
      throw std::invalid_argument("trajectory steps must be contiguous from 1");
    }
    auto& s = rec.steps.back();
    if (i != static_cast<int>(s.y.size()) + 1)
      throw std::invalid_argument("trajectory sensors must be contiguous from 1");
    Eigen::VectorXd phi(m), th(m);
    for (int c = 0; c < m; ++c) phi(c) = row[static_cast<std::size_t>(2 + c)];
    for (int c = 0; c < m; ++c) th(c) = row[static_cast<std::size_t>(6 + m + c)];
    s.phi.push_back(std::move(phi));
    s.y.push_back(row[static_cast<std::size_t>(2 + m)]);
    s.eps.push_back(row[static_cast<std::size_t>(3 + m)]);
    s.r.push_back(row[static_cast<std::size_t>(4 + m)]);
    s.x_q.push_back(row[static_cast<std::size_t>(5 + m)]);
    s.theta_hat.push_back(std::move(th));
  }
  if (rec.steps.empty())
    throw std::invalid_argument("trajectory contains no data rows");
  const int n = static_cast<int>(rec.steps.front().y.size());
  for (const auto& s : rec.steps)
    if (static_cast<int>(s.y.size()) != n)
      throw std::invalid_argument("trajectory rows must cover all sensors per step");
  if (rec.n != 0 && rec.n != n)
    throw std::invalid_argument("trajectory metadata n contradicts the rows");
  rec.n = n;
  return rec;
}

inline TrajectoryRecord read_trajectory_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open trajectory: " + path);
  return read_trajectory_csv(in);
}

// Regressor table for replaying a recorded run, step-major.
inline std::vector<std::vector<Eigen::VectorXd>> replay_regressors(
    const TrajectoryRecord& rec) {
  std::vector<std::vector<Eigen::VectorXd>> out;
  out.reserve(rec.steps.size());
  for (const auto& s : rec.steps) out.push_back(s.phi);
  return out;
}

}  // namespace dsg
