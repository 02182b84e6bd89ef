#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Sensor network topologies, Metropolis consensus weights, and the Laplacian
// spectrum of the induced weight matrix. Nodes are 1-based in all external
// formats and 0-based internally.

namespace dsg {

struct Topology {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // normalized (a < b), sorted, unique

  // Neighbor lists excluding the node itself.
  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& [a, b] : edges) {
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    return adj;
  }

  std::vector<int> degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(n), 0);
    for (const auto& [a, b] : edges) {
      ++deg[static_cast<std::size_t>(a)];
      ++deg[static_cast<std::size_t>(b)];
    }
    return deg;
  }
};

// Builds a topology from 0-based endpoint pairs; validates ranges, rejects
// self-loops, and normalizes away duplicates and orientation.
inline Topology make_topology(int n, std::vector<std::pair<int, int>> edges) {
  if (n < 1) throw std::invalid_argument("topology needs at least one node");
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw std::invalid_argument("edge endpoint out of range");
    if (a == b) throw std::invalid_argument("self-loops are not allowed");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return Topology{n, std::move(edges)};
}

// Edge-list text format: one "i j" pair per line, 1-based node ids, blank
// lines and '#' comments allowed. Node count is the largest id mentioned.
inline Topology parse_edge_list(std::istream& in) {
  std::vector<std::pair<int, int>> edges;
  int n = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream row(line);
    long long a = 0, b = 0;
    if (!(row >> a)) continue;  // blank or comment-only line
    if (!(row >> b))
      throw std::invalid_argument("edge list line " + std::to_string(lineno) +
                                  ": expected two node ids");
    std::string extra;
    if (row >> extra)
      throw std::invalid_argument("edge list line " + std::to_string(lineno) +
                                  ": trailing content '" + extra + "'");
    if (a < 1 || b < 1 || a > 1000000 || b > 1000000)
      throw std::invalid_argument("edge list line " + std::to_string(lineno) +
                                  ": node ids must be positive");
    if (a == b)
      throw std::invalid_argument("edge list line " + std::to_string(lineno) +
                                  ": self-loop on node " + std::to_string(a));
    n = std::max(n, static_cast<int>(std::max(a, b)));
    edges.emplace_back(static_cast<int>(a) - 1, static_cast<int>(b) - 1);
  }
  if (n == 0) throw std::invalid_argument("edge list contains no edges");
  return make_topology(n, std::move(edges));
}

inline Topology load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open edge list: " + path);
  return parse_edge_list(in);
}

inline Topology complete_topology(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  return make_topology(n, std::move(edges));
}

inline Topology path_topology(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a + 1 < n; ++a) edges.emplace_back(a, a + 1);
  return make_topology(n, std::move(edges));
}

inline Topology ring_topology(int n) {
  if (n < 3) return path_topology(n);
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a) edges.emplace_back(a, (a + 1) % n);
  return make_topology(n, std::move(edges));
}

inline Topology star_topology(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int a = 1; a < n; ++a) edges.emplace_back(0, a);
  return make_topology(n, std::move(edges));
}

// 28-node ring with long-range chords (i, i+7 mod 28). Diameter 5.
inline Topology ring28plus_topology() {
  constexpr int n = 28;
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a) {
    edges.emplace_back(a, (a + 1) % n);
    edges.emplace_back(a, (a + 7) % n);
  }
  return make_topology(n, std::move(edges));
}

struct Connectivity {
  bool connected = false;
  std::optional<int> diameter;  // set only when connected; 0 for n == 1
};

// BFS from every node; diameter is the largest finite eccentricity.
inline Connectivity connectivity_and_diameter(const Topology& topo) {
  const auto adj = topo.adjacency();
  const int n = topo.n;
  int diameter = 0;
  std::vector<int> dist(static_cast<std::size_t>(n));
  std::vector<int> frontier;
  for (int src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[static_cast<std::size_t>(src)] = 0;
    frontier.assign(1, src);
    int reached = 1;
    while (!frontier.empty()) {
      std::vector<int> next;
      for (int u : frontier) {
        for (int v : adj[static_cast<std::size_t>(u)]) {
          if (dist[static_cast<std::size_t>(v)] < 0) {
            dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
            next.push_back(v);
            ++reached;
          }
        }
      }
      frontier = std::move(next);
    }
    if (reached < n) return Connectivity{false, std::nullopt};
    diameter = std::max(diameter, *std::max_element(dist.begin(), dist.end()));
  }
  return Connectivity{true, diameter};
}

struct WeightMatrix {
  Eigen::MatrixXd a;
  Topology topology;
  std::vector<int> degenerate_rows;  // rows whose diagonal is exactly 0
};

inline std::vector<int> find_zero_diagonal_rows(const Eigen::MatrixXd& a) {
  std::vector<int> rows;
  for (int i = 0; i < a.rows(); ++i)
    if (a(i, i) == 0.0) rows.push_back(i);
  return rows;
}

// Structural invariants every weight matrix must satisfy: square of the right
// size, exactly symmetric, nonnegative, rows summing to 1 within 1e-12, and
// positive off-diagonal entries exactly on the topology's edges.
inline void validate_weight_matrix(const WeightMatrix& w) {
  const int n = w.topology.n;
  if (w.a.rows() != n || w.a.cols() != n)
    throw std::invalid_argument("weight matrix size does not match topology");
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const double v = w.a(i, j);
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument("weight matrix entries must be finite and nonnegative");
      if (w.a(i, j) != w.a(j, i))
        throw std::invalid_argument("weight matrix must be exactly symmetric");
      row_sum += v;
    }
    if (std::abs(row_sum - 1.0) > 1e-12)
      throw std::invalid_argument("weight matrix row " + std::to_string(i + 1) +
                                  " does not sum to 1");
  }
  Eigen::MatrixXd pattern = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [a, b] : w.topology.edges) pattern(a, b) = pattern(b, a) = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && ((w.a(i, j) > 0.0) != (pattern(i, j) > 0.0)))
        throw std::invalid_argument("weight matrix sparsity does not match topology edges");
}

// Metropolis weights: a_ij = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal
// absorbs the remaining row mass. The diagonal is strictly positive for any
// simple graph, but a zero diagonal is flagged rather than rejected.
inline WeightMatrix build_metropolis(const Topology& topo) {
  const int n = topo.n;
  const auto deg = topo.degrees();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [u, v] : topo.edges) {
    const double w = 1.0 / (1.0 + std::max(deg[static_cast<std::size_t>(u)],
                                           deg[static_cast<std::size_t>(v)]));
    a(u, v) = w;
    a(v, u) = w;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += a(i, j);
    a(i, i) = 1.0 - off;
  }
  WeightMatrix w{std::move(a), topo, {}};
  w.degenerate_rows = find_zero_diagonal_rows(w.a);
  validate_weight_matrix(w);
  return w;
}

// Wraps an externally supplied weight matrix after validating it.
inline WeightMatrix make_weight_matrix(Eigen::MatrixXd a, Topology topo) {
  WeightMatrix w{std::move(a), std::move(topo), {}};
  w.degenerate_rows = find_zero_diagonal_rows(w.a);
  validate_weight_matrix(w);
  return w;
}

struct LaplacianSpectrum {
  Eigen::VectorXd eigenvalues;  // of L = I - A, ascending
  double l2 = 0.0;              // second-smallest eigenvalue; 0 when n == 1
  std::optional<int> diameter;
};

// Spectrum of L = I - A. For a valid weight matrix the eigenvalues lie in
// [0, 2], the smallest is 0, and the second-smallest is positive exactly when
// the graph is connected.
inline LaplacianSpectrum laplacian_spectrum(const WeightMatrix& w,
                                            const Topology& topo) {
  const int n = topo.n;
  const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) - w.a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("Laplacian eigensolver failed to converge");
  Eigen::VectorXd ev = solver.eigenvalues();
  if (ev(0) < -1e-12 || ev(n - 1) > 2.0 + 1e-12)
    throw std::runtime_error("Laplacian spectrum escaped [0, 2]");
  if (std::abs(ev(0)) > 1e-12)
    throw std::runtime_error("Laplacian smallest eigenvalue is not 0");
  const auto conn = connectivity_and_diameter(topo);
  if (conn.connected && n >= 2 && ev(1) <= 1e-12)
    throw std::runtime_error("connected graph produced a near-zero Fiedler value");
  LaplacianSpectrum spec;
  spec.eigenvalues = std::move(ev);
  spec.l2 = n >= 2 ? spec.eigenvalues(1) : 0.0;
  spec.diameter = conn.diameter;
  return spec;
}

inline LaplacianSpectrum laplacian_spectrum(const WeightMatrix& w) {
  return laplacian_spectrum(w, w.topology);
}

}  // namespace dsg
