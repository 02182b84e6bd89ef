#include <catch2/catch_amalgamated.hpp>

#include <dsg/estimator.hpp>
#include <dsg/harness.hpp>
#include <dsg/signals.hpp>
#include <dsg/trajectory.hpp>

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

dsg::ExperimentConfig tiny_config() {
  dsg::ExperimentConfig cfg;
  cfg.n = 3;
  cfg.m = 2;
  cfg.theta = Eigen::Vector2d(1.0, -2.0);
  cfg.topology = "ring";
  cfg.params = {0.25, 0.5, 0};
  cfg.regressor = "iid_gaussian";
  cfg.regressor_std = 1.0;
  cfg.noise = {dsg::NoiseModel::Kind::gaussian_iid, 0.4, 0.0};
  cfg.steps = 20;
  cfg.runs = 6;
  cfg.seed = 99;
  cfg.record_trajectories = 2;
  cfg.workers = 1;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++count;
  return count;
}

}  // namespace

TEST_CASE("config parser reads the flat key=value format", "[harness]") {
  std::istringstream in(
      "# an experiment\n"
      "n = 4\n"
      "m = 3\n"
      "theta = 1.5, -2, 0.25   # trailing comment\n"
      "topology = star\n"
      "mu = 0.1\n"
      "nu = 0.3\n"
      "Q = 2\n"
      "regressor = constant\n"
      "constant_value = 2.5\n"
      "noise_kind = zero\n"
      "steps = 7\n"
      "runs = 2\n"
      "seed = 123456789012345\n"
      "outputs = somewhere\n");
  const auto cfg = dsg::parse_config(in);
  CHECK(cfg.n == 4);
  CHECK(cfg.m == 3);
  REQUIRE(cfg.theta.size() == 3);
  CHECK(cfg.theta(0) == 1.5);
  CHECK(cfg.theta(1) == -2.0);
  CHECK(cfg.theta(2) == 0.25);
  CHECK(cfg.topology == "star");
  CHECK(cfg.params.mu == 0.1);
  CHECK(cfg.params.nu == 0.3);
  CHECK(cfg.params.Q == 2);
  CHECK(cfg.regressor == "constant");
  CHECK(cfg.constant_value == 2.5);
  CHECK(cfg.noise.kind == dsg::NoiseModel::Kind::zero);
  CHECK(cfg.steps == 7);
  CHECK(cfg.runs == 2);
  CHECK(cfg.seed == 123456789012345ULL);
  CHECK(cfg.outputs == "somewhere");
  CHECK_FALSE(cfg.theta0.has_value());
}

TEST_CASE("config parser rejects malformed input", "[harness]") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return dsg::parse_config(in);
  };
  const std::string base = "n = 2\nm = 1\ntheta = 1\n";
  CHECK_THROWS_AS(parse("n = 2\nm = 1\n"), std::invalid_argument);  // theta missing
  CHECK_THROWS_AS(parse(base + "n = 3\n"), std::invalid_argument);  // duplicate
  CHECK_THROWS_AS(parse(base + "mystery = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(base + "mu = fast\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(base + "steps = 1.5\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(base + "noise_kind = pink\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(base + "just a line\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(base + "theta0 = 1,,2\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(base + "seed = -4\n"), std::invalid_argument);
}

TEST_CASE("config resolution validates and fills derived fields", "[harness]") {
  SECTION("Q defaults to the topology diameter") {
    auto cfg = tiny_config();
    cfg.n = 6;
    cfg.topology = "ring";
    cfg.params.Q = 0;
    const auto rx = dsg::resolve_config(cfg);
    CHECK(rx.cfg.params.Q == 3);  // six-ring diameter
    CHECK(rx.topo.n == 6);
    CHECK(rx.spectrum.l2 > 0.0);
  }
  SECTION("explicit Q is kept") {
    auto cfg = tiny_config();
    cfg.params.Q = 5;
    CHECK(dsg::resolve_config(cfg).cfg.params.Q == 5);
  }
  SECTION("dimension and range errors") {
    auto cfg = tiny_config();
    cfg.theta = Eigen::Vector3d(1, 2, 3);  // m is 2
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.theta0 = Eigen::VectorXd::Ones(5);
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.steps = 0;
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.record_trajectories = cfg.runs + 1;
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.regressor = "sinusoid";
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.topology = "torus";
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.topology = "ring28plus";  // n is 3 here
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.params = {0.5, 1.0, 1};  // mu*(1+4nu) = 2.5
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);
  }
  SECTION("growth horizon guard") {
    auto cfg = tiny_config();
    cfg.n = 4;
    cfg.m = 2;
    cfg.theta = Eigen::Vector2d(1, 2);
    cfg.regressor = "example1";
    cfg.growth = 1.2;
    cfg.xi_std = 0.3;
    cfg.steps = 600;
    CHECK_NOTHROW(dsg::resolve_config(cfg));
    cfg.steps = 2000;  // 1.2^2000 is far beyond the component cap
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);
  }
  SECTION("edge-list topology must agree with n") {
    const auto dir = std::filesystem::temp_directory_path() / "dsg_harness_edges";
    std::filesystem::create_directories(dir);
    const auto path = dir / "tri.edges";
    std::ofstream(path) << "1 2\n2 3\n1 3\n";
    auto cfg = tiny_config();
    cfg.topology = "file:" + path.string();
    const auto rx = dsg::resolve_config(cfg);  // n = 3 matches
    CHECK(rx.topo.edges.size() == 3);
    cfg.n = 4;
    cfg.theta = Eigen::Vector2d(1, -2);
    CHECK_THROWS_AS(dsg::resolve_config(cfg), std::invalid_argument);
  }
}

TEST_CASE("config echo round-trips through the parser", "[harness]") {
  auto cfg = tiny_config();
  cfg.theta0 = Eigen::Vector2d(0.5, 0.25);
  const auto rx = dsg::resolve_config(cfg);
  const std::string echo = dsg::echo_config(rx.cfg);
  std::istringstream in(echo);
  const auto reparsed = dsg::parse_config(in);
  const auto rx2 = dsg::resolve_config(reparsed);
  CHECK(dsg::echo_config(rx2.cfg) == echo);  // fixpoint: echo -> parse -> echo
  CHECK(rx2.cfg.params.Q == rx.cfg.params.Q);
  CHECK(rx2.cfg.seed == rx.cfg.seed);
}

TEST_CASE("experiment output is deterministic and worker-invariant", "[harness]") {
  const auto cfg = tiny_config();
  const auto rx = dsg::resolve_config(cfg);
  const auto res1 = dsg::run_experiment(rx);
  const auto res2 = dsg::run_experiment(rx);

  auto cfg_mt = cfg;
  cfg_mt.workers = 4;
  const auto res3 = dsg::run_experiment(dsg::resolve_config(cfg_mt));

  const std::string csv1 = dsg::mse_csv(res1.series);
  CHECK(csv1 == dsg::mse_csv(res2.series));
  CHECK(csv1 == dsg::mse_csv(res3.series));
  CHECK(res1.total_regressor_draws == res3.total_regressor_draws);

  // A different seed must change the numbers.
  auto cfg_seed = cfg;
  cfg_seed.seed = cfg.seed + 1;
  const auto res4 = dsg::run_experiment(dsg::resolve_config(cfg_seed));
  CHECK(csv1 != dsg::mse_csv(res4.series));
}

TEST_CASE("paired arms share draw counts and retained trajectories", "[harness]") {
  const auto cfg = tiny_config();
  const auto res = dsg::run_experiment(dsg::resolve_config(cfg));

  // iid_gaussian: n*m scalars per step; gaussian noise: n scalars per step.
  const std::uint64_t reg_expected = 20ULL * 3ULL * 2ULL;
  CHECK(res.regressor_draws_per_run == reg_expected);
  CHECK(res.noise_draws_per_run == 20ULL * 3ULL);
  CHECK(res.total_regressor_draws == reg_expected * 6ULL);
  CHECK(res.total_noise_draws == 20ULL * 3ULL * 6ULL);

  REQUIRE(res.coop_trajectories.size() == 2);
  REQUIRE(res.nonco_trajectories.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& coop = res.coop_trajectories[t];
    const auto& solo = res.nonco_trajectories[t];
    REQUIRE(coop.steps.size() == 20);
    REQUIRE(solo.steps.size() == 20);
    CHECK(coop.seed == solo.seed);
    for (std::size_t k = 0; k < coop.steps.size(); ++k) {
      const auto& cs = coop.steps[k];
      const auto& ns = solo.steps[k];
      for (int i = 0; i < 3; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        CHECK(cs.phi[idx] == ns.phi[idx]);  // literally the same draws
        CHECK(cs.eps[idx] == ns.eps[idx]);
        CHECK(cs.y[idx] == ns.y[idx]);
        CHECK(ns.x_q[idx] == 0.0);  // no diffusion stage in the solo arm
      }
    }
  }
  // Distinct runs use distinct streams.
  CHECK(res.coop_trajectories[0].steps[0].phi[0] !=
        res.coop_trajectories[1].steps[0].phi[0]);
}

TEST_CASE("single run MSE equals the squared error of that run", "[harness]") {
  auto cfg = tiny_config();
  cfg.runs = 1;
  cfg.record_trajectories = 1;
  const auto rx = dsg::resolve_config(cfg);
  const auto res = dsg::run_experiment(rx);
  REQUIRE(res.coop_trajectories.size() == 1);
  const auto& rec = res.coop_trajectories.front();
  for (int k = 0; k < cfg.steps; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    for (int i = 0; i < cfg.n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const double sq = (rec.steps[kk].theta_hat[idx] - cfg.theta).squaredNorm();
      CHECK(res.series.coop[kk][idx] == sq);
    }
  }
}

TEST_CASE("exact start plus zero noise stays at zero error", "[harness]") {
  auto cfg = tiny_config();
  cfg.theta0 = cfg.theta;
  cfg.noise = {dsg::NoiseModel::Kind::zero, 0.0, 0.0};
  cfg.runs = 2;
  cfg.record_trajectories = 0;
  const auto res = dsg::run_experiment(dsg::resolve_config(cfg));
  CHECK(res.noise_draws_per_run == 0);
  for (int k = 0; k < cfg.steps; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    CHECK(res.series.max_coop[kk] == 0.0);
    CHECK(res.series.max_nonco[kk] == 0.0);
  }
}

TEST_CASE("mse series respects its invariants", "[harness]") {
  const auto res = dsg::run_experiment(dsg::resolve_config(tiny_config()));
  const auto& s = res.series;
  REQUIRE(s.steps == 20);
  REQUIRE(s.coop.size() == 20);
  REQUIRE(s.max_coop.size() == 20);
  for (int k = 0; k < s.steps; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    CHECK(s.max_coop[kk] >= s.min_coop[kk]);
    CHECK(s.max_nonco[kk] >= s.min_nonco[kk]);
    CHECK(s.min_coop[kk] >= 0.0);
    CHECK(s.min_nonco[kk] >= 0.0);
    for (int i = 0; i < s.n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      CHECK(s.coop[kk][idx] <= s.max_coop[kk]);
      CHECK(s.coop[kk][idx] >= s.min_coop[kk]);
    }
  }
}

TEST_CASE("emitted outputs have the documented shape", "[harness]") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "dsg_harness_out";
  fs::remove_all(dir);

  auto cfg = tiny_config();
  cfg.record_trajectories = 1;
  const auto rx = dsg::resolve_config(cfg);
  const auto res = dsg::run_experiment(rx);
  dsg::emit_outputs(res, rx.cfg, dir.string());

  for (const char* name :
       {"mse.csv", "mse.svg", "summary.txt", "config_used.cfg",
        "trajectory_coop_1.csv", "trajectory_nonco_1.csv", "excitation.csv"})
    CHECK(fs::exists(dir / name));

  SECTION("mse.csv schema and row count") {
    const std::string csv = slurp(dir / "mse.csv");
    std::istringstream in(csv);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header ==
          "k,mse_coop_1,mse_coop_2,mse_coop_3,mse_nonco_1,mse_nonco_2,"
          "mse_nonco_3,max_coop,min_coop,max_nonco,min_nonco");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == cfg.steps);
    CHECK(csv.substr(csv.find('\n') + 1, 2) == "1,");  // k starts at 1
  }

  SECTION("emit is byte-stable under re-run") {
    const auto dir2 = fs::temp_directory_path() / "dsg_harness_out2";
    fs::remove_all(dir2);
    const auto res2 = dsg::run_experiment(rx);
    dsg::emit_outputs(res2, rx.cfg, dir2.string());
    CHECK(slurp(dir / "mse.csv") == slurp(dir2 / "mse.csv"));
    CHECK(slurp(dir / "summary.txt") == slurp(dir2 / "summary.txt"));
    CHECK(slurp(dir / "mse.svg") == slurp(dir2 / "mse.svg"));
    fs::remove_all(dir2);
  }

  SECTION("svg covers the axis range and labels all four curves") {
    const std::string svg = slurp(dir / "mse.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(count_occurrences(svg, "<polyline") == 4);
    CHECK(svg.find("cooperative max-node") != std::string::npos);
    CHECK(svg.find("cooperative min-node") != std::string::npos);
    CHECK(svg.find("non-cooperative max-node") != std::string::npos);
    CHECK(svg.find("non-cooperative min-node") != std::string::npos);
    CHECK(svg.find("step k") != std::string::npos);
    CHECK(svg.find("MSE (log scale)") != std::string::npos);
    CHECK(svg.find(">1<") != std::string::npos);    // first k tick
    CHECK(svg.find(">20<") != std::string::npos);   // last k tick = horizon
  }

  SECTION("config echo in the output directory is re-runnable") {
    const auto cfg2 = dsg::parse_config_file((dir / "config_used.cfg").string());
    const auto rx2 = dsg::resolve_config(cfg2);
    CHECK(dsg::echo_config(rx2.cfg) == res.config_echo);
  }

  SECTION("summary reports the final envelope and draw accounting") {
    const std::string summary = slurp(dir / "summary.txt");
    CHECK(summary.find("final max-node MSE (cooperative)") != std::string::npos);
    CHECK(summary.find("final min-node MSE (non-cooperative)") != std::string::npos);
    CHECK(summary.find("both arms share the same draws") != std::string::npos);
    CHECK(summary.find("excitation diagnostics") != std::string::npos);
  }

  fs::remove_all(dir);
}

TEST_CASE("trajectory csv round-trips the recorded run", "[harness]") {
  namespace fs = std::filesystem;
  auto cfg = tiny_config();
  cfg.runs = 1;
  cfg.record_trajectories = 1;
  const auto rx = dsg::resolve_config(cfg);
  const auto res = dsg::run_experiment(rx);
  const auto& rec = res.coop_trajectories.front();

  const auto path = fs::temp_directory_path() / "dsg_roundtrip.csv";
  dsg::write_trajectory_csv(path.string(), rec);
  const auto back = dsg::read_trajectory_csv_file(path.string());
  fs::remove(path);

  REQUIRE(back.n == rec.n);
  REQUIRE(back.m == rec.m);
  CHECK(back.seed == rec.seed);
  REQUIRE(back.steps.size() == rec.steps.size());
  for (std::size_t k = 0; k < rec.steps.size(); ++k) {
    const auto& a = rec.steps[k];
    const auto& b = back.steps[k];
    for (int i = 0; i < rec.n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      CHECK(a.phi[idx] == b.phi[idx]);  // full-precision text keeps every bit
      CHECK(a.y[idx] == b.y[idx]);
      CHECK(a.eps[idx] == b.eps[idx]);
      CHECK(a.r[idx] == b.r[idx]);
      CHECK(a.x_q[idx] == b.x_q[idx]);
      CHECK(a.theta_hat[idx] == b.theta_hat[idx]);
    }
  }
}

TEST_CASE("noiseless benchmark run contracts the worst node by step 200",
          "[harness]") {
  dsg::ExperimentConfig cfg;
  cfg.n = 28;
  cfg.m = 10;
  cfg.theta = Eigen::VectorXd::LinSpaced(10, 1.0, 10.0);
  cfg.topology = "ring28plus";
  cfg.params = {0.25, 0.7, 0};
  cfg.regressor = "example1";
  cfg.noise = {dsg::NoiseModel::Kind::zero, 0.0, 0.0};
  cfg.steps = 200;
  cfg.runs = 1;
  cfg.seed = 7;
  const auto res = dsg::run_experiment(dsg::resolve_config(cfg));
  CHECK(res.series.max_coop.back() < res.series.max_coop.front());
  CHECK(res.series.max_coop.back() < res.series.max_coop.front() * 0.9);
}
