#include "cellmg/io.hpp"

#include "cellmg/estimator.hpp"
#include "cellmg/rng.hpp"
#include "cellmg/simulation.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace cellmg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cellmg_io_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

GroupedData awkward_data() {
  Rng rng(55);
  GroupedData data;
  Matrix a(4, 3), b(3, 3);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) a(i, j) = rng.normal() * std::pow(10.0, rng.uniform_int(7) - 3);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) b(i, j) = rng.normal();
  b(0, 0) = 1.0 / 3.0; // not exactly representable in decimal
  b(1, 2) = -0.1;
  data.groups = {a, b};
  return data;
}

}  // namespace

TEST_CASE("data CSV round-trips bit-exactly") {
  TempDir tmp;
  const GroupedData data = awkward_data();
  io::write_data_csv(tmp.file("d.csv"), data);
  const GroupedData back = io::read_data_csv(tmp.file("d.csv"));
  REQUIRE(back.n_groups() == 2);
  for (int g = 0; g < 2; ++g)
    CHECK(back.groups[static_cast<std::size_t>(g)] == data.groups[static_cast<std::size_t>(g)]);
  CHECK(back.variable_names == std::vector<std::string>{"v1", "v2", "v3"});
}

TEST_CASE("CSV uses LF endings and a header row") {
  TempDir tmp;
  io::write_data_csv(tmp.file("d.csv"), awkward_data());
  std::ifstream f(tmp.file("d.csv"), std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(content.rfind("group,v1,v2,v3\n", 0) == 0);
  CHECK(content.find('\r') == std::string::npos);
}

TEST_CASE("CSV parse errors point at the offending cell") {
  TempDir tmp;
  {
    std::ofstream f(tmp.file("bad.csv"));
    f << "group,v1,v2\n1,0.5,ok\n";
  }
  try {
    io::read_data_csv(tmp.file("bad.csv"));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("v2") != std::string::npos);
  }
}

TEST_CASE("missing files raise IoError") {
  CHECK_THROWS_AS(io::read_data_csv("/nonexistent/nope.csv"), io::IoError);
  CHECK_THROWS_AS(io::read_model_json("/nonexistent/nope.json"), io::IoError);
}

TEST_CASE("mask CSV round-trips") {
  TempDir tmp;
  CellMask mask;
  MaskMatrix a(3, 2), b(2, 2);
  a << 1, 0, 1, 1, 0, 1;
  b << 1, 1, 0, 0;
  mask.groups = {a, b};
  io::write_mask_csv(tmp.file("m.csv"), mask, {"x", "y"});
  const CellMask back = io::read_mask_csv(tmp.file("m.csv"));
  CHECK(back.groups[0] == a);
  CHECK(back.groups[1] == b);
}

TEST_CASE("model JSON round-trips into an identical MixtureParams") {
  TempDir tmp;
  SimulationConfig sim;
  sim.n_groups = 2;
  sim.dim = 3;
  sim.n_per_group = {20, 20};
  sim.pi_diag = 0.8;
  sim.seed = 77;
  auto [data, truth] = simulate_dataset(sim);
  EstimatorConfig cfg;
  cfg.max_iter = 5;
  const FitResult fitted = fit(data, cfg);

  const io::ModelFile model{fitted.params, fitted.center, fitted.scale, {"a", "b", "c"}, {"g1", "g2"}};
  io::write_model_json(tmp.file("model.json"), model);
  const io::ModelFile back = io::read_model_json(tmp.file("model.json"));

  CHECK(back.params.pi == fitted.params.pi);
  for (int k = 0; k < 2; ++k) {
    CHECK(back.params.mu[static_cast<std::size_t>(k)] == fitted.params.mu[static_cast<std::size_t>(k)]);
    CHECK(back.params.sigma[static_cast<std::size_t>(k)].get() ==
          fitted.params.sigma[static_cast<std::size_t>(k)].get());
    CHECK(back.params.sigma_reg[static_cast<std::size_t>(k)].get() ==
          fitted.params.sigma_reg[static_cast<std::size_t>(k)].get());
    CHECK(back.params.reg.target_diag[static_cast<std::size_t>(k)] ==
          fitted.params.reg.target_diag[static_cast<std::size_t>(k)]);
    CHECK(back.params.reg.rho[static_cast<std::size_t>(k)] ==
          fitted.params.reg.rho[static_cast<std::size_t>(k)]);
  }
  CHECK(back.center == fitted.center);
  CHECK(back.scale == fitted.scale);
  CHECK(back.variable_names == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("truth JSON round-trips") {
  TempDir tmp;
  SimulationConfig sim;
  sim.n_groups = 2;
  sim.dim = 2;
  sim.n_per_group = {10, 10};
  sim.pi_diag = 0.9;
  sim.seed = 3;
  auto [data, truth] = simulate_dataset(sim);
  io::write_truth_json(tmp.file("truth.json"), truth);
  const GroundTruth back = io::read_truth_json(tmp.file("truth.json"));
  CHECK(back.pi == truth.pi);
  CHECK(back.mu[0] == truth.mu[0]);
  CHECK(back.sigma[1].get() == truth.sigma[1].get());
  CHECK(back.labels == truth.labels);
}

TEST_CASE("config JSON parsing") {
  TempDir tmp;
  {
    std::ofstream f(tmp.file("cfg.json"));
    f << R"({"alpha": 0.6, "h_fraction": 0.8, "eps_conv": 1e-5, "max_iter": 42, "seed": 7})";
  }
  const EstimatorConfig cfg = io::read_fit_config_json(tmp.file("cfg.json"));
  CHECK(cfg.alpha == 0.6);
  CHECK(cfg.h_fraction == 0.8);
  CHECK(cfg.eps_conv == 1e-5);
  CHECK(cfg.max_iter == 42);
  CHECK(cfg.seed == 7);

  {
    std::ofstream f(tmp.file("sim.json"));
    f << R"({"n_groups": 3, "p": 4, "n_per_group": 25, "pi_diag": 0.75,
             "mean_mode": "c_separated", "eps_cell": 0.1, "gamma_cell": 10, "seed": 5})";
  }
  const SimulationConfig sim = io::read_sim_config_json(tmp.file("sim.json"));
  CHECK(sim.n_groups == 3);
  CHECK(sim.dim == 4);
  CHECK(sim.n_per_group == std::vector<int>{25, 25, 25});
  CHECK(sim.mean_mode == SimulationConfig::MeanMode::CSeparated);

  {
    std::ofstream f(tmp.file("broken.json"));
    f << "{not json";
  }
  CHECK_THROWS_AS(io::read_fit_config_json(tmp.file("broken.json")), ValidationError);
}

TEST_CASE("format_double survives a parse round-trip") {
  Rng rng(19);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform_int(61) - 30);
    const std::string s = io::format_double(v);
    CHECK(std::stod(s) == v);
  }
}
