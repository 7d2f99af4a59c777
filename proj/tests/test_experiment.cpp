#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ntkinfo/experiment.hpp"

using namespace ntkinfo;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.task.n_train = 40;
  cfg.task.n_test = 30;
  cfg.metrics.batch_size = 30;
  cfg.metrics.mc_samples = 8;
  cfg.weight_variance_grid = {0.25};
  cfg.tau_grid = {0.01, 1.0, 100.0};
  cfg.output_dir = out;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ntkinfo_test_" + name);
  fs::remove_all(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NTKINFO_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("defaults and JSON round trip") {
  const ExperimentConfig def;
  CHECK(def.tau_grid.size() == 120);
  CHECK(def.tau_grid.front() == 1e-2);
  CHECK(def.tau_grid.back() == 1e10);
  CHECK(def.metrics.batch_size == 1000);
  CHECK(def.task.input_dim == 30);

  const ExperimentConfig parsed = config_from_json(nlohmann::json::object());
  CHECK(config_to_json(parsed) == config_to_json(config_from_json(config_to_json(parsed))));
  CHECK(parsed.metrics.rng_seed == parsed.seed + 1);

  nlohmann::json doc = {{"seed", 7},
                        {"architecture", {{"activation", "relu"}, {"depth", 2}}},
                        {"tau_grid", {{"min", 0.1}, {"max", 10.0}, {"points", 3}}}};
  const ExperimentConfig cfg = config_from_json(doc);
  CHECK(cfg.seed == 7);
  CHECK(cfg.arch_base.activation == Activation::ReLU);
  CHECK(cfg.arch_base.depth == 2);
  REQUIRE(cfg.tau_grid.size() == 3);
  CHECK(cfg.tau_grid[1] == doctest::Approx(1.0));
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(config_from_json({{"tau_grid", {1.0, 0.5}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"weight_variance_grid", nlohmann::json::array()}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"weight_variance_grid", {-1.0}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"architecture", {{"activation", "tanh"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"metrics", {{"batch_size", 1}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"seed", "abc"}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("seed override from the environment") {
  ExperimentConfig cfg;
  setenv("NTKINFO_SEED", "99", 1);
  apply_environment(cfg);
  CHECK(cfg.seed == 99);
  CHECK(cfg.metrics.rng_seed == 100);
  setenv("NTKINFO_SEED", "x1", 1);
  CHECK_THROWS_AS(apply_environment(cfg), ConfigError);
  unsetenv("NTKINFO_SEED");
}

TEST_CASE("config hash ignores the output directory only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = a.seed + 1;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("doubles survive the CSV round trip exactly") {
  TrajectoryRecord r;
  r.tau = 0.1;
  r.train_loss = 1.0 / 3.0;
  r.izx_lower = std::nextafter(2.0, 3.0);
  r.fisher_trace = 1191.0986862792604;
  r.degeneracy_flags = 4;
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  write_trajectory_csv(dir / "t.csv", {r});
  const auto back = read_trajectory_csv(dir / "t.csv");
  REQUIRE(back.size() == 1);
  CHECK(back[0].tau == r.tau);
  CHECK(back[0].train_loss == r.train_loss);
  CHECK(back[0].izx_lower == r.izx_lower);
  CHECK(back[0].fisher_trace == r.fisher_trace);
  CHECK(back[0].degeneracy_flags == 4);
  fs::remove_all(dir);
}

TEST_CASE("small sweep writes the declared artifacts reproducibly") {
  const fs::path dir = scratch("sweep");
  const ExperimentConfig cfg = small_config(dir);
  const SweepResult first = run_sweep(cfg);
  REQUIRE(first.outputs.size() == 1);
  const std::string csv = slurp(first.outputs[0].csv);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == kCsvHeader);
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 3);

  const auto records = read_trajectory_csv(first.outputs[0].csv);
  for (const auto& r : records) CHECK(r.fisher_trace == records.front().fisher_trace);

  const nlohmann::json manifest = nlohmann::json::parse(slurp(first.manifest));
  CHECK(manifest.at("config_hash") == config_hash(cfg));
  CHECK(manifest.at("seed") == cfg.seed);
  CHECK(manifest.at("exact_mi").get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(manifest.at("trajectories")[0].at("fisher_trace").get<double>() == records.front().fisher_trace);
  CHECK(manifest.at("gib_frontier").size() == 200);
  CHECK(manifest.at("config").at("tau_grid").size() == 3);

  const std::string manifest_text = slurp(first.manifest);
  run_sweep(cfg);
  CHECK(slurp(first.outputs[0].csv) == csv);
  CHECK(slurp(first.manifest) == manifest_text);
  fs::remove_all(dir);
}

TEST_CASE("frontier table spans the minibatch range") {
  ExperimentConfig cfg;
  const auto table = frontier_table(cfg, 50);
  REQUIRE(table.size() == 50);
  CHECK(table.front().izx == 0.0);
  CHECK(table.back().izx == doctest::Approx(std::log(1000.0)));
  for (std::size_t i = 1; i < table.size(); ++i) CHECK(table[i].izy >= table[i - 1].izy);
  CHECK(table.back().izy < 2.0);
}

TEST_CASE("verify passes on a single weight variance") {
  ExperimentConfig cfg;
  cfg.task.n_train = 40;
  cfg.task.n_test = 30;
  cfg.metrics.batch_size = 30;
  cfg.weight_variance_grid = {1.0};
  const VerifyReport report = verify(cfg);
  for (const auto& c : report.checks) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.passed);
  }
  CHECK(report.passed());
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{\"tau_grid\": [2, 1]}";
  }
  CHECK(run_cli("sweep --config " + (dir / "bad.json").string() + " --out " + dir.string()) == 1);
  CHECK(run_cli("verify --config " + (dir / "missing.json").string()) == 1);
  {
    std::ofstream weak(dir / "weak.json");
    weak << R"({"task": {"n_train": 30, "n_test": 30}, "metrics": {"batch_size": 30},
               "weight_variance_grid": [1.0],
               "verify": {"width": 64, "n_networks": 1, "ensemble_draws": 1000}})";
  }
  CHECK(run_cli("verify --config " + (dir / "weak.json").string()) == 2);
  {
    std::ofstream tiny(dir / "tiny.json");
    tiny << R"({"task": {"n_train": 30, "n_test": 30}, "metrics": {"batch_size": 30, "mc_samples": 4},
               "weight_variance_grid": [0.5, 2.0], "tau_grid": [0.1, 10]})";
  }
  CHECK(run_cli("sweep --config " + (dir / "tiny.json").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "manifest.json"));
  CHECK(run_cli("frontier --config " + (dir / "tiny.json").string() + " --out " + (dir / "f.csv").string()) == 0);
  CHECK(slurp(dir / "f.csv").rfind("izx,izy_frontier\n", 0) == 0);
  fs::remove_all(dir);
}
