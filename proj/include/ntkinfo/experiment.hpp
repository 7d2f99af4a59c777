#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ntkinfo/gaussian_task.hpp"
#include "ntkinfo/info_metrics.hpp"
#include "ntkinfo/kernels.hpp"

namespace ntkinfo {

/// Raised for malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TaskConfig {
  int input_dim = 30;
  double target_mi = 2.0;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  int n_train = 1000;
  int n_test = 1000;
  /// Overrides the seeded mixing row when set (n_y x n_x).
  std::optional<Eigen::MatrixXd> mixing;
};

struct VerifySettings {
  int width = 4096;
  int n_networks = 200;
  int n_points = 8;
  int ensemble_draws = 100000;
};

struct ExperimentConfig {
  std::uint64_t seed = 1234;
  TaskConfig task;
  /// weight_variance is ignored; the grid supplies it.
  ArchitectureSpec arch_base;
  std::vector<double> weight_variance_grid{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> tau_grid = log_spaced(1e-2, 1e10, 120);
  MetricConfig metrics{.rng_seed = seed + 1};
  std::filesystem::path output_dir = "out";
  bool emit_verify = false;
  VerifySettings verify;

  /// Throws ConfigError.
  void validate() const;

  static std::vector<double> log_spaced(double first, double last, int points);
};

/// Missing keys take their defaults. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies the NTKINFO_SEED environment variable, when set, to cfg.seed.
void apply_environment(ExperimentConfig& cfg);

/// 64-bit FNV-1a of the canonical config JSON (output_dir excluded), as hex.
std::string config_hash(const ExperimentConfig& cfg);

/// The task, train and test draws derived from a config.
struct ExperimentData {
  GaussianTask task;
  TaskSample train;
  TaskSample test;
};

ExperimentData make_data(const ExperimentConfig& cfg);

/// Per-tau metrics of one weight variance. Rows with non-finite values are
/// dropped and reported on stderr.
std::vector<TrajectoryRecord> run_trajectory(const ExperimentConfig& cfg, const ExperimentData& data,
                                             double weight_variance);

inline constexpr const char* kCsvHeader =
    "tau,train_loss,test_loss,izy_lower,izx_lower,izx_upper,izd_upper,fisher_trace,"
    "path_length_bound,itheta_d,ditheta_d_dtau,degeneracy_flags";

std::string format_double(double value);
std::string csv_row(const TrajectoryRecord& record);
void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> read_trajectory_csv(const std::filesystem::path& path);

struct SweepOutput {
  double weight_variance = 0.0;
  double fisher_trace = 0.0;
  std::filesystem::path csv;
  std::vector<TrajectoryRecord> records;
};

struct SweepResult {
  std::vector<SweepOutput> outputs;
  std::filesystem::path manifest;
};

/// One CSV per weight variance plus manifest.json in cfg.output_dir.
SweepResult run_sweep(const ExperimentConfig& cfg);

struct FrontierPoint {
  double izx = 0.0;
  double izy = 0.0;
};

/// GIB frontier on [0, log batch_size] plus the saturation value.
std::vector<FrontierPoint> frontier_table(const ExperimentConfig& cfg, int points = 200);
void write_frontier_csv(std::ostream& out, const std::vector<FrontierPoint>& table);

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool passed() const;
};

/// Runs the Monte Carlo oracle suite against the analytic routes.
VerifyReport verify(const ExperimentConfig& cfg);

}  // namespace ntkinfo
