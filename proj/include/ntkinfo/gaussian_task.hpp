#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

namespace ntkinfo {

/// Jointly Gaussian regression task: x = L^x eps_x, y = L^y eps_y + A x.
struct GaussianTask {
  Eigen::MatrixXd lx;      // n_x x n_x
  Eigen::MatrixXd ly;      // n_y x n_y
  Eigen::MatrixXd mixing;  // A, n_y x n_x
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  std::uint64_t seed = 0;

  /// L^x = sigma_x I, L^y = sigma_y I.
  static GaussianTask isotropic(Eigen::MatrixXd mixing, double sigma_x, double sigma_y,
                                std::uint64_t seed);

  /// Standard-normal mixing row drawn from `seed` and rescaled so that
  /// I(X;Y) equals `target_mi` nats.
  static GaussianTask with_information(int input_dim, double target_mi, double sigma_x,
                                       double sigma_y, std::uint64_t seed);

  int input_dim() const { return static_cast<int>(mixing.cols()); }
  int target_dim() const { return static_cast<int>(mixing.rows()); }

  /// True when lx and ly are the scaled identities the closed forms assume.
  bool is_isotropic() const;

  /// Throws std::invalid_argument on inconsistent shapes or scales.
  void validate() const;
};

struct TaskCovariances {
  Eigen::MatrixXd xx;  // Sigma_x = L^x L^x^T
  Eigen::MatrixXd yy;  // Sigma_y = L^y L^y^T + A Sigma_x A^T
  Eigen::MatrixXd xy;  // Sigma_xy = Sigma_x A^T, n_x x n_y
};

TaskCovariances covariances(const GaussianTask& task);

enum class Split { Train, Test };

std::string_view to_string(Split split);

struct TaskSample {
  Eigen::MatrixXd inputs;   // n x n_x
  Eigen::MatrixXd targets;  // n x n_y
  Split split = Split::Train;
};

/// Deterministic in (task.seed, split, n): the same triple yields bit-identical draws.
TaskSample sample(const GaussianTask& task, Eigen::Index n, Split split);

/// Closed form 1/2 sum_i log(1 + sigma_x^2 s_i^2 / sigma_y^2) over the singular
/// values of A for isotropic tasks (cross-checked against the determinant route);
/// the determinant route otherwise. Nats.
double exact_mi(const GaussianTask& task);

/// 1/2 log(|Sigma_y| / |Sigma_y - Sigma_xy^T Sigma_x^{-1} Sigma_xy|). Nats.
double mi_from_covariances(const GaussianTask& task);

/// Differential entropy of Y in nats (isotropic closed form, determinant otherwise).
double entropy_y(const GaussianTask& task);

/// Optimal I(Z;Y) at I(Z;X) = rate for a scalar target whose squared canonical
/// correlation with X is `rho_squared`.
double gib_frontier_value(double rho_squared, double rate);

/// Gaussian information-bottleneck frontier of a task with n_y = 1, evaluated on a
/// grid of I(Z;X) values.
Eigen::VectorXd gib_frontier(const GaussianTask& task, const Eigen::VectorXd& izx_grid);

}  // namespace ntkinfo
