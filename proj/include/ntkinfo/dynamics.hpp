#pragma once

#include <limits>

#include <Eigen/Dense>

#include "ntkinfo/kernels.hpp"

namespace ntkinfo {

/// Training time value standing for the end of gradient flow.
inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// Eigendecomposition of the train NTK, computed once and reused for every
/// matrix function of it. Immutable after construction.
class SpectralOperator {
 public:
  /// Eigenvalues below `relative_floor * max eigenvalue` (including negative
  /// rounding noise) are set to zero.
  explicit SpectralOperator(const Eigen::MatrixXd& ntk_train, double relative_floor = 1e-12);

  /// Nonincreasing.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  /// Columns are orthonormal eigenvectors, ordered like eigenvalues().
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  double clamp_floor() const { return clamp_floor_; }
  Eigen::Index size() const { return eigenvalues_.size(); }

  /// Number of eigenvalues zeroed by the floor.
  Eigen::Index null_dimension() const;
  /// Smallest nonzero eigenvalue (0 when all are null).
  double min_positive_eigenvalue() const;

  /// U diag(values) U^T.
  Eigen::MatrixXd compose(const Eigen::VectorXd& values) const;
  /// U^T v.
  Eigen::VectorXd to_eigenbasis(const Eigen::VectorXd& v) const;
  /// U^T M U.
  Eigen::MatrixXd to_eigenbasis(const Eigen::MatrixXd& m) const;

 private:
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  double clamp_floor_ = 0.0;
};

SpectralOperator spectral_decompose(const Eigen::MatrixXd& ntk_train);

/// h(lambda, tau) = (1 - exp(-tau lambda)) / lambda = integral_0^tau exp(-s lambda) ds.
/// Continuous at lambda = 0 (value tau). At tau = inf it is 1/lambda, and 0 for
/// lambda = 0 (pseudo-inverse: null directions stay at initialization).
double flow_gain(double lambda, double tau);

/// 1 - exp(-tau lambda), i.e. lambda * h(lambda, tau).
double flow_progress(double lambda, double tau);

/// exp(-tau lambda) with exp(-inf * 0) = 1.
double flow_decay(double lambda, double tau);

/// Theta^{-1} (I - exp(-tau Theta)), assembled as U diag(h(lambda_i, tau)) U^T.
/// Throws std::invalid_argument for negative or NaN tau.
Eigen::MatrixXd phi_tau(const SpectralOperator& spec, double tau);

void check_time(double tau);

enum class CovarianceMode { Full, Diagonal };

/// Gaussian law of the ensemble output at training time tau over M query points.
struct PredictiveDistribution {
  double tau = 0.0;
  Eigen::VectorXd mean;
  /// M x M in Full mode, empty in Diagonal mode.
  Eigen::MatrixXd covariance;
  /// Per-point marginal variances (always filled).
  Eigen::VectorXd variances;
  Eigen::VectorXd train_targets;
  CovarianceMode mode = CovarianceMode::Full;
  /// Number of negative variances / eigenvalues clipped to zero during assembly.
  int floored = 0;
};

/// Evaluates the predictive law over a fixed query set for many values of tau.
///
/// Everything that does not depend on tau is projected into the eigenbasis of
/// the train NTK once at construction; each evaluation is then a diagonal
/// rescaling plus one product with the projected train NNGP.
class PredictiveEvaluator {
 public:
  /// Queries are the test points of `kp`.
  PredictiveEvaluator(const SpectralOperator& spec, const KernelPair& kp,
                      const Eigen::VectorXd& targets);

  /// Queries are the train points themselves; uses Theta(X, X) U = U diag(lambda).
  static PredictiveEvaluator on_training_set(const SpectralOperator& spec,
                                             const Eigen::MatrixXd& nngp_train,
                                             const Eigen::VectorXd& targets);

  PredictiveDistribution operator()(double tau, CovarianceMode mode = CovarianceMode::Full) const;

  Eigen::Index query_size() const { return query_kernel_diag_.size(); }

 private:
  PredictiveEvaluator() = default;

  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd ntk_query_basis_;   // Theta(x, X) U, M x N
  Eigen::MatrixXd nngp_basis_;        // U^T K U, N x N
  Eigen::MatrixXd nngp_cross_basis_;  // U^T K(X, x), N x M
  Eigen::MatrixXd query_kernel_;      // K(x, x), M x M
  Eigen::VectorXd query_kernel_diag_;
  Eigen::VectorXd targets_;
  Eigen::VectorXd targets_basis_;     // U^T Y
};

/// One-shot evaluation of the predictive law at the test points of `kp`.
PredictiveDistribution predictive(const SpectralOperator& spec, const KernelPair& kp,
                                  const Eigen::VectorXd& targets, double tau,
                                  CovarianceMode mode = CovarianceMode::Full);

}  // namespace ntkinfo
