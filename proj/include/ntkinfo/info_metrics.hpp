#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "ntkinfo/dynamics.hpp"
#include "ntkinfo/kernels.hpp"

namespace ntkinfo {

struct MetricConfig {
  int batch_size = 1000;
  int mc_samples = 64;
  double observation_variance = 1.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// One row of a training trajectory. Information quantities are in nats.
struct TrajectoryRecord {
  double tau = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double izy_lower = 0.0;
  double izx_lower = 0.0;
  double izx_upper = 0.0;
  double izd_upper = 0.0;
  double fisher_trace = 0.0;
  double path_length_bound = 0.0;
  double itheta_d = 0.0;
  double ditheta_d_dtau = 0.0;
  int degeneracy_flags = 0;

  // Standard errors of the sampled estimates; not part of the CSV row.
  double izy_se = 0.0;
  double izx_se = 0.0;
};

/// 1/2 ||y - mu||^2 + 1/2 Tr Sigma, summed over query points.
double expected_loss(const PredictiveDistribution& pred, const Eigen::VectorXd& targets);

/// The constant -(k/2) log(2 pi) accompanying expected_loss in E[log q(y|z)].
double log_likelihood_constant(int target_dim);

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// H(Y) + E[log q(y|z)] with q(y|z) = N(z, observation_variance), averaged over
/// query points.
Estimate izy_lower(const PredictiveDistribution& pred, const Eigen::VectorXd& targets, double hy,
                   double observation_variance = 1.0);

struct IzxBounds {
  double lower = 0.0;
  double upper = 0.0;
  double lower_se = 0.0;
  double upper_se = 0.0;
  /// Variances raised to the floor.
  int degenerate = 0;
};

/// Minibatch lower and leave-one-out upper bounds on I(Z;X|D) over per-example
/// scalar Gaussians N(means[i], variances[i]). All cfg.batch_size examples are
/// used; each contributes cfg.mc_samples draws of z_i.
IzxBounds izx_bounds(const Eigen::VectorXd& means, const Eigen::VectorXd& variances,
                     const MetricConfig& cfg);

/// Same bounds with caller-supplied standard-normal draws (N x S): z_is = mu_i + sd_i eps_is.
IzxBounds izx_bounds(const Eigen::VectorXd& means, const Eigen::VectorXd& variances,
                     const Eigen::MatrixXd& standard_draws);

/// Standard-normal draws used by izx_bounds for a config.
Eigen::MatrixXd izx_standard_draws(const MetricConfig& cfg);

/// Mean over query points of KL(N(mu, Sigma_ii) || N(0, K(x, x))).
double izd_upper(const PredictiveDistribution& pred, const Eigen::VectorXd& prior_diag);

/// Tr Theta(X, X).
double fisher_trace(const KernelPair& kp);

/// Square root of 1/2 [Tr(K Theta (I - e^{-2 tau Theta})) + Y^T Theta (I - e^{-2 tau Theta}) Y].
double path_length_bound(const SpectralOperator& spec, const KernelPair& kp,
                         const Eigen::VectorXd& targets, double tau);

/// Tr(K Theta^{-1}(I - e^{-tau Theta})^2) + Y^T Theta^{-1}(I - e^{-tau Theta})^2 Y + tau Tr Theta.
double itheta_d_lower(const SpectralOperator& spec, const KernelPair& kp,
                      const Eigen::VectorXd& targets, double tau);

/// Analytic tau-derivative of itheta_d_lower.
double ditheta_d_dtau(const SpectralOperator& spec, const KernelPair& kp,
                      const Eigen::VectorXd& targets, double tau);

/// Precomputes the eigenbasis projections shared by the three spectral metrics
/// so a tau sweep costs O(N) per point.
class SpectralMetrics {
 public:
  SpectralMetrics(const SpectralOperator& spec, const Eigen::MatrixXd& nngp_train,
                  const Eigen::VectorXd& targets);

  double path_length_bound(double tau) const;
  double itheta_d_lower(double tau) const;
  double ditheta_d_dtau(double tau) const;
  double ntk_trace() const { return ntk_trace_; }

 private:
  Eigen::VectorXd eigenvalues_;
  // diag(U^T K U) + (U^T Y)^2: the weight of each eigendirection in E[r r^T].
  Eigen::VectorXd residual_weight_;
  double ntk_trace_ = 0.0;
};

}  // namespace ntkinfo
