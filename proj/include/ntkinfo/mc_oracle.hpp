#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "ntkinfo/dynamics.hpp"
#include "ntkinfo/kernels.hpp"

namespace ntkinfo {

/// How hidden-to-hidden weight matrices of a finite network are drawn.
///
/// Explicit materializes every width x width Gaussian matrix. Implicit draws
/// W only through the two products the network touches, W a (forward) and
/// W^T delta (backward), by conditioning on the Gaussian projection W Q onto
/// the span of a. The joint law of activations and gradients is identical;
/// the cost drops from O(width^2) to O(width * N) draws per layer.
enum class HiddenWeightSampling { Implicit, Explicit };

struct FiniteWidthConfig {
  int width = 4096;
  int n_networks = 200;
  ArchitectureSpec arch;
  std::uint64_t seed = 0;
  HiddenWeightSampling hidden = HiddenWeightSampling::Implicit;

  void validate() const;
};

struct EmpiricalKernels {
  Eigen::MatrixXd nngp;
  Eigen::MatrixXd ntk;
};

/// Kernels of one freshly initialized finite network (index selects the draw).
///
/// nngp is the output Gram matrix with the readout weights integrated out,
/// sigma_b^2 + sigma_w^2 / width * <phi(h), phi(h')>; ntk is J J^T from the
/// layerwise chain rule over every weight and bias.
EmpiricalKernels finite_network_kernels(const FiniteWidthConfig& cfg, const Eigen::MatrixXd& inputs,
                                        std::uint64_t network_index);

/// Average over cfg.n_networks independent networks (pairwise reduction, so the
/// result does not depend on thread count).
EmpiricalKernels empirical_kernels(const FiniteWidthConfig& cfg, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd empirical_nngp(const FiniteWidthConfig& cfg, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd empirical_ntk(const FiniteWidthConfig& cfg, const Eigen::MatrixXd& inputs);

/// ||approx - exact||_F / ||exact||_F.
double relative_frobenius_error(const Eigen::MatrixXd& approx, const Eigen::MatrixXd& exact);

struct SampleMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd covariance_se;
  Eigen::Index draws = 0;
};

struct EnsembleMoments {
  SampleMoments train;
  SampleMoments test;
};

/// Draws z0 ~ N(0, K) jointly over train and test points and pushes each draw
/// through z(x, tau) = z0(x) - Theta(x, X) Phi_tau (z0(X) - Y).
EnsembleMoments ensemble_trajectories(const SpectralOperator& spec, const KernelPair& kp,
                                      const Eigen::VectorXd& targets, double tau, int n_draws,
                                      std::uint64_t seed);

struct PathLengthSample {
  /// E[sqrt(int_0^tau ||Theta e^{-s Theta} r0||^2 ds)].
  double energy_root_mean = 0.0;
  double energy_root_se = 0.0;
  /// E[int_0^tau ||Theta e^{-s Theta} r0||^2 ds].
  double energy_mean = 0.0;
  double energy_se = 0.0;
  /// E[int_0^tau ||Theta e^{-s Theta} r0|| ds], the Fisher-metric arc length.
  double arc_length_mean = 0.0;
  double arc_length_se = 0.0;
};

/// Per-draw adaptive quadrature of the parameter-path integrands over
/// r0 = z0(X) - Y with z0 ~ N(0, K(X, X)).
PathLengthSample ensemble_path_lengths(const SpectralOperator& spec, const KernelPair& kp,
                                       const Eigen::VectorXd& targets, double tau, int n_draws,
                                       std::uint64_t seed);

}  // namespace ntkinfo
