#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace ntkinfo {

enum class Activation { ReLU, Erf };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

/// Fully-connected architecture in the NTK parameterization.
///
/// `depth` counts hidden (nonlinear) layers; a scalar affine readout is
/// always appended on top of them.
struct ArchitectureSpec {
  int depth = 3;
  Activation activation = Activation::Erf;
  double weight_variance = 1.0;  // sigma_w^2
  double bias_variance = 0.01;   // sigma_b^2
  int input_dim = 30;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Gaussian expectations of an activation under a bivariate normal with
/// covariance [[a, c], [c, b]]: `value` = E[phi(u) phi(v)],
/// `derivative` = E[phi'(u) phi'(v)].
struct DualMap {
  double value = 0.0;
  double derivative = 0.0;
};

DualMap dual_map(Activation activation, double a, double b, double c);

/// NNGP and NTK blocks over a train set X (N points) and a test set x (M points).
struct KernelPair {
  Eigen::MatrixXd nngp_train;      // K(X, X), N x N
  Eigen::MatrixXd ntk_train;       // Theta(X, X), N x N
  Eigen::MatrixXd nngp_cross;      // K(X, x), N x M
  Eigen::MatrixXd ntk_cross;       // Theta(x, X), M x N
  Eigen::MatrixXd nngp_test;       // K(x, x), M x M
  Eigen::VectorXd nngp_test_diag;  // diagonal of nngp_test

  Eigen::Index train_size() const { return nngp_train.rows(); }
  Eigen::Index test_size() const { return nngp_test_diag.size(); }
};

/// Both kernels evaluated on one block of point pairs.
struct KernelBlock {
  Eigen::MatrixXd nngp;
  Eigen::MatrixXd ntk;
};

/// Kernels between the rows of `lhs` and the rows of `rhs`.
KernelBlock kernel_block(const ArchitectureSpec& arch, const Eigen::MatrixXd& lhs,
                         const Eigen::MatrixXd& rhs);

/// Kernels of a point set with itself. The result is exactly symmetric.
KernelBlock kernel_gram(const ArchitectureSpec& arch, const Eigen::MatrixXd& points);

/// Inputs are row-major point sets: train is N x n_x, test is M x n_x.
/// `test` may have zero rows.
KernelPair compute_kernels(const ArchitectureSpec& arch, const Eigen::MatrixXd& train,
                           const Eigen::MatrixXd& test);

}  // namespace ntkinfo
