#include "ntkinfo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ntkinfo {

namespace {

constexpr double kPi = std::numbers::pi;
// Covariance entries below this are treated as this value in the ReLU map.
constexpr double kVarianceFloor = 1e-30;
// Correlations this far outside [-1, 1] are rounding; anything larger is a bug.
constexpr double kCorrelationSlack = 1e-12;

double clamp_correlation(double rho) {
  if (!(std::abs(rho) <= 1.0 + kCorrelationSlack)) {
    throw std::domain_error("kernel correlation out of range: " + std::to_string(rho));
  }
  return std::clamp(rho, -1.0, 1.0);
}

DualMap relu_map(double a, double b, double c) {
  a = std::max(a, kVarianceFloor);
  b = std::max(b, kVarianceFloor);
  const double norm = std::sqrt(a * b);
  const double rho = clamp_correlation(c / norm);
  const double theta = std::acos(rho);
  return {norm / (2.0 * kPi) * (std::sin(theta) + (kPi - theta) * rho),
          (kPi - theta) / (2.0 * kPi)};
}

DualMap erf_map(double a, double b, double c) {
  const double scale = (1.0 + 2.0 * a) * (1.0 + 2.0 * b);
  const double arg = clamp_correlation(2.0 * c / std::sqrt(scale));
  // scale - 4c^2 >= 1 + 2a + 2b whenever c^2 <= ab.
  const double det = std::max(scale - 4.0 * c * c, 1.0);
  return {2.0 / kPi * std::asin(arg), 4.0 / kPi / std::sqrt(det)};
}

void check_finite(const Eigen::MatrixXd& points, const char* name) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (!points.row(i).allFinite()) {
      throw std::invalid_argument(std::string("non-finite value in ") + name + " input row " +
                                  std::to_string(i));
    }
  }
}

void check_dims(const ArchitectureSpec& arch, const Eigen::MatrixXd& points, const char* name) {
  if (points.cols() != arch.input_dim) {
    throw std::invalid_argument(std::string(name) + " inputs have " +
                                std::to_string(points.cols()) + " columns, expected " +
                                std::to_string(arch.input_dim));
  }
  check_finite(points, name);
}

// Per-point NNGP self-covariance entering each layer's activation map:
// column l holds K^(l+1)(x, x) for l = 0 .. depth - 1.
Eigen::MatrixXd self_covariances(const ArchitectureSpec& arch, const Eigen::MatrixXd& points) {
  Eigen::MatrixXd out(points.rows(), arch.depth);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double k = arch.bias_variance +
               arch.weight_variance * points.row(i).dot(points.row(i)) / arch.input_dim;
    for (int l = 0; l < arch.depth; ++l) {
      out(i, l) = k;
      k = arch.bias_variance + arch.weight_variance * dual_map(arch.activation, k, k, k).value;
    }
  }
  return out;
}

struct PairValue {
  double nngp;
  double ntk;
};

PairValue pair_kernel(const ArchitectureSpec& arch, double inner, const double* self_a,
                      const double* self_b, Eigen::Index stride_a, Eigen::Index stride_b) {
  double k = arch.bias_variance + arch.weight_variance * inner / arch.input_dim;
  double theta = k;
  for (int l = 0; l < arch.depth; ++l) {
    const DualMap m = dual_map(arch.activation, self_a[l * stride_a], self_b[l * stride_b], k);
    k = arch.bias_variance + arch.weight_variance * m.value;
    theta = k + arch.weight_variance * m.derivative * theta;
  }
  return {k, theta};
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::ReLU:
      return "relu";
    case Activation::Erf:
      return "erf";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu" || name == "ReLU") return Activation::ReLU;
  if (name == "erf" || name == "Erf") return Activation::Erf;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

void ArchitectureSpec::validate() const {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  if (!(weight_variance > 0.0) || !std::isfinite(weight_variance)) {
    throw std::invalid_argument("weight_variance must be positive and finite");
  }
  if (!(bias_variance >= 0.0) || !std::isfinite(bias_variance)) {
    throw std::invalid_argument("bias_variance must be nonnegative and finite");
  }
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
}

DualMap dual_map(Activation activation, double a, double b, double c) {
  switch (activation) {
    case Activation::ReLU:
      return relu_map(a, b, c);
    case Activation::Erf:
      return erf_map(a, b, c);
  }
  throw std::invalid_argument("unknown activation");
}

KernelBlock kernel_block(const ArchitectureSpec& arch, const Eigen::MatrixXd& lhs,
                         const Eigen::MatrixXd& rhs) {
  arch.validate();
  check_dims(arch, lhs, "lhs");
  check_dims(arch, rhs, "rhs");
  const Eigen::MatrixXd self_l = self_covariances(arch, lhs);
  const Eigen::MatrixXd self_r = self_covariances(arch, rhs);
  const Eigen::MatrixXd inner = lhs * rhs.transpose();

  KernelBlock out{Eigen::MatrixXd(lhs.rows(), rhs.rows()),
                  Eigen::MatrixXd(lhs.rows(), rhs.rows())};
  for (Eigen::Index j = 0; j < rhs.rows(); ++j) {
    for (Eigen::Index i = 0; i < lhs.rows(); ++i) {
      const PairValue v = pair_kernel(arch, inner(i, j), &self_l(i, 0), &self_r(j, 0),
                                      self_l.rows(), self_r.rows());
      out.nngp(i, j) = v.nngp;
      out.ntk(i, j) = v.ntk;
    }
  }
  return out;
}

KernelBlock kernel_gram(const ArchitectureSpec& arch, const Eigen::MatrixXd& points) {
  arch.validate();
  check_dims(arch, points, "input");
  const Eigen::MatrixXd self = self_covariances(arch, points);
  const Eigen::Index n = points.rows();

  KernelBlock out{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      // Same summation order for (i, j) and (j, i).
      const double inner = points.row(i).dot(points.row(j));
      const PairValue v =
          pair_kernel(arch, inner, &self(i, 0), &self(j, 0), self.rows(), self.rows());
      out.nngp(i, j) = out.nngp(j, i) = v.nngp;
      out.ntk(i, j) = out.ntk(j, i) = v.ntk;
    }
  }
  return out;
}

KernelPair compute_kernels(const ArchitectureSpec& arch, const Eigen::MatrixXd& train,
                           const Eigen::MatrixXd& test) {
  if (train.rows() < 1) throw std::invalid_argument("train set must contain at least one point");
  arch.validate();
  check_dims(arch, train, "train");
  check_dims(arch, test, "test");

  KernelPair kp;
  KernelBlock train_block = kernel_gram(arch, train);
  kp.nngp_train = std::move(train_block.nngp);
  kp.ntk_train = std::move(train_block.ntk);

  KernelBlock cross = kernel_block(arch, test, train);
  kp.nngp_cross = cross.nngp.transpose();
  kp.ntk_cross = std::move(cross.ntk);

  kp.nngp_test = kernel_gram(arch, test).nngp;
  kp.nngp_test_diag = kp.nngp_test.diagonal();
  return kp;
}

}  // namespace ntkinfo
