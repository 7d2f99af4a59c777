#include "ntkinfo/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace ntkinfo {

namespace {

// Below this value of tau * lambda the closed form loses digits to cancellation;
// the cubic Taylor expansion is accurate to ~1e-13 relative there.
constexpr double kSeriesThreshold = 1e-4;

void check_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix is not square");
  if (!m.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw std::invalid_argument("matrix is not symmetric (max asymmetry " + std::to_string(asym) +
                                ")");
  }
}

Eigen::VectorXd gains(const Eigen::VectorXd& eigenvalues, double tau) {
  Eigen::VectorXd h(eigenvalues.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = flow_gain(eigenvalues[i], tau);
  return h;
}

}  // namespace

SpectralOperator::SpectralOperator(const Eigen::MatrixXd& ntk_train, double relative_floor) {
  check_symmetric(ntk_train);
  const Eigen::Index n = ntk_train.rows();
  if (n == 0) return;
  const Eigen::MatrixXd sym = 0.5 * (ntk_train + ntk_train.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

  // Eigen returns ascending order.
  eigenvalues_ = solver.eigenvalues().reverse();
  eigenvectors_ = solver.eigenvectors().rowwise().reverse();
  clamp_floor_ = relative_floor * std::max(eigenvalues_[0], 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (eigenvalues_[i] < clamp_floor_ || eigenvalues_[i] <= 0.0) eigenvalues_[i] = 0.0;
  }
}

Eigen::Index SpectralOperator::null_dimension() const {
  return (eigenvalues_.array() == 0.0).count();
}

double SpectralOperator::min_positive_eigenvalue() const {
  double out = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
    if (eigenvalues_[i] > 0.0) out = eigenvalues_[i];
  }
  return out;
}

Eigen::MatrixXd SpectralOperator::compose(const Eigen::VectorXd& values) const {
  return eigenvectors_ * values.asDiagonal() * eigenvectors_.transpose();
}

Eigen::VectorXd SpectralOperator::to_eigenbasis(const Eigen::VectorXd& v) const {
  return eigenvectors_.transpose() * v;
}

Eigen::MatrixXd SpectralOperator::to_eigenbasis(const Eigen::MatrixXd& m) const {
  return eigenvectors_.transpose() * m * eigenvectors_;
}

SpectralOperator spectral_decompose(const Eigen::MatrixXd& ntk_train) {
  return SpectralOperator(ntk_train);
}

void check_time(double tau) {
  if (!(tau >= 0.0)) {
    throw std::invalid_argument("training time must be nonnegative, got " + std::to_string(tau));
  }
}

double flow_gain(double lambda, double tau) {
  if (std::isinf(tau)) return lambda > 0.0 ? 1.0 / lambda : 0.0;
  if (lambda == 0.0) return tau;
  const double x = tau * lambda;
  if (x >= kSeriesThreshold) return -std::expm1(-x) / lambda;
  return tau * (1.0 - x / 2.0 + x * x / 6.0);
}

double flow_progress(double lambda, double tau) {
  if (lambda == 0.0) return 0.0;
  if (std::isinf(tau)) return 1.0;
  return -std::expm1(-tau * lambda);
}

double flow_decay(double lambda, double tau) {
  if (lambda == 0.0) return 1.0;
  if (std::isinf(tau)) return 0.0;
  return std::exp(-tau * lambda);
}

Eigen::MatrixXd phi_tau(const SpectralOperator& spec, double tau) {
  check_time(tau);
  return spec.compose(gains(spec.eigenvalues(), tau));
}

PredictiveEvaluator::PredictiveEvaluator(const SpectralOperator& spec, const KernelPair& kp,
                                         const Eigen::VectorXd& targets) {
  const Eigen::Index n = spec.size();
  if (kp.train_size() != n || targets.size() != n || kp.ntk_cross.cols() != n ||
      kp.nngp_cross.rows() != n) {
    throw std::invalid_argument("predictive: train dimension mismatch");
  }
  const Eigen::Index m = kp.test_size();
  if (kp.ntk_cross.rows() != m || kp.nngp_cross.cols() != m || kp.nngp_test.rows() != m) {
    throw std::invalid_argument("predictive: test dimension mismatch");
  }
  const Eigen::MatrixXd& u = spec.eigenvectors();
  eigenvalues_ = spec.eigenvalues();
  ntk_query_basis_ = kp.ntk_cross * u;
  nngp_basis_ = spec.to_eigenbasis(kp.nngp_train);
  nngp_cross_basis_ = u.transpose() * kp.nngp_cross;
  query_kernel_ = kp.nngp_test;
  query_kernel_diag_ = kp.nngp_test_diag;
  targets_ = targets;
  targets_basis_ = spec.to_eigenbasis(targets);
}

PredictiveEvaluator PredictiveEvaluator::on_training_set(const SpectralOperator& spec,
                                                         const Eigen::MatrixXd& nngp_train,
                                                         const Eigen::VectorXd& targets) {
  const Eigen::Index n = spec.size();
  if (nngp_train.rows() != n || nngp_train.cols() != n || targets.size() != n) {
    throw std::invalid_argument("predictive: train dimension mismatch");
  }
  const Eigen::MatrixXd& u = spec.eigenvectors();
  PredictiveEvaluator out;
  out.eigenvalues_ = spec.eigenvalues();
  out.ntk_query_basis_ = u * spec.eigenvalues().asDiagonal();
  out.nngp_cross_basis_ = u.transpose() * nngp_train;
  out.nngp_basis_ = out.nngp_cross_basis_ * u;
  out.query_kernel_ = nngp_train;
  out.query_kernel_diag_ = nngp_train.diagonal();
  out.targets_ = targets;
  out.targets_basis_ = spec.to_eigenbasis(targets);
  return out;
}

PredictiveDistribution PredictiveEvaluator::operator()(double tau, CovarianceMode mode) const {
  check_time(tau);
  const Eigen::Index m = query_size();
  PredictiveDistribution out;
  out.tau = tau;
  out.mode = mode;
  out.train_targets = targets_;

  if (tau == 0.0) {
    // Prior law of the initial ensemble.
    out.mean = Eigen::VectorXd::Zero(m);
    out.variances = query_kernel_diag_;
    if (mode == CovarianceMode::Full) out.covariance = query_kernel_;
    return out;
  }

  // B = Theta(x, X) U diag(h): Theta(x, X) Theta^{-1}(I - e^{-tau Theta}) in the eigenbasis.
  const Eigen::MatrixXd b = ntk_query_basis_ * gains(eigenvalues_, tau).asDiagonal();
  out.mean = b * targets_basis_;
  const Eigen::MatrixXd bk = b * nngp_basis_;

  if (mode == CovarianceMode::Diagonal) {
    out.variances = query_kernel_diag_ -
                    2.0 * b.cwiseProduct(nngp_cross_basis_.transpose()).rowwise().sum() +
                    bk.cwiseProduct(b).rowwise().sum();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (out.variances[i] < 0.0) {
        out.variances[i] = 0.0;
        ++out.floored;
      }
    }
    return out;
  }

  const Eigen::MatrixXd coupling = b * nngp_cross_basis_;
  Eigen::MatrixXd cov = query_kernel_ - coupling - coupling.transpose() + bk * b.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("covariance eigensolve failed");
    Eigen::VectorXd values = solver.eigenvalues();
    const Eigen::Index negative = (values.array() < 0.0).count();
    if (negative > 0) {
      out.floored = static_cast<int>(negative);
      values = values.cwiseMax(0.0);
      cov = solver.eigenvectors() * values.asDiagonal() * solver.eigenvectors().transpose();
      cov = 0.5 * (cov + cov.transpose()).eval();
    }
  }
  out.variances = cov.diagonal();
  out.covariance = std::move(cov);
  return out;
}

PredictiveDistribution predictive(const SpectralOperator& spec, const KernelPair& kp,
                                  const Eigen::VectorXd& targets, double tau,
                                  CovarianceMode mode) {
  return PredictiveEvaluator(spec, kp, targets)(tau, mode);
}

}  // namespace ntkinfo
