#include "ntkinfo/info_metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace ntkinfo {

namespace {

// Per-example variances are raised to this floor before evaluating densities;
// late-time train points collapse to Dirac-like laws.
constexpr double kVarianceFloor = 1e-12;

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

void check_query(const PredictiveDistribution& pred, Eigen::Index n, const char* what) {
  if (pred.mean.size() != n || pred.variances.size() != n) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

struct MeanAndError {
  double mean;
  double se;
};

MeanAndError mean_and_error(const Eigen::VectorXd& v) {
  const double n = static_cast<double>(v.size());
  const double mean = v.mean();
  if (v.size() < 2) return {mean, 0.0};
  const double var = (v.array() - mean).square().sum() / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace

void MetricConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
  if (!(observation_variance > 0.0)) {
    throw std::invalid_argument("observation_variance must be positive");
  }
}

double expected_loss(const PredictiveDistribution& pred, const Eigen::VectorXd& targets) {
  check_query(pred, targets.size(), "expected_loss");
  return 0.5 * (targets - pred.mean).squaredNorm() + 0.5 * pred.variances.sum();
}

double log_likelihood_constant(int target_dim) {
  return -0.5 * target_dim * std::log(2.0 * std::numbers::pi);
}

Estimate izy_lower(const PredictiveDistribution& pred, const Eigen::VectorXd& targets, double hy,
                   double observation_variance) {
  check_query(pred, targets.size(), "izy_lower");
  if (targets.size() == 0) throw std::invalid_argument("izy_lower: empty evaluation set");
  const double s = observation_variance;
  const Eigen::VectorXd per_point =
      (hy - 0.5 * std::log(2.0 * std::numbers::pi * s)) -
      ((targets - pred.mean).array().square() + pred.variances.array()) / (2.0 * s);
  const MeanAndError m = mean_and_error(per_point);
  return {m.mean, m.se};
}

Eigen::MatrixXd izx_standard_draws(const MetricConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd eps(cfg.batch_size, cfg.mc_samples);
  for (Eigen::Index i = 0; i < eps.rows(); ++i) {
    for (Eigen::Index s = 0; s < eps.cols(); ++s) eps(i, s) = normal(rng);
  }
  return eps;
}

IzxBounds izx_bounds(const Eigen::VectorXd& means, const Eigen::VectorXd& variances,
                     const Eigen::MatrixXd& standard_draws) {
  const Eigen::Index n = means.size();
  if (n < 2) throw std::invalid_argument("izx_bounds needs at least two examples");
  if (variances.size() != n || standard_draws.rows() != n || standard_draws.cols() < 1) {
    throw std::invalid_argument("izx_bounds: dimension mismatch");
  }

  IzxBounds out;
  Eigen::ArrayXd var(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(variances[i] >= kVarianceFloor)) {
      ++out.degenerate;
      var[i] = kVarianceFloor;
    } else {
      var[i] = variances[i];
    }
  }
  const Eigen::ArrayXd mu = means.array();
  const Eigen::ArrayXd half_precision = 0.5 / var;
  const Eigen::ArrayXd log_norm = -0.5 * (2.0 * std::numbers::pi * var).log();
  const Eigen::ArrayXd sd = var.sqrt();
  const double log_n = std::log(static_cast<double>(n));
  const double log_n_minus_1 = std::log(static_cast<double>(n - 1));
  const Eigen::Index samples = standard_draws.cols();

  Eigen::VectorXd lower_i(n);
  Eigen::VectorXd upper_i(n);
  // Two fused passes over j != i per example: running max, then shifted exp-sum
  // of log N(z_is; mu_j, var_j) across all draws s at once.
  Eigen::ArrayXd z(samples);
  Eigen::ArrayXd peak(samples);
  Eigen::ArrayXd acc(samples);
  Eigen::ArrayXd lse_others(samples);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    z = mu[i] + sd[i] * standard_draws.row(i).transpose().array();
    const Eigen::ArrayXd own = log_norm[i] - (z - mu[i]).square() * half_precision[i];
    peak.setConstant(neg_inf);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      peak = peak.max(log_norm[j] - (z - mu[j]).square() * half_precision[j]);
    }
    acc.setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      acc += (log_norm[j] - (z - mu[j]).square() * half_precision[j] - peak).exp();
    }
    lse_others = peak + acc.log();
    double lower_sum = 0.0;
    double upper_sum = 0.0;
    for (Eigen::Index s = 0; s < samples; ++s) {
      lower_sum += own[s] - log_add_exp(lse_others[s], own[s]) + log_n;
      upper_sum += own[s] - lse_others[s] + log_n_minus_1;
    }
    lower_i[i] = lower_sum / static_cast<double>(samples);
    upper_i[i] = upper_sum / static_cast<double>(samples);
  }
  const MeanAndError lo = mean_and_error(lower_i);
  const MeanAndError up = mean_and_error(upper_i);
  out.lower = lo.mean;
  out.lower_se = lo.se;
  out.upper = up.mean;
  out.upper_se = up.se;
  return out;
}

IzxBounds izx_bounds(const Eigen::VectorXd& means, const Eigen::VectorXd& variances,
                     const MetricConfig& cfg) {
  cfg.validate();
  if (means.size() < cfg.batch_size || variances.size() < cfg.batch_size) {
    throw std::invalid_argument("izx_bounds: fewer examples than batch_size");
  }
  return izx_bounds(means.head(cfg.batch_size), variances.head(cfg.batch_size),
                    izx_standard_draws(cfg));
}

double izd_upper(const PredictiveDistribution& pred, const Eigen::VectorXd& prior_diag) {
  check_query(pred, prior_diag.size(), "izd_upper");
  if (prior_diag.size() == 0) throw std::invalid_argument("izd_upper: empty evaluation set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < prior_diag.size(); ++i) {
    const double k = prior_diag[i];
    if (!(k > 0.0)) {
      throw std::invalid_argument("izd_upper: nonpositive prior variance at point " +
                                  std::to_string(i));
    }
    const double ratio = std::max(pred.variances[i], kVarianceFloor) / k;
    const double mu = pred.mean[i];
    total += 0.5 * (ratio + mu * mu / k - 1.0 - std::log(ratio));
  }
  return total / static_cast<double>(prior_diag.size());
}

double fisher_trace(const KernelPair& kp) { return kp.ntk_train.trace(); }

SpectralMetrics::SpectralMetrics(const SpectralOperator& spec, const Eigen::MatrixXd& nngp_train,
                                 const Eigen::VectorXd& targets) {
  const Eigen::Index n = spec.size();
  if (nngp_train.rows() != n || nngp_train.cols() != n || targets.size() != n) {
    throw std::invalid_argument("spectral metrics: dimension mismatch");
  }
  eigenvalues_ = spec.eigenvalues();
  const Eigen::MatrixXd& u = spec.eigenvectors();
  const Eigen::VectorXd y = spec.to_eigenbasis(targets);
  residual_weight_ = (u.transpose() * nngp_train * u).diagonal() + y.cwiseAbs2();
  ntk_trace_ = eigenvalues_.sum();
}

double SpectralMetrics::path_length_bound(double tau) const {
  check_time(tau);
  double sum = 0.0;
  for (Eigen::Index a = 0; a < eigenvalues_.size(); ++a) {
    const double lambda = eigenvalues_[a];
    sum += lambda * flow_progress(lambda, 2.0 * tau) * residual_weight_[a];
  }
  return std::sqrt(0.5 * std::max(sum, 0.0));
}

double SpectralMetrics::itheta_d_lower(double tau) const {
  check_time(tau);
  if (std::isinf(tau)) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (Eigen::Index a = 0; a < eigenvalues_.size(); ++a) {
    // (1 - e^{-tau l})^2 / l = l h^2, which vanishes for a null direction.
    const double lambda = eigenvalues_[a];
    const double h = flow_gain(lambda, tau);
    sum += lambda * h * h * residual_weight_[a];
  }
  return sum + tau * ntk_trace_;
}

double SpectralMetrics::ditheta_d_dtau(double tau) const {
  check_time(tau);
  double sum = 0.0;
  for (Eigen::Index a = 0; a < eigenvalues_.size(); ++a) {
    const double lambda = eigenvalues_[a];
    sum += 2.0 * flow_progress(lambda, tau) * flow_decay(lambda, tau) * residual_weight_[a];
  }
  return sum + ntk_trace_;
}

double path_length_bound(const SpectralOperator& spec, const KernelPair& kp,
                         const Eigen::VectorXd& targets, double tau) {
  return SpectralMetrics(spec, kp.nngp_train, targets).path_length_bound(tau);
}

double itheta_d_lower(const SpectralOperator& spec, const KernelPair& kp,
                      const Eigen::VectorXd& targets, double tau) {
  return SpectralMetrics(spec, kp.nngp_train, targets).itheta_d_lower(tau);
}

double ditheta_d_dtau(const SpectralOperator& spec, const KernelPair& kp,
                      const Eigen::VectorXd& targets, double tau) {
  return SpectralMetrics(spec, kp.nngp_train, targets).ditheta_d_dtau(tau);
}

}  // namespace ntkinfo
