#include "ntkinfo/gaussian_task.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace ntkinfo {

namespace {

double log_det_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error(std::string(what) + " is singular or not positive definite");
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

std::uint64_t split_stream(Split split) { return split == Split::Train ? 0x7472 : 0x7465; }

Eigen::VectorXd padded_singular_values(const GaussianTask& task) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(task.target_dim());
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(task.mixing).singularValues();
  s.head(sv.size()) = sv;
  return s;
}

}  // namespace

GaussianTask GaussianTask::isotropic(Eigen::MatrixXd mixing, double sigma_x, double sigma_y,
                                     std::uint64_t seed) {
  GaussianTask task;
  task.lx = sigma_x * Eigen::MatrixXd::Identity(mixing.cols(), mixing.cols());
  task.ly = sigma_y * Eigen::MatrixXd::Identity(mixing.rows(), mixing.rows());
  task.mixing = std::move(mixing);
  task.sigma_x = sigma_x;
  task.sigma_y = sigma_y;
  task.seed = seed;
  task.validate();
  return task;
}

GaussianTask GaussianTask::with_information(int input_dim, double target_mi, double sigma_x,
                                            double sigma_y, std::uint64_t seed) {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (!(target_mi >= 0.0)) throw std::invalid_argument("target_mi must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(1, input_dim);
  for (int j = 0; j < input_dim; ++j) a(0, j) = normal(rng);
  // 1/2 log(1 + sigma_x^2 s^2 / sigma_y^2) = target  <=>  s^2 = (e^{2 target} - 1) sigma_y^2 / sigma_x^2.
  const double s = std::sqrt(std::expm1(2.0 * target_mi)) * sigma_y / sigma_x;
  a *= s / a.norm();
  return isotropic(std::move(a), sigma_x, sigma_y, seed);
}

bool GaussianTask::is_isotropic() const {
  const auto nx = mixing.cols();
  const auto ny = mixing.rows();
  return lx.isApprox(sigma_x * Eigen::MatrixXd::Identity(nx, nx), 0.0) &&
         ly.isApprox(sigma_y * Eigen::MatrixXd::Identity(ny, ny), 0.0);
}

void GaussianTask::validate() const {
  if (mixing.rows() < 1 || mixing.cols() < 1) throw std::invalid_argument("empty mixing matrix");
  if (lx.rows() != mixing.cols() || lx.cols() != mixing.cols()) {
    throw std::invalid_argument("L^x must be n_x x n_x");
  }
  if (ly.rows() != mixing.rows() || ly.cols() != mixing.rows()) {
    throw std::invalid_argument("L^y must be n_y x n_y");
  }
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) throw std::invalid_argument("scales must be positive");
  if (!lx.allFinite() || !ly.allFinite() || !mixing.allFinite()) {
    throw std::invalid_argument("task matrices must be finite");
  }
}

TaskCovariances covariances(const GaussianTask& task) {
  TaskCovariances c;
  c.xx = task.lx * task.lx.transpose();
  c.yy = task.ly * task.ly.transpose() + task.mixing * c.xx * task.mixing.transpose();
  c.xy = c.xx * task.mixing.transpose();
  return c;
}

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

TaskSample sample(const GaussianTask& task, Eigen::Index n, Split split) {
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  task.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(task.seed),
                    static_cast<std::uint32_t>(task.seed >> 32),
                    static_cast<std::uint32_t>(split_stream(split))};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;

  // Row-major fill so the stream order does not depend on Eigen's storage order.
  Eigen::MatrixXd eps_x(n, task.input_dim());
  Eigen::MatrixXd eps_y(n, task.target_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < eps_x.cols(); ++j) eps_x(i, j) = normal(rng);
    for (Eigen::Index j = 0; j < eps_y.cols(); ++j) eps_y(i, j) = normal(rng);
  }
  TaskSample out;
  out.split = split;
  out.inputs = eps_x * task.lx.transpose();
  out.targets = eps_y * task.ly.transpose() + out.inputs * task.mixing.transpose();
  return out;
}

double mi_from_covariances(const GaussianTask& task) {
  task.validate();
  const TaskCovariances c = covariances(task);
  const Eigen::LLT<Eigen::MatrixXd> xx(c.xx);
  if (xx.info() != Eigen::Success) throw std::domain_error("Sigma_x is singular");
  const Eigen::MatrixXd conditional = c.yy - c.xy.transpose() * xx.solve(c.xy);
  return 0.5 * (log_det_spd(c.yy, "Sigma_y") -
                log_det_spd(0.5 * (conditional + conditional.transpose()), "Sigma_y|x"));
}

double exact_mi(const GaussianTask& task) {
  task.validate();
  const double general = mi_from_covariances(task);
  if (!task.is_isotropic()) return general;

  const Eigen::VectorXd s = padded_singular_values(task);
  const double ratio = task.sigma_x * task.sigma_x / (task.sigma_y * task.sigma_y);
  double closed = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) closed += 0.5 * std::log1p(ratio * s[i] * s[i]);
  if (std::abs(closed - general) > 1e-10 * std::max(1.0, std::abs(closed))) {
    throw std::logic_error("closed-form and determinant mutual information disagree: " +
                           std::to_string(closed) + " vs " + std::to_string(general));
  }
  return closed;
}

double entropy_y(const GaussianTask& task) {
  task.validate();
  const double ny = task.target_dim();
  const double base = 0.5 * ny * std::log(2.0 * std::numbers::pi * std::numbers::e);
  if (!task.is_isotropic()) return base + 0.5 * log_det_spd(covariances(task).yy, "Sigma_y");
  const Eigen::VectorXd s = padded_singular_values(task);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    sum += std::log(task.sigma_y * task.sigma_y + task.sigma_x * task.sigma_x * s[i] * s[i]);
  }
  return base + 0.5 * sum;
}

double gib_frontier_value(double rho_squared, double rate) {
  if (!(rate >= 0.0)) throw std::invalid_argument("I(Z;X) must be nonnegative");
  if (!(rho_squared >= 0.0 && rho_squared < 1.0)) {
    throw std::invalid_argument("squared canonical correlation must lie in [0, 1)");
  }
  // -1/2 log(1 - rho^2 (1 - e^{-2R})), written with log1p/expm1 for small R.
  return -0.5 * std::log1p(rho_squared * std::expm1(-2.0 * rate));
}

Eigen::VectorXd gib_frontier(const GaussianTask& task, const Eigen::VectorXd& izx_grid) {
  if (task.target_dim() != 1) throw std::invalid_argument("frontier requires n_y = 1");
  const double rho_squared = -std::expm1(-2.0 * exact_mi(task));
  Eigen::VectorXd out(izx_grid.size());
  for (Eigen::Index i = 0; i < izx_grid.size(); ++i) {
    out[i] = gib_frontier_value(rho_squared, izx_grid[i]);
  }
  return out;
}

}  // namespace ntkinfo
