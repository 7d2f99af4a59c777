#include "ntkinfo/mc_oracle.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "parallel.hpp"

namespace ntkinfo {

namespace {

using Matrix = Eigen::MatrixXd;

class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    rng_.seed(seq);
  }

  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal_(rng_);
    }
    return m;
  }

  Eigen::VectorXd vector(Eigen::Index n) { return matrix(n, 1); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

Matrix activate(Activation act, const Matrix& h) {
  switch (act) {
    case Activation::ReLU:
      return h.cwiseMax(0.0);
    case Activation::Erf:
      return h.unaryExpr([](double v) { return std::erf(v); });
  }
  throw std::invalid_argument("unknown activation");
}

Matrix activate_derivative(Activation act, const Matrix& h) {
  switch (act) {
    case Activation::ReLU:
      return h.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::Erf:
      return h.unaryExpr(
          [](double v) { return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-v * v); });
  }
  throw std::invalid_argument("unknown activation");
}

struct ThinQR {
  Matrix q;  // rows x cols, orthonormal columns
  Matrix r;  // cols x cols, upper triangular
};

ThinQR thin_qr(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  ThinQR out;
  out.q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  out.r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  return out;
}

// One hidden-to-hidden layer. In implicit mode only the projection W Q is
// stored; W^T delta adds an independent draw on the orthogonal complement.
struct HiddenLayer {
  Matrix weights;  // explicit
  Matrix basis;    // implicit: Q with a_prev = Q R
  Matrix projected;  // implicit: W Q

  Matrix forward(const Matrix& a_prev, HiddenWeightSampling mode, int width, NormalStream& rng) {
    if (mode == HiddenWeightSampling::Explicit) {
      weights = rng.matrix(width, a_prev.rows());
      return weights * a_prev;
    }
    ThinQR qr = thin_qr(a_prev);
    projected = rng.matrix(width, a_prev.cols());
    basis = std::move(qr.q);
    return projected * qr.r;
  }

  Matrix backward(const Matrix& delta, HiddenWeightSampling mode, NormalStream& rng) const {
    if (mode == HiddenWeightSampling::Explicit) return weights.transpose() * delta;
    // W^T delta = Q (W Q)^T delta + (I - Q Q^T) W~^T delta,  W~^T delta = Z S with delta = P S.
    const ThinQR qr = thin_qr(delta);
    const Matrix fresh = rng.matrix(basis.rows(), delta.cols()) * qr.r;
    return basis * (projected.transpose() * delta) + fresh - basis * (basis.transpose() * fresh);
  }
};

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Network kernels on pairwise-distinct points (columns of x_t: n_x x N).
EmpiricalKernels network_kernels_distinct(const FiniteWidthConfig& cfg, const Matrix& x_t,
                                          std::uint64_t index) {
  const ArchitectureSpec& arch = cfg.arch;
  const double sw = std::sqrt(arch.weight_variance);
  const double sb = std::sqrt(arch.bias_variance);
  const double w = cfg.width;
  const Eigen::Index n = x_t.cols();
  NormalStream rng(cfg.seed, index);

  // pre[l], post[l]: pre-activations / activations of hidden layer l (width x N).
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
  std::vector<HiddenLayer> hidden(arch.depth);

  const Matrix w_in = rng.matrix(cfg.width, arch.input_dim);
  const Eigen::VectorXd b_in = rng.vector(cfg.width);
  pre.push_back(sw / std::sqrt(static_cast<double>(arch.input_dim)) * (w_in * x_t));
  pre.back().colwise() += sb * b_in;
  post.push_back(activate(arch.activation, pre.back()));
  for (int l = 1; l < arch.depth; ++l) {
    Matrix h = sw / std::sqrt(w) * hidden[l].forward(post.back(), cfg.hidden, cfg.width, rng);
    h.colwise() += sb * rng.vector(cfg.width);
    post.push_back(activate(arch.activation, h));
    pre.push_back(std::move(h));
  }
  const Eigen::VectorXd w_out = rng.vector(cfg.width);

  const Matrix top_gram = post.back().transpose() * post.back();
  EmpiricalKernels out;
  out.nngp = symmetrized(Matrix::Constant(n, n, arch.bias_variance) +
                         arch.weight_variance / w * top_gram);

  // Readout weights and bias.
  Matrix ntk = out.nngp;
  // delta = dz/dh for the current layer.
  Matrix delta = activate_derivative(arch.activation, pre.back());
  delta.array().colwise() *= (sw / std::sqrt(w) * w_out).array();
  for (int l = arch.depth - 1; l >= 0; --l) {
    const Matrix delta_gram = delta.transpose() * delta;
    const Matrix input_gram =
        l == 0 ? Matrix(x_t.transpose() * x_t) : Matrix(post[l - 1].transpose() * post[l - 1]);
    const double fan_in = l == 0 ? arch.input_dim : w;
    ntk += arch.bias_variance * delta_gram +
           arch.weight_variance / fan_in * delta_gram.cwiseProduct(input_gram);
    if (l > 0) {
      Matrix grad = sw / std::sqrt(w) * hidden[l].backward(delta, cfg.hidden, rng);
      delta = grad.cwiseProduct(activate_derivative(arch.activation, pre[l - 1]));
    }
  }
  out.ntk = symmetrized(ntk);
  return out;
}

// Maps each input row to the index of its first exact duplicate.
std::vector<Eigen::Index> unique_rows(const Matrix& inputs, std::vector<Eigen::Index>& representative) {
  std::map<std::vector<double>, Eigen::Index> seen;
  std::vector<Eigen::Index> slot(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    std::vector<double> key(inputs.cols());
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) key[j] = inputs(i, j);
    auto [it, inserted] = seen.emplace(std::move(key), static_cast<Eigen::Index>(representative.size()));
    if (inserted) representative.push_back(i);
    slot[i] = it->second;
  }
  return slot;
}

Matrix expand(const Matrix& compact, const std::vector<Eigen::Index>& slot) {
  const auto n = static_cast<Eigen::Index>(slot.size());
  Matrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = compact(slot[i], slot[j]);
  }
  return out;
}

SampleMoments moments(const Matrix& draws) {
  // draws: dim x n_draws
  SampleMoments m;
  const Eigen::Index dim = draws.rows();
  const double n = static_cast<double>(draws.cols());
  m.draws = draws.cols();
  m.mean = draws.rowwise().mean();
  const Matrix centered = draws.colwise() - m.mean;
  m.covariance = centered * centered.transpose() / (n - 1.0);
  m.mean_se = (m.covariance.diagonal() / n).cwiseSqrt();
  m.covariance_se.resize(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const Eigen::ArrayXd prod = centered.row(i).array() * centered.row(j).array();
      const double var = (prod - prod.mean()).square().sum() / (n - 1.0);
      m.covariance_se(i, j) = m.covariance_se(j, i) = std::sqrt(var / n);
    }
  }
  return m;
}

// Columns are independent N(0, k) draws.
Matrix gaussian_draws(const Matrix& k, int n_draws, std::uint64_t seed) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrized(k));
  if (solver.info() != Eigen::Success) throw std::runtime_error("joint NNGP eigensolve failed");
  Eigen::VectorXd values = solver.eigenvalues();
  const double top = std::max(values.maxCoeff(), 0.0);
  if (values.minCoeff() < -1e-8 * top) {
    throw std::domain_error("joint NNGP is not positive semidefinite");
  }
  const Matrix root = solver.eigenvectors() * values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  NormalStream rng(seed, 0);
  return root * rng.matrix(k.rows(), n_draws);
}

}  // namespace

void FiniteWidthConfig::validate() const {
  if (width < 64) throw std::invalid_argument("finite width must be >= 64");
  if (n_networks < 1) throw std::invalid_argument("n_networks must be >= 1");
  arch.validate();
}

EmpiricalKernels finite_network_kernels(const FiniteWidthConfig& cfg, const Eigen::MatrixXd& inputs,
                                        std::uint64_t network_index) {
  cfg.validate();
  if (inputs.cols() != cfg.arch.input_dim) {
    throw std::invalid_argument("oracle inputs do not match input_dim");
  }
  if (!inputs.allFinite()) throw std::invalid_argument("oracle inputs must be finite");
  std::vector<Eigen::Index> representative;
  const std::vector<Eigen::Index> slot = unique_rows(inputs, representative);
  if (cfg.hidden == HiddenWeightSampling::Implicit &&
      static_cast<int>(representative.size()) > cfg.width) {
    throw std::invalid_argument("implicit weight sampling needs no more distinct points than width");
  }
  Matrix distinct(static_cast<Eigen::Index>(representative.size()), inputs.cols());
  for (std::size_t r = 0; r < representative.size(); ++r) {
    distinct.row(static_cast<Eigen::Index>(r)) = inputs.row(representative[r]);
  }
  const EmpiricalKernels compact =
      network_kernels_distinct(cfg, distinct.transpose(), network_index);
  return {expand(compact.nngp, slot), expand(compact.ntk, slot)};
}

EmpiricalKernels empirical_kernels(const FiniteWidthConfig& cfg, const Eigen::MatrixXd& inputs) {
  cfg.validate();
  const auto count = static_cast<std::size_t>(cfg.n_networks);
  std::vector<Matrix> nngp(count);
  std::vector<Matrix> ntk(count);
  detail::parallel_for(count, [&](std::size_t i) {
    EmpiricalKernels k = finite_network_kernels(cfg, inputs, i);
    nngp[i] = std::move(k.nngp);
    ntk[i] = std::move(k.ntk);
  });
  const double scale = 1.0 / static_cast<double>(count);
  return {scale * detail::pairwise_sum(nngp, 0, count), scale * detail::pairwise_sum(ntk, 0, count)};
}

Eigen::MatrixXd empirical_nngp(const FiniteWidthConfig& cfg, const Eigen::MatrixXd& inputs) {
  return empirical_kernels(cfg, inputs).nngp;
}

Eigen::MatrixXd empirical_ntk(const FiniteWidthConfig& cfg, const Eigen::MatrixXd& inputs) {
  return empirical_kernels(cfg, inputs).ntk;
}

double relative_frobenius_error(const Eigen::MatrixXd& approx, const Eigen::MatrixXd& exact) {
  return (approx - exact).norm() / exact.norm();
}

EnsembleMoments ensemble_trajectories(const SpectralOperator& spec, const KernelPair& kp,
                                      const Eigen::VectorXd& targets, double tau, int n_draws,
                                      std::uint64_t seed) {
  check_time(tau);
  if (n_draws < 2) throw std::invalid_argument("need at least two ensemble draws");
  const Eigen::Index n = kp.train_size();
  const Eigen::Index m = kp.test_size();
  if (spec.size() != n || targets.size() != n) {
    throw std::invalid_argument("ensemble: dimension mismatch");
  }

  Matrix joint(n + m, n + m);
  joint.topLeftCorner(n, n) = kp.nngp_train;
  joint.topRightCorner(n, m) = kp.nngp_cross;
  joint.bottomLeftCorner(m, n) = kp.nngp_cross.transpose();
  joint.bottomRightCorner(m, m) = kp.nngp_test;
  const Matrix z0 = gaussian_draws(joint, n_draws, seed);

  const Matrix phi = phi_tau(spec, tau);
  const Matrix residual = z0.topRows(n).colwise() - targets;
  const Matrix step = phi * residual;

  EnsembleMoments out;
  out.train = moments(z0.topRows(n) - kp.ntk_train * step);
  if (m > 0) out.test = moments(z0.bottomRows(m) - kp.ntk_cross * step);
  return out;
}

PathLengthSample ensemble_path_lengths(const SpectralOperator& spec, const KernelPair& kp,
                                       const Eigen::VectorXd& targets, double tau, int n_draws,
                                       std::uint64_t seed) {
  check_time(tau);
  if (n_draws < 2) throw std::invalid_argument("need at least two ensemble draws");
  const Eigen::Index n = kp.train_size();
  if (spec.size() != n || targets.size() != n) {
    throw std::invalid_argument("path lengths: dimension mismatch");
  }
  const Matrix residual = gaussian_draws(kp.nngp_train, n_draws, seed).colwise() - targets;
  const Eigen::ArrayXd lambda = spec.eigenvalues().array();
  const Matrix r_basis = spec.eigenvectors().transpose() * residual;

  if (tau == 0.0) return {};
  using Quadrature = boost::math::quadrature::gauss_kronrod<double, 31>;
  Eigen::ArrayXd energy(n_draws);
  Eigen::ArrayXd arc(n_draws);
  for (int d = 0; d < n_draws; ++d) {
    const Eigen::ArrayXd r = r_basis.col(d).array();
    // ||Theta e^{-s Theta} r0||^2 in the eigenbasis.
    auto speed_sq = [&](double s) { return (lambda * (-s * lambda).exp() * r).square().sum(); };
    energy[d] = Quadrature::integrate(speed_sq, 0.0, tau, 20, 1e-12);
    arc[d] = Quadrature::integrate([&](double s) { return std::sqrt(speed_sq(s)); }, 0.0, tau, 20,
                                   1e-10);
  }
  const double count = n_draws;
  auto se = [&](const Eigen::ArrayXd& v) {
    return std::sqrt((v - v.mean()).square().sum() / (count - 1.0) / count);
  };
  PathLengthSample out;
  const Eigen::ArrayXd root = energy.sqrt();
  out.energy_root_mean = root.mean();
  out.energy_root_se = se(root);
  out.energy_mean = energy.mean();
  out.energy_se = se(energy);
  out.arc_length_mean = arc.mean();
  out.arc_length_se = se(arc);
  return out;
}

}  // namespace ntkinfo
