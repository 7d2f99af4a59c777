#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "ntkinfo/dynamics.hpp"
#include "ntkinfo/mc_oracle.hpp"

using namespace ntkinfo;

namespace {

Eigen::MatrixXd random_points(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(gen);
  return x;
}

FiniteWidthConfig network(int depth, Activation act, int width, int count, std::uint64_t seed) {
  FiniteWidthConfig cfg;
  cfg.width = width;
  cfg.n_networks = count;
  cfg.arch.depth = depth;
  cfg.arch.activation = act;
  cfg.arch.weight_variance = 1.6;
  cfg.arch.bias_variance = 0.1;
  cfg.arch.input_dim = 6;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("finite networks approach the analytic kernels") {
  const Eigen::MatrixXd x = random_points(5, 6, 1);
  for (auto act : {Activation::ReLU, Activation::Erf}) {
    const FiniteWidthConfig cfg = network(2, act, 4096, 50, 3);
    const EmpiricalKernels e = empirical_kernels(cfg, x);
    const KernelBlock k = kernel_gram(cfg.arch, x);
    CHECK(relative_frobenius_error(e.nngp, k.nngp) <= 0.05);
    CHECK(relative_frobenius_error(e.ntk, k.ntk) <= 0.05);
  }
}

TEST_CASE("implicit and explicit hidden weights agree in distribution") {
  const Eigen::MatrixXd x = random_points(3, 6, 2);
  FiniteWidthConfig implicit = network(3, Activation::ReLU, 256, 1, 8);
  FiniteWidthConfig explicit_cfg = implicit;
  explicit_cfg.hidden = HiddenWeightSampling::Explicit;
  explicit_cfg.seed = 9;
  // Per-entry two-sample z statistics over independent networks.
  const int count = 400;
  Eigen::ArrayXXd sum[2][2], sum_sq[2][2];
  for (auto& row : sum) for (auto& m : row) m = Eigen::ArrayXXd::Zero(3, 3);
  for (auto& row : sum_sq) for (auto& m : row) m = Eigen::ArrayXXd::Zero(3, 3);
  for (int r = 0; r < count; ++r) {
    const EmpiricalKernels draws[2] = {finite_network_kernels(implicit, x, r),
                                       finite_network_kernels(explicit_cfg, x, r)};
    for (int m = 0; m < 2; ++m) {
      sum[m][0] += draws[m].nngp.array();
      sum_sq[m][0] += draws[m].nngp.array().square();
      sum[m][1] += draws[m].ntk.array();
      sum_sq[m][1] += draws[m].ntk.array().square();
    }
  }
  for (int kind = 0; kind < 2; ++kind) {
    Eigen::ArrayXXd mean[2], var[2];
    for (int m = 0; m < 2; ++m) {
      mean[m] = sum[m][kind] / count;
      var[m] = (sum_sq[m][kind] / count - mean[m].square()) / (count - 1);
    }
    const Eigen::ArrayXXd z = (mean[0] - mean[1]).abs() / (var[0] + var[1]).sqrt();
    CAPTURE(kind);
    CHECK(z.maxCoeff() < 4.0);
  }
}

TEST_CASE("duplicated inputs give duplicated rows and grams are symmetric") {
  Eigen::MatrixXd x = random_points(4, 6, 3);
  x.row(2) = x.row(0);
  const EmpiricalKernels e = empirical_kernels(network(2, Activation::Erf, 128, 3, 1), x);
  CHECK(e.nngp.row(2) == e.nngp.row(0));
  CHECK(e.ntk.row(2) == e.ntk.row(0));
  CHECK(e.nngp == e.nngp.transpose());
  CHECK(e.ntk == e.ntk.transpose());
}

TEST_CASE("seeded determinism") {
  const Eigen::MatrixXd x = random_points(3, 6, 4);
  const FiniteWidthConfig cfg = network(2, Activation::ReLU, 128, 5, 42);
  const EmpiricalKernels a = empirical_kernels(cfg, x);
  const EmpiricalKernels b = empirical_kernels(cfg, x);
  CHECK(a.nngp == b.nngp);
  CHECK(a.ntk == b.ntk);
  CHECK(empirical_nngp(cfg, x) == a.nngp);
  CHECK(empirical_ntk(cfg, x) == a.ntk);
  FiniteWidthConfig narrow = cfg;
  narrow.width = 32;
  CHECK_THROWS(narrow.validate());
}

TEST_CASE("error shrinks as width doubles") {
  const Eigen::MatrixXd x = random_points(4, 6, 5);
  std::vector<double> narrow, wide;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FiniteWidthConfig a = network(2, Activation::ReLU, 2048, 50, seed);
    FiniteWidthConfig b = a;
    b.width = 4096;
    const KernelBlock k = kernel_gram(a.arch, x);
    narrow.push_back(relative_frobenius_error(empirical_ntk(a, x), k.ntk));
    wide.push_back(relative_frobenius_error(empirical_ntk(b, x), k.ntk));
  }
  std::nth_element(narrow.begin(), narrow.begin() + 5, narrow.end());
  std::nth_element(wide.begin(), wide.begin() + 5, wide.end());
  CHECK(wide[5] < narrow[5]);
}

TEST_CASE("ensemble moments at the trajectory limits") {
  const Eigen::MatrixXd train = random_points(8, 6, 6);
  const Eigen::MatrixXd test = random_points(3, 6, 7);
  const FiniteWidthConfig cfg = network(2, Activation::Erf, 64, 1, 0);
  const KernelPair kp = compute_kernels(cfg.arch, train, test);
  const SpectralOperator spec(kp.ntk_train);
  Eigen::VectorXd y = random_points(8, 1, 8).col(0);

  const EnsembleMoments prior = ensemble_trajectories(spec, kp, y, 0.0, 20000, 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(prior.test.mean[i]) < 3.0 * prior.test.mean_se[i]);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(prior.test.covariance(i, j) - kp.nngp_test(i, j)) <
            3.0 * prior.test.covariance_se(i, j));
    }
  }
  const EnsembleMoments fit = ensemble_trajectories(spec, kp, y, kInfiniteTime, 2000, 2);
  CHECK((fit.train.mean - y).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(fit.train.covariance.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ensemble moments match the analytic predictive law") {
  const Eigen::MatrixXd train = random_points(20, 6, 10);
  const Eigen::MatrixXd test = random_points(5, 6, 11);
  const FiniteWidthConfig cfg = network(3, Activation::ReLU, 64, 1, 0);
  const KernelPair kp = compute_kernels(cfg.arch, train, test);
  const SpectralOperator spec(kp.ntk_train);
  const Eigen::VectorXd y = random_points(20, 1, 12).col(0);
  const PredictiveDistribution p = predictive(spec, kp, y, 1.0);
  const EnsembleMoments e = ensemble_trajectories(spec, kp, y, 1.0, 100000, 13);
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(p.mean[i] - e.test.mean[i]) < 3.0 * e.test.mean_se[i]);
    for (int j = 0; j <= i; ++j) {
      CHECK(std::abs(p.covariance(i, j) - e.test.covariance(i, j)) < 3.0 * e.test.covariance_se(i, j));
    }
  }
}
