#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ntkinfo/kernels.hpp"
#include "oracle.hpp"

using namespace ntkinfo;

namespace {

Eigen::MatrixXd random_points(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(gen);
  return x;
}

ArchitectureSpec arch(int depth, Activation act, double sw = 1.3, double sb = 0.05, int dim = 4) {
  ArchitectureSpec a;
  a.depth = depth;
  a.activation = act;
  a.weight_variance = sw;
  a.bias_variance = sb;
  a.input_dim = dim;
  return a;
}

}  // namespace

TEST_CASE("layer maps agree with quadrature") {
  const double cases[][3] = {{1.0, 1.0, 0.3}, {0.4, 2.5, -0.7}, {3.0, 0.2, 0.6}, {1.5, 1.5, 1.5}};
  for (auto act : {Activation::ReLU, Activation::Erf}) {
    for (const auto& c : cases) {
      CAPTURE(to_string(act));
      CAPTURE(c[2]);
      const DualMap closed = dual_map(act, c[0], c[1], c[2]);
      const oracle::DualPair quad = oracle::quadrature_dual_map(act, c[0], c[1], c[2]);
      CHECK(closed.value == doctest::Approx(quad.value).epsilon(1e-8));
      // The ReLU derivative is singular-free but the quadrature of a step is coarser.
      CHECK(closed.derivative == doctest::Approx(quad.derivative).epsilon(1e-7));
    }
  }
}

TEST_CASE("kernel recursion matches an independent quadrature recursion") {
  const Eigen::MatrixXd x = random_points(3, 4, 11);
  for (int depth : {1, 3}) {
    for (auto act : {Activation::ReLU, Activation::Erf}) {
      const ArchitectureSpec a = arch(depth, act);
      const KernelBlock k = kernel_gram(a, x);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const oracle::ScalarKernels ref =
              oracle::quadrature_kernels(a, x.row(i).transpose(), x.row(j).transpose());
          CHECK(k.nngp(i, j) == doctest::Approx(ref.nngp).epsilon(1e-7));
          CHECK(k.ntk(i, j) == doctest::Approx(ref.ntk).epsilon(1e-7));
        }
      }
    }
  }
}

TEST_CASE("gram matrices are exactly symmetric and positive semidefinite") {
  const Eigen::MatrixXd x = random_points(12, 4, 5);
  const KernelBlock k = kernel_gram(arch(3, Activation::Erf), x);
  CHECK(k.nngp == k.nngp.transpose());
  CHECK(k.ntk == k.ntk.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.ntk);
  CHECK(es.eigenvalues().minCoeff() > -1e-10 * es.eigenvalues().maxCoeff());
}

TEST_CASE("cross blocks are consistent with the joint gram") {
  const Eigen::MatrixXd train = random_points(6, 4, 1);
  const Eigen::MatrixXd test = random_points(3, 4, 2);
  const ArchitectureSpec a = arch(2, Activation::ReLU);
  const KernelPair kp = compute_kernels(a, train, test);
  Eigen::MatrixXd all(9, 4);
  all << train, test;
  const KernelBlock joint = kernel_gram(a, all);
  CHECK(kp.train_size() == 6);
  CHECK(kp.test_size() == 3);
  CHECK((kp.nngp_train - joint.nngp.topLeftCorner(6, 6)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((kp.nngp_cross - joint.nngp.topRightCorner(6, 3)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((kp.ntk_cross - joint.ntk.bottomLeftCorner(3, 6)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((kp.nngp_test - joint.nngp.bottomRightCorner(3, 3)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((kp.nngp_test_diag - kp.nngp_test.diagonal()).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("depth-one relu kernel has the arc-cosine closed form") {
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 0.0, 0.0, 1.0;
  const ArchitectureSpec a = arch(1, Activation::ReLU, 2.0, 0.0, 2);
  const KernelBlock k = kernel_gram(a, x);
  // Orthogonal unit-variance inputs: theta = pi/2, so T = 1/(2 pi) and Tdot = 1/4.
  CHECK(k.nngp(0, 1) == doctest::Approx(2.0 / (2.0 * std::numbers::pi)));
  CHECK(k.ntk(0, 1) == doctest::Approx(2.0 / (2.0 * std::numbers::pi)));
  CHECK(k.nngp(0, 0) == doctest::Approx(1.0));
  CHECK(k.ntk(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("invalid inputs are rejected") {
  const ArchitectureSpec a = arch(2, Activation::Erf);
  CHECK_THROWS_AS(kernel_gram(a, random_points(3, 5, 0)), std::invalid_argument);
  Eigen::MatrixXd bad = random_points(3, 4, 0);
  bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(kernel_gram(a, bad));
  ArchitectureSpec neg = a;
  neg.weight_variance = -1.0;
  CHECK_THROWS(neg.validate());
  ArchitectureSpec shallow = a;
  shallow.depth = 0;
  CHECK_THROWS(shallow.validate());
  CHECK_THROWS(dual_map(Activation::ReLU, 1.0, 1.0, 1.5));
  CHECK_THROWS(dual_map(Activation::Erf, 1.0, 1.0, 2.0));
  CHECK_NOTHROW(dual_map(Activation::Erf, 1.0, 1.0, 1.0 + 1e-13));
  CHECK(activation_from_string("relu") == Activation::ReLU);
  CHECK_THROWS(activation_from_string("tanh"));
}
