#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "lpme/reduce.hpp"
#include "lpme/rng.hpp"

using namespace lpme;

TEST_CASE("four corner points with N0 = 4 are returned verbatim") {
  MatrixXd pts(4, 2);
  pts << 0, 0, 1, 0, 0, 1, 1, 1;
  MixtureFit fit = reduce_cloud(pts, 4, 123);
  REQUIRE(fit.centers.rows() == 4);
  for (int i = 0; i < 4; ++i) {
    double best = 1e9;
    for (int j = 0; j < 4; ++j) best = std::min(best, (fit.centers.row(j) - pts.row(i)).norm());
    CHECK(best < 1e-12);
  }
  for (int j = 0; j < 4; ++j) CHECK(fit.weights[j] == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("two well-separated gaussians are recovered") {
  Rng rng(17);
  const int n = 500;
  const double sigma = 0.3;
  MatrixXd pts(2 * n, 2);
  Eigen::Vector2d m1(-4.0, 0.0), m2(4.0, 1.0);
  for (int i = 0; i < n; ++i) {
    pts.row(i) = (m1 + sigma * Eigen::Vector2d(rng.normal(), rng.normal())).transpose();
    pts.row(n + i) = (m2 + sigma * Eigen::Vector2d(rng.normal(), rng.normal())).transpose();
  }
  // labeled per-component sample means, the oracle
  Eigen::Vector2d s1 = pts.topRows(n).colwise().mean();
  Eigen::Vector2d s2 = pts.bottomRows(n).colwise().mean();

  ReduceOptions opt;
  opt.max_components = 2;
  MixtureFit fit = reduce_cloud(pts, 2, 99, 1, opt);
  REQUIRE(fit.centers.rows() == 2);
  int a = fit.centers(0, 0) < fit.centers(1, 0) ? 0 : 1;
  double tol = 3.0 * sigma / std::sqrt(static_cast<double>(n));
  CHECK((fit.centers.row(a).transpose() - s1).norm() < tol);
  CHECK((fit.centers.row(1 - a).transpose() - s2).norm() < tol);
  CHECK(std::abs(fit.weights[0] - 0.5) < 0.1);
  CHECK(std::abs(fit.weights[1] - 0.5) < 0.1);
}

TEST_CASE("weights normalize and stay positive; centers stay in the bounding box") {
  Rng rng(5);
  MatrixXd pts(200, 3);
  for (int i = 0; i < pts.rows(); ++i)
    for (int k = 0; k < 3; ++k) pts(i, k) = rng.uniform(-1.0, 2.0);
  MixtureFit fit = reduce_cloud(pts, 10, 7);
  CHECK(std::abs(fit.weights.sum() - 1.0) < 1e-12);
  CHECK((fit.weights.array() > 0.0).all());
  VectorXd lo = pts.colwise().minCoeff(), hi = pts.colwise().maxCoeff();
  for (int j = 0; j < fit.centers.rows(); ++j)
    for (int k = 0; k < 3; ++k) {
      CHECK(fit.centers(j, k) >= lo[k] - 1e-12);
      CHECK(fit.centers(j, k) <= hi[k] + 1e-12);
    }
}

TEST_CASE("mixture preserves the first moment approximately") {
  Rng rng(6);
  MatrixXd pts(400, 2);
  for (int i = 0; i < pts.rows(); ++i) {
    double r = rng.uniform(-3.0, 3.0);
    pts(i, 0) = r;
    pts(i, 1) = std::sin(r) + 0.1 * rng.normal();
  }
  MixtureFit fit = reduce_cloud(pts, 10, 11);
  VectorXd mixture_mean = fit.centers.transpose() * fit.weights;
  VectorXd sample_mean = pts.colwise().mean().transpose();
  VectorXd lo = pts.colwise().minCoeff(), hi = pts.colwise().maxCoeff();
  double diam = (hi - lo).norm();
  CHECK((mixture_mean - sample_mean).norm() < 0.05 * diam);
}

TEST_CASE("log-likelihood is monotone along the refinement sweep") {
  for (std::uint64_t instance = 0; instance < 3; ++instance) {
    Rng rng(8 + instance);
    MatrixXd pts(300, 2);
    for (int i = 0; i < pts.rows(); ++i) {
      double r = rng.uniform(0.0, 6.0);
      pts(i, 0) = r;
      pts(i, 1) = std::cos(r) + 0.15 * rng.normal();
    }
    MixtureFit cur = fit_mixture(pts, 5, 31);
    for (int N = 6; N <= 25; ++N) {
      MixtureFit next = fit_mixture(pts, N, 31, {}, &cur.centers);
      CHECK(next.log_likelihood >= cur.log_likelihood - 1e-9);
      cur = std::move(next);
    }
  }
}

TEST_CASE("reduction is deterministic given the seed") {
  Rng rng(9);
  MatrixXd pts(150, 2);
  for (int i = 0; i < pts.rows(); ++i)
    for (int k = 0; k < 2; ++k) pts(i, k) = rng.normal();
  MixtureFit a = reduce_cloud(pts, 8, 42);
  MixtureFit b = reduce_cloud(pts, 8, 42);
  CHECK(a.centers == b.centers);
  CHECK(a.weights == b.weights);
  CHECK(a.centers.rows() >= 8);
}

TEST_CASE("degenerate inputs are rejected") {
  MatrixXd same = MatrixXd::Ones(20, 2);
  CHECK_THROWS_WITH_AS(reduce_cloud(same, 3, 1), doctest::Contains("zero-variance"),
                       std::runtime_error);
  MatrixXd pts = MatrixXd::Random(10, 2);
  CHECK_THROWS_AS(reduce_cloud(pts, 11, 1), std::invalid_argument);
  CHECK_THROWS_AS(reduce_cloud(pts, 0, 1), std::invalid_argument);
}
