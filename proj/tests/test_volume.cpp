#include "doctest.h"

#include <cmath>

#include "lpme/pme.hpp"
#include "lpme/volume.hpp"

using namespace lpme;

namespace {

// Longitudinal model whose every time slice is the analytic surface
// (theta, phi) -> radius * sphere(theta, phi), built through the standard
// grid solve so the temporal machinery is exercised as in production.
LongitudinalModel sphere_model(double radius, int m = 10) {
  MatrixXd grid(m * m, 2);
  MatrixXd Y(m * m, 3);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double theta = M_PI * i / (m - 1.0);
      double phi = 2.0 * M_PI * j / (m - 1.0);
      int row = i * m + j;
      grid(row, 0) = theta;
      grid(row, 1) = phi;
      Y(row, 0) = radius * std::sin(theta) * std::cos(phi);
      Y(row, 1) = radius * std::sin(theta) * std::sin(phi);
      Y(row, 2) = radius * std::cos(theta);
    }
  SplineModel slice = solve_penalized_spline(grid, Y, VectorXd::Ones(m * m), 0.0);

  LongitudinalModel model;
  model.d = 2;
  model.D = 3;
  model.times.resize(3);
  model.times << 0.0, 1.0, 2.0;
  model.grid = grid;
  VectorXd b = flatten_coefficients(slice.s, slice.alpha);
  model.B.resize(3, b.size());
  for (int t = 0; t < 3; ++t) model.B.row(t) = b.transpose();
  model.tau = VectorXd::Constant(3, 1.0);
  model.lambda_star = VectorXd::Zero(3);
  model.gamma_star = 0.0;
  model.spline = temporal_smooth(model.B, model.times, model.tau, 0.0);
  model.w = model.spline.weights;
  return model;
}

}  // namespace

TEST_CASE("voxel counting recovers the unit sphere volume within 5%") {
  LongitudinalModel m = sphere_model(1.0);
  double vol = estimate_volume(m, 1.0, 0.05, 64);
  double truth = 4.0 * M_PI / 3.0;
  CHECK(std::abs(vol - truth) / truth < 0.05);
}

TEST_CASE("halving the voxel size moves the sphere volume by under 2%") {
  LongitudinalModel m = sphere_model(1.0);
  double coarse = estimate_volume(m, 1.0, 0.1, 64);
  double fine = estimate_volume(m, 1.0, 0.05, 64);
  CHECK(std::abs(coarse - fine) / fine < 0.02);
}

TEST_CASE("doubling the radius scales the volume by eight") {
  LongitudinalModel unit = sphere_model(1.0, 8);
  LongitudinalModel twice = sphere_model(2.0, 8);
  double v1 = estimate_volume(unit, 0.0, 0.05, 48);
  double v2 = estimate_volume(twice, 0.0, 0.1, 48);
  CHECK(std::abs(v2 / v1 - 8.0) / 8.0 < 0.05);
}

TEST_CASE("an open flat sheet is rejected as not watertight") {
  const int m = 6;
  MatrixXd grid(m * m, 2);
  MatrixXd Y(m * m, 3);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      int row = i * m + j;
      grid(row, 0) = i / (m - 1.0);
      grid(row, 1) = j / (m - 1.0);
      Y(row, 0) = grid(row, 0);
      Y(row, 1) = grid(row, 1);
      Y(row, 2) = 0.0;
    }
  SplineModel slice = solve_penalized_spline(grid, Y, VectorXd::Ones(m * m), 0.0);
  LongitudinalModel model;
  model.d = 2;
  model.D = 3;
  model.times.resize(3);
  model.times << 0.0, 0.5, 1.0;
  model.grid = grid;
  VectorXd b = flatten_coefficients(slice.s, slice.alpha);
  model.B.resize(3, b.size());
  for (int t = 0; t < 3; ++t) model.B.row(t) = b.transpose();
  model.tau = VectorXd::Constant(3, 1.0);
  model.spline = temporal_smooth(model.B, model.times, model.tau, 0.0);
  model.w = model.spline.weights;
  CHECK_THROWS_WITH_AS(estimate_volume(model, 0.5, 0.05, 40),
                       doctest::Contains("not watertight"), std::runtime_error);
}

TEST_CASE("volume preconditions") {
  LongitudinalModel m = sphere_model(1.0, 6);
  CHECK_THROWS_AS(estimate_volume(m, 0.0, -0.1, 32), std::invalid_argument);
  m.d = 1;
  CHECK_THROWS_AS(estimate_volume(m, 0.0, 0.1, 32), std::invalid_argument);
}
