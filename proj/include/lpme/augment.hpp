#pragma once

#include <cmath>
#include <stdexcept>

#include "lpme/core.hpp"

namespace lpme {

enum class LiftMode { Polar, Spherical };

/// Coordinate lift for closed manifolds: appends scaled angle coordinates so
/// a self-intersecting cloud becomes fittable, to be dropped after fitting.
struct LiftSpec {
  LiftMode mode = LiftMode::Polar;
  double scale = 1.0;       // multiplier on every appended coordinate
  VectorXd center;          // angular origin; empty = cloud centroid

  int input_dim() const { return mode == LiftMode::Polar ? 2 : 3; }
  int output_dim() const { return mode == LiftMode::Polar ? 3 : 5; }
};

/// Appends angle coordinates about spec.center:
///   polar (D=2 -> 3):     c * atan2(y - cy, x - cx) in c * (-pi, pi]
///   spherical (D=3 -> 5): c * theta in [0, c pi], c * phi in c * (-pi, pi]
/// with phi fixed to 0 at the poles. Original coordinates are unchanged.
inline MatrixXd lift(const MatrixXd& points, const LiftSpec& spec) {
  const int D = spec.input_dim();
  if (points.cols() != D) throw std::invalid_argument("lift: mode does not match ambient dimension");
  if (!(spec.scale > 0.0)) throw std::invalid_argument("lift: scale must be positive");
  VectorXd center = spec.center;
  if (center.size() == 0) {
    center = points.rows() > 0 ? VectorXd(points.colwise().mean().transpose())
                               : VectorXd(VectorXd::Zero(D));
  }
  if (center.size() != D) throw std::invalid_argument("lift: center has wrong dimension");
  if (!center.allFinite()) throw std::invalid_argument("lift: center must be finite");

  MatrixXd out(points.rows(), spec.output_dim());
  out.leftCols(D) = points;
  for (int i = 0; i < points.rows(); ++i) {
    VectorXd rel = points.row(i).transpose() - center;
    if (rel.norm() == 0.0) throw std::invalid_argument("lift: undefined angle (point equals center)");
    if (spec.mode == LiftMode::Polar) {
      double phi = std::atan2(rel[1], rel[0]);
      if (phi <= -M_PI) phi = M_PI;  // land on (-pi, pi]
      out(i, D) = spec.scale * phi;
    } else {
      double rho = rel.norm();
      double theta = std::acos(std::clamp(rel[2] / rho, -1.0, 1.0));
      double phi = std::sin(theta) < 1e-12 ? 0.0 : std::atan2(rel[1], rel[0]);
      if (phi <= -M_PI) phi = M_PI;
      out(i, D) = spec.scale * theta;
      out(i, D + 1) = spec.scale * phi;
    }
  }
  return out;
}

/// Truncates lifted points back to their first original_D coordinates.
inline MatrixXd drop(const MatrixXd& points, int original_D) {
  if (points.rows() == 0) return MatrixXd(0, original_D);
  if (points.cols() <= original_D)
    throw std::invalid_argument("drop: points carry no augmented coordinates");
  return points.leftCols(original_D);
}

}  // namespace lpme
