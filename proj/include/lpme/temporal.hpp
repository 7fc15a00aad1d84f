#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lpme/core.hpp"

namespace lpme {

/// Weighted cubic smoothing spline over time for a block of coefficient
/// trajectories, g(t) = sum_i delta_i |t - t_i|^3 + nu_0 + nu_1 t, fitted
/// column-wise with the natural-spline side condition T delta = 0.
struct TemporalSpline {
  VectorXd times;    // T knots
  MatrixXd delta;    // T x M
  MatrixXd nu;       // 2 x M
  double gamma = 0.0;
  VectorXd weights;  // the w_t used in the fit

  int M() const { return static_cast<int>(delta.cols()); }

  VectorXd eval(double t) const {
    VectorXd out = nu.row(0).transpose() + t * nu.row(1).transpose();
    for (int i = 0; i < times.size(); ++i) {
      double a = std::abs(t - times[i]);
      out.noalias() += delta.row(i).transpose() * (a * a * a);
    }
    return out;
  }
};

/// Normalized inverse-error weights w_t = 1 / (tau_t sum_i 1/tau_i).
/// Zero errors are floored at 1e-12 first; rounding is folded into the last
/// weight so that the left-to-right sum is exactly one.
inline VectorXd temporal_weights(const VectorXd& tau) {
  const int T = static_cast<int>(tau.size());
  if (T < 1) throw std::invalid_argument("temporal_weights: empty input");
  if ((tau.array() < 0.0).any()) throw std::invalid_argument("temporal_weights: negative error");
  VectorXd floored = tau.cwiseMax(1e-12);
  VectorXd inv = floored.cwiseInverse();
  VectorXd w = inv / inv.sum();
  double partial = 0.0;
  for (int t = 0; t + 1 < T; ++t) partial += w[t];
  w[T - 1] = 1.0 - partial;
  while (partial + w[T - 1] != 1.0)
    w[T - 1] = std::nextafter(w[T - 1], partial + w[T - 1] < 1.0
                                            ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity());
  if ((w.array() <= 0.0).any()) throw std::runtime_error("temporal_weights: nonpositive weight");
  return w;
}

/// Solves the weighted temporal smoothing system
///   [ 2AWA + 2gA   2AWP   P ] [delta]   [2AWB]
///   [ 2P'WA        2P'WP  0 ] [ nu  ] = [2P'WB]
///   [ P'           0      0 ] [ m   ]   [  0  ]
/// with A_ij = |t_i - t_j|^3, P the (1, t) design, W = diag(w). The
/// multiplier block m is checked against the side condition and discarded.
inline TemporalSpline temporal_smooth(const MatrixXd& b, const VectorXd& times,
                                      const VectorXd& tau, double gamma) {
  const int T = static_cast<int>(times.size());
  const int M = static_cast<int>(b.cols());
  if (b.rows() != T || tau.size() != T)
    throw std::invalid_argument("temporal_smooth: times/coefficients/errors length mismatch");
  if (T < 3) throw std::invalid_argument("temporal_smooth: need >= 3 time points");
  if (gamma < 0.0) throw std::invalid_argument("temporal_smooth: negative gamma");
  for (int i = 0; i < T; ++i)
    for (int j = i + 1; j < T; ++j)
      if (times[i] == times[j]) throw std::invalid_argument("temporal_smooth: duplicate time stamps");

  VectorXd w = temporal_weights(tau);
  MatrixXd A(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) {
      double a = std::abs(times[i] - times[j]);
      A(i, j) = a * a * a;
    }
  MatrixXd P(T, 2);
  P.col(0).setOnes();
  P.col(1) = times;
  MatrixXd W = w.asDiagonal();

  const int n = T + 4;
  MatrixXd lhs = MatrixXd::Zero(n, n);
  MatrixXd AW = A * W;
  lhs.topLeftCorner(T, T) = 2.0 * AW * A + 2.0 * gamma * A;
  lhs.block(0, T, T, 2) = 2.0 * AW * P;
  lhs.block(0, T + 2, T, 2) = P;
  lhs.block(T, 0, 2, T) = 2.0 * P.transpose() * W * A;
  lhs.block(T, T, 2, 2) = 2.0 * P.transpose() * W * P;
  lhs.block(T + 2, 0, 2, T) = P.transpose();

  MatrixXd rhs(n, M);
  rhs.topRows(T) = 2.0 * AW * b;
  rhs.middleRows(T, 2) = 2.0 * P.transpose() * W * b;
  rhs.bottomRows(2).setZero();

  MatrixXd sol = solve_block_system(lhs, rhs, "temporal_smooth: singular system");

  TemporalSpline out;
  out.times = times;
  out.delta = sol.topRows(T);
  out.nu = sol.middleRows(T, 2);
  out.gamma = gamma;
  out.weights = w;

  double scale = std::max(1.0, out.delta.cwiseAbs().maxCoeff()) *
                 std::max(1.0, times.cwiseAbs().maxCoeff());
  if ((P.transpose() * out.delta).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::runtime_error("temporal_smooth: side condition violated");
  return out;
}

/// Temporal roughness functional value delta^T A delta summed over columns.
inline double temporal_roughness(const TemporalSpline& g) {
  const int T = static_cast<int>(g.times.size());
  MatrixXd A(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) {
      double a = std::abs(g.times[i] - g.times[j]);
      A(i, j) = a * a * a;
    }
  return (g.delta.transpose() * A * g.delta).trace();
}

}  // namespace lpme
