#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpme {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Radial kernel of the thin-plate family on R^d:
///   eta_d(r) = r^(4-d) log r   (d even)
///   eta_d(r) = r^(4-d)         (d odd)
/// with eta_d(0) = 0 by continuity. Only d in {1, 2, 3} is supported; the
/// kernel is not usable for d >= 4.
inline double eta_kernel(int d, double r) {
  if (d < 1 || d > 3)
    throw std::invalid_argument("eta_kernel: intrinsic dimension must be in {1, 2, 3}");
  if (!(r >= 0.0)) throw std::invalid_argument("eta_kernel: radius must be nonnegative");
  if (r == 0.0) return 0.0;
  switch (d) {
    case 1: return r * r * r;
    case 2: return r * r * std::log(r);
    default: return r;
  }
}

/// d(eta_d)/dr. The limit at r -> 0 is 0 for d in {1, 2}; we use 0 for d = 3
/// as well (subgradient choice at the kink).
inline double eta_kernel_deriv(int d, double r) {
  if (d < 1 || d > 3)
    throw std::invalid_argument("eta_kernel_deriv: intrinsic dimension must be in {1, 2, 3}");
  if (r <= 0.0) return 0.0;
  switch (d) {
    case 1: return 3.0 * r * r;
    case 2: return r * (2.0 * std::log(r) + 1.0);
    default: return 1.0;
  }
}

/// Basis (1, r_1, ..., r_d) of the degree-<=1 polynomials on R^d.
inline VectorXd poly_basis(int d, const VectorXd& r) {
  if (r.size() != d) throw std::invalid_argument("poly_basis: point has wrong dimension");
  VectorXd p(d + 1);
  p[0] = 1.0;
  p.tail(d) = r;
  return p;
}

/// One time point's fitted embedding f: R^d -> R^D in spline form,
///   f_l(r) = sum_j s(j,l) eta_d(|r - knot_j|) + sum_k alpha(k,l) p_k(r).
struct SplineModel {
  MatrixXd knots;  // N x d
  MatrixXd s;      // N x D kernel coefficients
  MatrixXd alpha;  // (d+1) x D polynomial coefficients

  int d() const { return static_cast<int>(knots.cols()); }
  int D() const { return static_cast<int>(s.cols()); }
  int knot_count() const { return static_cast<int>(knots.rows()); }

  void validate() const {
    if (knots.rows() != s.rows())
      throw std::invalid_argument("SplineModel: knot/coefficient row mismatch");
    if (alpha.rows() != knots.cols() + 1)
      throw std::invalid_argument("SplineModel: polynomial block has wrong size");
    if (alpha.cols() != s.cols())
      throw std::invalid_argument("SplineModel: coefficient column mismatch");
  }
};

inline VectorXd eval_spline(const SplineModel& m, const VectorXd& r) {
  const int d = m.d();
  if (r.size() != d) throw std::invalid_argument("eval_spline: point has wrong dimension");
  VectorXd out = m.alpha.transpose() * poly_basis(d, r);
  for (int j = 0; j < m.knot_count(); ++j) {
    double rho = (r - m.knots.row(j).transpose()).norm();
    if (rho > 0.0) out.noalias() += m.s.row(j).transpose() * eta_kernel(d, rho);
  }
  return out;
}

/// Rows are evaluation points; returns an (n x D) matrix of images.
inline MatrixXd eval_spline_rows(const SplineModel& m, const MatrixXd& pts) {
  MatrixXd out(pts.rows(), m.D());
  for (int i = 0; i < pts.rows(); ++i)
    out.row(i) = eval_spline(m, pts.row(i).transpose()).transpose();
  return out;
}

/// Jacobian df/dr, D x d.
inline MatrixXd spline_jacobian(const SplineModel& m, const VectorXd& r) {
  const int d = m.d();
  if (r.size() != d) throw std::invalid_argument("spline_jacobian: point has wrong dimension");
  MatrixXd jac = m.alpha.bottomRows(d).transpose();  // linear part
  for (int j = 0; j < m.knot_count(); ++j) {
    VectorXd diff = r - m.knots.row(j).transpose();
    double rho = diff.norm();
    if (rho <= 1e-300) continue;  // kernel gradient vanishes in the limit
    double coef = eta_kernel_deriv(d, rho) / rho;
    jac.noalias() += m.s.row(j).transpose() * (coef * diff).transpose();
  }
  return jac;
}

/// Largest violation of the spline orthogonality constraint
/// sum_j s(j,l) p_k(knot_j), normalized by the largest |s| entry.
inline double orthogonality_residual(const SplineModel& m) {
  const int d = m.d();
  MatrixXd P(d + 1, m.knot_count());
  for (int j = 0; j < m.knot_count(); ++j) P.col(j) = poly_basis(d, m.knots.row(j).transpose());
  double scale = std::max(m.s.cwiseAbs().maxCoeff(), 1e-300);
  return (P * m.s).cwiseAbs().maxCoeff() / scale;
}

/// Solves a (possibly badly scaled) saddle-point system by symmetric
/// equilibration + full-pivot LU; throws `context` when singular.
inline MatrixXd solve_block_system(const MatrixXd& lhs, const MatrixXd& rhs,
                                   const std::string& context) {
  const int n = static_cast<int>(lhs.rows());
  VectorXd scale(n);
  for (int i = 0; i < n; ++i) {
    double m = lhs.row(i).cwiseAbs().maxCoeff();
    scale[i] = m > 0.0 ? 1.0 / std::sqrt(m) : 1.0;
  }
  MatrixXd eq = scale.asDiagonal() * lhs * scale.asDiagonal();
  Eigen::FullPivLU<MatrixXd> lu(eq);
  if (!lu.isInvertible()) throw std::runtime_error(context);
  MatrixXd sol = scale.asDiagonal() * lu.solve(scale.asDiagonal() * rhs);
  if (!sol.allFinite()) throw std::runtime_error(context);
  return sol;
}

/// Per-time-point sets of observations in R^D with strictly increasing times.
struct LongitudinalCloud {
  VectorXd times;               // T
  std::vector<MatrixXd> clouds; // per time: I_t x D
  int d = 1;                    // intrinsic dimension of the manifold sought

  int T() const { return static_cast<int>(times.size()); }
  int D() const { return clouds.empty() ? 0 : static_cast<int>(clouds.front().cols()); }

  void validate() const {
    if (T() < 2) throw std::invalid_argument("LongitudinalCloud: need >= 2 time points");
    if (clouds.size() != static_cast<size_t>(T()))
      throw std::invalid_argument("LongitudinalCloud: times/clouds length mismatch");
    for (int t = 1; t < T(); ++t)
      if (!(times[t] > times[t - 1]))
        throw std::invalid_argument("LongitudinalCloud: times must be strictly increasing");
    const int dim = D();
    for (const auto& c : clouds) {
      if (c.rows() < 1) throw std::invalid_argument("LongitudinalCloud: empty cloud");
      if (c.cols() != dim) throw std::invalid_argument("LongitudinalCloud: ragged ambient dimension");
      if (!c.allFinite()) throw std::invalid_argument("LongitudinalCloud: non-finite coordinate");
    }
    if (d < 1 || d >= dim)
      throw std::invalid_argument("LongitudinalCloud: need 1 <= d < D");
  }
};

}  // namespace lpme
