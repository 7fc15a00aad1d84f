#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <string>

#include "lpme/core.hpp"
#include "lpme/parallel.hpp"
#include "lpme/projection.hpp"

namespace lpme {

/// E(i, j) = eta_d(|a_i - b_j|) with rows of a and b as points.
inline MatrixXd kernel_matrix(int d, const MatrixXd& a, const MatrixXd& b) {
  MatrixXd E(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.rows(); ++j)
      E(i, j) = eta_kernel(d, (a.row(i) - b.row(j)).norm());
  return E;
}

/// R(k, j) = p_k(r_j), the (d+1) x N polynomial design matrix.
inline MatrixXd poly_matrix(int d, const MatrixXd& pts) {
  MatrixXd R(d + 1, pts.rows());
  for (int j = 0; j < pts.rows(); ++j) R.col(j) = poly_basis(d, pts.row(j).transpose());
  return R;
}

struct SplineSystem {
  MatrixXd lhs;  // (N+d+1) x (N+d+1) block matrix [[E + lambda W^-1, R^T], [R, 0]]
  MatrixXd rhs;  // (N+d+1) x D, [Y; 0]
};

/// Assembles the weighted penalized-spline block system. Unit weights give
/// the classic system with E + lambda I in the upper-left block.
inline SplineSystem assemble_spline_system(const MatrixXd& params, const MatrixXd& targets,
                                           const VectorXd& weights, double lambda) {
  const int N = static_cast<int>(params.rows());
  const int d = static_cast<int>(params.cols());
  const int D = static_cast<int>(targets.cols());
  if (targets.rows() != N || weights.size() != N)
    throw std::invalid_argument("assemble_spline_system: size mismatch");
  if (N < d + 2) throw std::invalid_argument("assemble_spline_system: need at least d + 2 knots");
  if (lambda < 0.0) throw std::invalid_argument("assemble_spline_system: negative penalty");
  if ((weights.array() <= 0.0).any())
    throw std::invalid_argument("assemble_spline_system: weights must be positive");

  SplineSystem sys;
  sys.lhs = MatrixXd::Zero(N + d + 1, N + d + 1);
  sys.rhs = MatrixXd::Zero(N + d + 1, D);
  sys.lhs.topLeftCorner(N, N) = kernel_matrix(d, params, params);
  sys.lhs.topLeftCorner(N, N).diagonal() += lambda * weights.cwiseInverse();
  MatrixXd R = poly_matrix(d, params);
  sys.lhs.topRightCorner(N, d + 1) = R.transpose();
  sys.lhs.bottomLeftCorner(d + 1, N) = R;
  sys.rhs.topRows(N) = targets;
  return sys;
}

/// Solves the block system for the penalized spline through (params -> targets)
/// with roughness penalty lambda and observation weights. The result satisfies
/// the orthogonality constraint R s = 0.
inline SplineModel solve_penalized_spline(const MatrixXd& params, const MatrixXd& targets,
                                          const VectorXd& weights, double lambda) {
  const int N = static_cast<int>(params.rows());
  const int d = static_cast<int>(params.cols());
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      if ((params.row(i) - params.row(j)).norm() < 1e-12)
        throw std::runtime_error("degenerate knot configuration: duplicate knots");

  SplineSystem sys = assemble_spline_system(params, targets, weights, lambda);
  MatrixXd sol = solve_block_system(sys.lhs, sys.rhs, "degenerate knot configuration");

  SplineModel model;
  model.knots = params;
  model.s = sol.topRows(N);
  model.alpha = sol.bottomRows(d + 1);
  return model;
}

/// Thin-plate roughness functional value s^T E s summed over output dims.
inline double roughness_value(const SplineModel& m) {
  MatrixXd E = kernel_matrix(m.d(), m.knots, m.knots);
  return (m.s.transpose() * E * m.s).trace();
}

/// Mean squared distance of points to the manifold, 1/I sum |x_i - f(pi(x_i))|^2.
/// Projections use the model knots plus the projector's automatic grid.
inline double msd(const SplineModel& model, const MatrixXd& points, ProjectOptions opt = {-1, 0, 0, 0}) {
  if (points.rows() == 0) return 0.0;
  if (opt.max_steps < 0) opt = ProjectOptions{200, 1e-8, 4, -1, true};
  Projector proj(model, model.knots, opt);
  double total = 0.0;
  for (int i = 0; i < points.rows(); ++i) {
    double obj = 0.0;
    proj.project(points.row(i).transpose(), &obj);
    total += obj;
  }
  return total / static_cast<double>(points.rows());
}

struct PmeOptions {
  VectorXd lambda_grid;     // empty = exp(g), g = -15..5
  double eps = 1e-3;        // relative tolerance on the weighted center objective
  int max_iterations = 100;
  int threads = 1;
  // projection policy inside the alternation and for the per-lambda data MSD
  int inner_refine_top = 2;
  int inner_max_steps = 30;
  double inner_grad_tol = 1e-7;
};

inline VectorXd default_lambda_grid() {
  VectorXd g(21);
  for (int i = 0; i < 21; ++i) g[i] = std::exp(static_cast<double>(i - 15));
  return g;
}

inline VectorXd default_gamma_grid() {
  VectorXd g(21);
  for (int i = 0; i < 21; ++i) g[i] = std::exp(static_cast<double>(i - 10));
  return g;
}

struct PmeFit {
  SplineModel model;
  double lambda_star = 0.0;
  double tau = 0.0;          // data MSD at lambda_star
  MatrixXd params;           // final knot parameters pi_f(mu_j)
  int iterations = 0;
  bool converged = false;
  VectorXd objective_trace;  // weighted objective + penalty per iteration, winning lambda
  VectorXd lambda_grid;      // grid actually used
  VectorXd tau_by_lambda;    // data MSD per grid value
};

namespace detail {

struct SingleLambdaFit {
  SplineModel model;
  MatrixXd params;
  double tau = 0.0;
  int iterations = 0;
  bool converged = false;
  VectorXd trace;
};

inline SingleLambdaFit fit_pme_single(const MatrixXd& centers, const VectorXd& weights,
                                      const MatrixXd& init_params, const MatrixXd& data,
                                      double lambda, const PmeOptions& opt) {
  SingleLambdaFit out;
  out.params = init_params;
  ProjectOptions popt{opt.inner_max_steps, opt.inner_grad_tol, opt.inner_refine_top, 0, true};
  const int N = static_cast<int>(centers.rows());

  std::vector<double> trace;
  double prev_fit = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < opt.max_iterations; ++it) {
    out.model = solve_penalized_spline(out.params, centers, weights, lambda);
    // Re-parameterize every center; keeping its previous parameter among the
    // seeds makes the weighted objective non-increasing.
    Projector proj(out.model, out.params, popt);
    MatrixXd next(N, init_params.cols());
    std::vector<double> obj(static_cast<size_t>(N));
    parallel_for(N, opt.threads, [&](int j) {
      double o = 0.0;
      next.row(j) = proj.project(centers.row(j).transpose(), &o).transpose();
      obj[static_cast<size_t>(j)] = o;
    });
    out.params = next;
    out.iterations = it + 1;

    double fit = 0.0;
    for (int j = 0; j < N; ++j) fit += weights[j] * obj[static_cast<size_t>(j)];
    trace.push_back(fit + lambda * roughness_value(out.model));
    if (fit < 1e-14) {
      out.converged = true;
      break;
    }
    if (it > 0 && std::abs(fit - prev_fit) < opt.eps * std::max(prev_fit, 1e-300)) {
      out.converged = true;
      break;
    }
    prev_fit = fit;
  }
  out.trace = Eigen::Map<VectorXd>(trace.data(), static_cast<Eigen::Index>(trace.size()));

  // Data-level mean squared distance used for selecting lambda.
  Projector proj(out.model, out.params, popt);
  const int I = static_cast<int>(data.rows());
  std::vector<double> obj(static_cast<size_t>(I));
  parallel_for(I, opt.threads, [&](int i) {
    double o = 0.0;
    proj.project(data.row(i).transpose(), &o);
    obj[static_cast<size_t>(i)] = o;
  });
  out.tau = std::accumulate(obj.begin(), obj.end(), 0.0) / std::max(I, 1);
  return out;
}

}  // namespace detail

/// Principal manifold estimation at one time point: for every lambda in the
/// grid, alternate penalized-spline solves with re-projection of the centers
/// until the weighted objective stabilizes, then keep the lambda with the
/// smallest data MSD (smallest lambda wins ties).
inline PmeFit fit_pme(const MatrixXd& centers, const VectorXd& weights,
                      const MatrixXd& init_params, const MatrixXd& data,
                      const PmeOptions& opt = {}) {
  if (centers.rows() != weights.size() || centers.rows() != init_params.rows())
    throw std::invalid_argument("fit_pme: centers/weights/init_params length mismatch");
  VectorXd grid = opt.lambda_grid.size() ? opt.lambda_grid : default_lambda_grid();
  std::vector<int> order(static_cast<size_t>(grid.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return grid[a] < grid[b]; });

  std::vector<detail::SingleLambdaFit> fits(static_cast<size_t>(grid.size()));
  PmeOptions single = opt;
  single.threads = 1;
  parallel_for(static_cast<int>(grid.size()), opt.threads, [&](int g) {
    fits[static_cast<size_t>(g)] =
        detail::fit_pme_single(centers, weights, init_params, data, grid[g], single);
  });

  PmeFit out;
  out.lambda_grid = grid;
  out.tau_by_lambda.resize(grid.size());
  int best = -1;
  for (int idx : order) {
    out.tau_by_lambda[idx] = fits[static_cast<size_t>(idx)].tau;
    if (best < 0 || fits[static_cast<size_t>(idx)].tau < fits[static_cast<size_t>(best)].tau) best = idx;
  }
  const auto& win = fits[static_cast<size_t>(best)];
  out.model = win.model;
  out.params = win.params;
  out.lambda_star = grid[best];
  out.tau = win.tau;
  out.iterations = win.iterations;
  out.converged = win.converged;
  out.objective_trace = win.trace;
  return out;
}

}  // namespace lpme
