#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lpme/core.hpp"
#include "lpme/isomap.hpp"
#include "lpme/parallel.hpp"
#include "lpme/pme.hpp"
#include "lpme/reduce.hpp"
#include "lpme/temporal.hpp"

namespace lpme {

/// Settings for the full longitudinal pipeline.
struct LpmeOptions {
  // reduction
  int N0 = 0;                 // 0 = 10 * d
  double alpha = 0.05;        // sequential test level
  double eps = 1e-3;          // EM / PME relative tolerance
  int max_components = 0;     // 0 = min(10 d + 100, I_t - 1)
  // per-time PME
  VectorXd lambda_grid;       // empty = exp(-15..5)
  int max_iterations = 100;
  int isomap_k = 0;           // 0 = automatic
  // temporal smoothing
  VectorXd gamma_grid;        // empty = exp(-10..10)
  double fixed_gamma = std::numeric_limits<double>::quiet_NaN();  // set to skip LOOCV
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Fitted spacetime embedding: shared knot grid, per-time comparable
/// coefficients, and the tuned temporal spline over them.
struct LongitudinalModel {
  int d = 0;
  int D = 0;
  VectorXd times;
  MatrixXd grid;          // N* x d shared knots
  MatrixXd B;             // T x M comparable coefficients
  VectorXd tau;           // per-time data MSD of the PME fits
  VectorXd w;             // normalized inverse errors
  VectorXd lambda_star;   // per-time selected penalties
  double gamma_star = 0.0;
  TemporalSpline spline;  // fitted at gamma_star
  MatrixXd loocv_table;   // rows (gamma, MSD); MSD = NaN when invalid
  MatrixXd param_support; // fitted per-time parameters, stacked over time
  std::vector<std::string> warnings;

  int T() const { return static_cast<int>(times.size()); }
  int coefficient_length() const { return static_cast<int>(B.cols()); }
};

/// Projection policy used for held-out LOOCV scoring: multi-start from the
/// shared grid knots.
inline ProjectOptions loocv_project_options() { return ProjectOptions{30, 1e-7, 2, 0, true}; }

/// Flattens (s, alpha) into one coefficient vector, output dimension major:
/// [s(:,0); alpha(:,0); s(:,1); alpha(:,1); ...].
inline VectorXd flatten_coefficients(const MatrixXd& s, const MatrixXd& alpha) {
  const int N = static_cast<int>(s.rows());
  const int P = static_cast<int>(alpha.rows());
  const int D = static_cast<int>(s.cols());
  VectorXd b((N + P) * D);
  for (int l = 0; l < D; ++l) {
    b.segment(l * (N + P), N) = s.col(l);
    b.segment(l * (N + P) + N, P) = alpha.col(l);
  }
  return b;
}

/// Inverse of flatten_coefficients for a model on the given knot grid.
inline SplineModel unflatten_model(const MatrixXd& grid, const VectorXd& b, int D) {
  const int N = static_cast<int>(grid.rows());
  const int d = static_cast<int>(grid.cols());
  const int P = d + 1;
  if (b.size() != static_cast<Eigen::Index>((N + P) * D))
    throw std::invalid_argument("unflatten_model: coefficient length mismatch");
  SplineModel m;
  m.knots = grid;
  m.s.resize(N, D);
  m.alpha.resize(P, D);
  for (int l = 0; l < D; ++l) {
    m.s.col(l) = b.segment(l * (N + P), N);
    m.alpha.col(l) = b.segment(l * (N + P) + N, P);
  }
  return m;
}

struct InitResult {
  std::vector<MatrixXd> params;  // per time: N_t x d initial parameters
  PmeFit first_fit;              // the PME fit of the first time point
};

/// Cross-time initialization: PME on the first time point's centers
/// (Isomap-started), then the remaining centers are parameterized through
/// that fit's projection index.
inline InitResult initialize_longitudinal(const ReducedCloud& reduced, const LpmeOptions& opt = {}) {
  if (reduced.T() < 2) throw std::invalid_argument("initialize_longitudinal: need >= 2 time points");
  const int d = reduced.d;

  InitResult out;
  out.params.resize(static_cast<size_t>(reduced.T()));

  MatrixXd iso = isomap_embed(reduced.centers[0], d, opt.isomap_k);
  PmeOptions popt;
  popt.lambda_grid = opt.lambda_grid;
  popt.eps = opt.eps;
  popt.max_iterations = opt.max_iterations;
  popt.threads = opt.threads;
  out.first_fit = fit_pme(reduced.centers[0], reduced.weights[0], iso, reduced.centers[0], popt);
  out.params[0] = out.first_fit.params;

  Projector proj(out.first_fit.model, out.first_fit.params, ProjectOptions{30, 1e-7, 3, 0, true});
  for (int t = 1; t < reduced.T(); ++t) {
    const MatrixXd& mu = reduced.centers[static_cast<size_t>(t)];
    MatrixXd params(mu.rows(), d);
    for (int j = 0; j < mu.rows(); ++j)
      params.row(j) = proj.project(mu.row(j).transpose()).transpose();
    out.params[static_cast<size_t>(t)] = params;
  }
  return out;
}

struct ComparableCoefficients {
  MatrixXd grid;  // N* x d
  MatrixXd B;     // T x M
  std::vector<std::string> warnings;
};

/// Re-expresses every per-time fit on one shared knot grid spanning the
/// union of the fitted parameters, giving coefficients comparable over time.
/// d = 1 uses max_t N_t equally spaced knots; d = 2 the smallest full lattice
/// with at least that many.
inline ComparableCoefficients comparable_coefficients(const std::vector<PmeFit>& fits) {
  if (fits.empty()) throw std::invalid_argument("comparable_coefficients: no fits");
  const int d = fits.front().model.d();
  const int D = fits.front().model.D();
  for (const auto& f : fits)
    if (f.model.d() != d || f.model.D() != D)
      throw std::invalid_argument("comparable_coefficients: fits disagree on dimensions");
  if (d > 2) throw std::invalid_argument("comparable_coefficients: only d in {1, 2} supported");

  ComparableCoefficients out;
  VectorXd lo = VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  VectorXd hi = -lo;
  int max_knots = 0;
  for (const auto& f : fits) {
    lo = lo.cwiseMin(f.params.colwise().minCoeff().transpose());
    hi = hi.cwiseMax(f.params.colwise().maxCoeff().transpose());
    max_knots = std::max(max_knots, static_cast<int>(f.params.rows()));
  }
  double max_span = (hi - lo).maxCoeff();
  if (max_span <= 0.0) max_span = 1.0;
  for (int k = 0; k < d; ++k)
    if (hi[k] - lo[k] <= 0.0) {
      double pad = 1e-3 * max_span;
      lo[k] -= pad;
      hi[k] += pad;
      out.warnings.push_back("comparable_coefficients: degenerate parameter range in dimension " +
                             std::to_string(k + 1) + ", padded");
    }

  if (d == 1) {
    int n = std::max(max_knots, 3);
    out.grid.resize(n, 1);
    for (int i = 0; i < n; ++i) out.grid(i, 0) = lo[0] + (hi[0] - lo[0]) * i / (n - 1.0);
  } else {
    int m = std::max(2, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(max_knots)))));
    out.grid.resize(m * m, 2);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        out.grid(i * m + j, 0) = lo[0] + (hi[0] - lo[0]) * i / (m - 1.0);
        out.grid(i * m + j, 1) = lo[1] + (hi[1] - lo[1]) * j / (m - 1.0);
      }
  }

  const int Nstar = static_cast<int>(out.grid.rows());
  const int M = (Nstar + d + 1) * D;
  out.B.resize(static_cast<Eigen::Index>(fits.size()), M);
  VectorXd unit = VectorXd::Ones(Nstar);
  for (size_t t = 0; t < fits.size(); ++t) {
    MatrixXd Y = eval_spline_rows(fits[t].model, out.grid);
    SplineModel m = solve_penalized_spline(out.grid, Y, unit, fits[t].lambda_star);
    out.B.row(static_cast<Eigen::Index>(t)) = flatten_coefficients(m.s, m.alpha).transpose();
  }
  return out;
}

/// Held-out MSD for one gamma: for every time t, the temporal spline is
/// refitted without t and the time-t data are scored against the resulting
/// embedding.
inline double loocv_msd(const MatrixXd& grid, const MatrixXd& B, const VectorXd& times,
                        const VectorXd& tau, const LongitudinalCloud& data, double gamma,
                        int threads = 1) {
  const int T = static_cast<int>(times.size());
  const int D = data.D();
  std::vector<double> contribution(static_cast<size_t>(T), 0.0);
  parallel_for(T, threads, [&](int t_out) {
    MatrixXd subB(T - 1, B.cols());
    VectorXd subt(T - 1), subtau(T - 1);
    for (int t = 0, r = 0; t < T; ++t) {
      if (t == t_out) continue;
      subB.row(r) = B.row(t);
      subt[r] = times[t];
      subtau[r] = tau[t];
      ++r;
    }
    TemporalSpline g = temporal_smooth(subB, subt, subtau, gamma);
    SplineModel held = unflatten_model(grid, g.eval(times[t_out]), D);
    Projector proj(held, grid, loocv_project_options());
    const MatrixXd& cloud = data.clouds[static_cast<size_t>(t_out)];
    double sum = 0.0;
    for (int i = 0; i < cloud.rows(); ++i) {
      double obj = 0.0;
      proj.project(cloud.row(i).transpose(), &obj);
      sum += obj;
    }
    contribution[static_cast<size_t>(t_out)] = sum / cloud.rows();
  });
  return std::accumulate(contribution.begin(), contribution.end(), 0.0) / T;
}

struct LoocvResult {
  double gamma_star = 0.0;
  MatrixXd table;  // rows (gamma, MSD); MSD = NaN marks an invalid gamma
  std::vector<std::string> warnings;
};

/// Tunes gamma by leave-one-out MSD over the supplied grid; invalid grid
/// values (failed refits) are excluded with a warning. Ties go to the
/// smallest gamma.
inline LoocvResult loocv_tune(const MatrixXd& grid, const MatrixXd& B, const VectorXd& times,
                              const VectorXd& tau, const LongitudinalCloud& data,
                              const VectorXd& gamma_grid, int threads = 1) {
  if (times.size() < 4) throw std::invalid_argument("loocv_tune: need >= 4 time points");
  if (gamma_grid.size() == 0) throw std::invalid_argument("loocv_tune: empty gamma grid");

  LoocvResult out;
  const int G = static_cast<int>(gamma_grid.size());
  out.table.resize(G, 2);
  std::vector<std::string> errors(static_cast<size_t>(G));
  parallel_for(G, threads, [&](int g) {
    out.table(g, 0) = gamma_grid[g];
    try {
      out.table(g, 1) = loocv_msd(grid, B, times, tau, data, gamma_grid[g]);
    } catch (const std::exception& e) {
      out.table(g, 1) = std::numeric_limits<double>::quiet_NaN();
      errors[static_cast<size_t>(g)] = e.what();
    }
  });
  for (int g = 0; g < G; ++g)
    if (!errors[static_cast<size_t>(g)].empty())
      out.warnings.push_back("loocv_tune: gamma " + std::to_string(gamma_grid[g]) +
                             " excluded: " + errors[static_cast<size_t>(g)]);

  std::vector<int> order(static_cast<size_t>(G));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return gamma_grid[a] < gamma_grid[b]; });
  int best = -1;
  for (int idx : order) {
    if (std::isnan(out.table(idx, 1))) continue;
    if (best < 0 || out.table(idx, 1) < out.table(best, 1)) best = idx;
  }
  if (best < 0) throw std::runtime_error("loocv_tune: every gamma failed");
  out.gamma_star = gamma_grid[best];
  return out;
}

namespace detail {

template <class F>
auto stage(const std::string& label, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("lpme[" + label + "]: " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("lpme[" + label + "]: " + e.what());
  }
}

}  // namespace detail

/// The full longitudinal pipeline: per-time reduction, cross-time
/// initialization, per-time PME fits, comparable coefficients on a shared
/// grid, LOOCV tuning of gamma (unless fixed), and the final weighted
/// temporal spline. A precomputed reduction may be supplied to share it with
/// other estimators.
inline LongitudinalModel fit_lpme(const LongitudinalCloud& data, const LpmeOptions& opt = {},
                                  const ReducedCloud* precomputed_reduction = nullptr) {
  data.validate();
  const int T = data.T();
  const int d = data.d;
  const bool fixed_gamma = !std::isnan(opt.fixed_gamma);
  if (T < 4 && !fixed_gamma)
    throw std::invalid_argument(
        "lpme: LOOCV tuning needs >= 4 time points; use fixed-gamma mode (supply gamma) for "
        "shorter series");

  const int N0 = opt.N0 > 0 ? opt.N0 : 10 * d;
  ReduceOptions ropt;
  ropt.alpha = opt.alpha;
  ropt.eps = opt.eps;
  ropt.max_components = opt.max_components;

  ReducedCloud reduced = detail::stage("reduce", [&] {
    return precomputed_reduction ? *precomputed_reduction
                                 : reduce_longitudinal(data, N0, opt.seed, ropt);
  });

  InitResult init = detail::stage("init", [&] { return initialize_longitudinal(reduced, opt); });

  PmeOptions popt;
  popt.lambda_grid = opt.lambda_grid;
  popt.eps = opt.eps;
  popt.max_iterations = opt.max_iterations;
  std::vector<PmeFit> fits(static_cast<size_t>(T));
  detail::stage("fit", [&] {
    parallel_for(T, opt.threads, [&](int t) {
      fits[static_cast<size_t>(t)] =
          fit_pme(reduced.centers[static_cast<size_t>(t)], reduced.weights[static_cast<size_t>(t)],
                  init.params[static_cast<size_t>(t)], data.clouds[static_cast<size_t>(t)], popt);
    });
    return 0;
  });

  LongitudinalModel model;
  model.d = d;
  model.D = data.D();
  model.times = data.times;
  model.tau.resize(T);
  model.lambda_star.resize(T);
  for (int t = 0; t < T; ++t) {
    model.tau[t] = fits[static_cast<size_t>(t)].tau;
    model.lambda_star[t] = fits[static_cast<size_t>(t)].lambda_star;
  }

  ComparableCoefficients cc = detail::stage("grid", [&] { return comparable_coefficients(fits); });
  model.grid = cc.grid;
  model.B = cc.B;
  model.warnings = cc.warnings;
  {
    long rows = 0;
    for (const auto& f : fits) rows += f.params.rows();
    model.param_support.resize(rows, d);
    long at = 0;
    for (const auto& f : fits) {
      model.param_support.middleRows(at, f.params.rows()) = f.params;
      at += f.params.rows();
    }
  }

  if (fixed_gamma) {
    model.gamma_star = opt.fixed_gamma;
  } else {
    VectorXd gg = opt.gamma_grid.size() ? opt.gamma_grid : default_gamma_grid();
    LoocvResult tuned = detail::stage("tune", [&] {
      return loocv_tune(model.grid, model.B, model.times, model.tau, data, gg, opt.threads);
    });
    model.gamma_star = tuned.gamma_star;
    model.loocv_table = tuned.table;
    model.warnings.insert(model.warnings.end(), tuned.warnings.begin(), tuned.warnings.end());
  }

  model.spline = detail::stage("smooth", [&] {
    return temporal_smooth(model.B, model.times, model.tau, model.gamma_star);
  });
  model.w = model.spline.weights;
  return model;
}

/// The spline f_t with coefficients g_gamma(t) on the shared grid.
inline SplineModel model_at_time(const LongitudinalModel& m, double t) {
  return unflatten_model(m.grid, m.spline.eval(t), m.D);
}

/// Spacetime embedding F(t, r). Extrapolation beyond the fitted time range is
/// permitted and reported through the optional flag.
inline VectorXd embed(const LongitudinalModel& m, double t, const VectorXd& r,
                      bool* extrapolated = nullptr) {
  if (extrapolated) *extrapolated = t < m.times[0] || t > m.times[m.T() - 1];
  return eval_spline(model_at_time(m, t), r);
}

}  // namespace lpme
