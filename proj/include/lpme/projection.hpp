#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "lpme/core.hpp"

namespace lpme {

struct ProjectOptions {
  int max_steps = 200;      // descent iterations per start
  double grad_tol = 1e-8;   // stop when |grad| falls below this
  int refine_top = 0;       // descend from the k best-scoring seeds; 0 = all
  int aux_grid = -1;        // per-dimension auxiliary seed count spanning the
                            // inflated seed bounding box; -1 = auto, 0 = off
  bool gauss_newton = false;  // damped Gauss-Newton steps with gradient fallback
};

namespace detail {

inline int auto_aux_grid(int d) {
  switch (d) {
    case 1: return 128;
    case 2: return 16;
    default: return 8;
  }
}

}  // namespace detail

/// Finds the parameter r minimizing |x - f(r)|^2 by scoring a set of seed
/// parameters and running gradient descent with backtracking line search
/// from the most promising ones. The returned objective never exceeds the
/// best seed objective. Seed images are precomputed, so one Projector can
/// serve many query points cheaply. project() is const and safe to call
/// from several threads at once.
class Projector {
 public:
  Projector(const SplineModel& model, MatrixXd seeds, ProjectOptions opt = {})
      : opt_(opt),
        d_(model.d()),
        D_(model.D()),
        N_(model.knot_count()),
        knots_(model.knots),
        coef_(model.s),
        alpha_(model.alpha) {
    if (seeds.rows() == 0) throw std::invalid_argument("Projector: seed list is empty");
    if (seeds.cols() != d_) throw std::invalid_argument("Projector: seed dimension mismatch");
    int aux = opt_.aux_grid < 0 ? detail::auto_aux_grid(d_) : opt_.aux_grid;
    if (aux > 0) {
      VectorXd lo = seeds.colwise().minCoeff();
      VectorXd hi = seeds.colwise().maxCoeff();
      VectorXd span = (hi - lo).cwiseMax(1e-8);
      lo -= 0.25 * span;
      hi += 0.25 * span;
      MatrixXd grid = d_ == 1 ? line_grid(lo, hi, aux) : lattice_grid(lo, hi, aux, d_);
      MatrixXd all(seeds.rows() + grid.rows(), d_);
      all << seeds, grid;
      seeds = std::move(all);
    }
    seeds_ = std::move(seeds);
    SplineModel m;
    m.knots = knots_;
    m.s = coef_;
    m.alpha = alpha_;
    images_ = eval_spline_rows(m, seeds_);
  }

  const MatrixXd& seeds() const { return seeds_; }

  /// Returns the best parameter found; optionally reports its objective.
  VectorXd project(const VectorXd& x, double* objective = nullptr) const {
    const int K = static_cast<int>(seeds_.rows());
    thread_local std::vector<double> score;
    thread_local std::vector<int> order;
    score.resize(static_cast<size_t>(K));
    order.resize(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) score[static_cast<size_t>(k)] = (x - images_.row(k).transpose()).squaredNorm();
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return score[static_cast<size_t>(a)] < score[static_cast<size_t>(b)]; });
    int starts = opt_.refine_top > 0 ? std::min(opt_.refine_top, K) : K;

    Workspace ws(N_, d_, D_);
    VectorXd best_r = seeds_.row(order[0]).transpose();
    double best = score[static_cast<size_t>(order[0])];
    VectorXd r(d_);
    for (int i = 0; i < starts; ++i) {
      r = seeds_.row(order[static_cast<size_t>(i)]).transpose();
      double val = descend(x, r, ws);
      if (val < best) {
        best = val;
        best_r = r;
      }
    }
    if (objective) *objective = best;
    return best_r;
  }

 private:
  struct Workspace {
    Workspace(int N, int d, int D)
        : rho(N), cj(N), diff(N * d), f(D), grad(d), dir(d), cand(d), jac(D, d) {}
    std::vector<double> rho, cj, diff;
    VectorXd f, grad, dir, cand;
    MatrixXd jac;
  };

  static MatrixXd line_grid(const VectorXd& lo, const VectorXd& hi, int n) {
    MatrixXd g(n, 1);
    for (int i = 0; i < n; ++i) g(i, 0) = lo[0] + (hi[0] - lo[0]) * i / (n - 1.0);
    return g;
  }

  static MatrixXd lattice_grid(const VectorXd& lo, const VectorXd& hi, int n, int d) {
    int total = 1;
    for (int k = 0; k < d; ++k) total *= n;
    MatrixXd g(total, d);
    for (int i = 0; i < total; ++i) {
      int rest = i;
      for (int k = 0; k < d; ++k) {
        int idx = rest % n;
        rest /= n;
        g(i, k) = lo[k] + (hi[k] - lo[k]) * idx / (n - 1.0);
      }
    }
    return g;
  }

  // |x - f(r)|^2 without touching the gradient scratch
  double objective(const double* r, const VectorXd& x, VectorXd& f) const {
    for (int l = 0; l < D_; ++l) {
      double acc = alpha_(0, l);
      for (int k = 0; k < d_; ++k) acc += alpha_(k + 1, l) * r[k];
      f[l] = acc;
    }
    for (int j = 0; j < N_; ++j) {
      double sq = 0.0;
      for (int k = 0; k < d_; ++k) {
        double dk = r[k] - knots_(j, k);
        sq += dk * dk;
      }
      if (sq <= 0.0) continue;
      double e = eta_fast(std::sqrt(sq));
      for (int l = 0; l < D_; ++l) f[l] += coef_(j, l) * e;
    }
    double obj = 0.0;
    for (int l = 0; l < D_; ++l) {
      double dl = x[l] - f[l];
      obj += dl * dl;
    }
    return obj;
  }

  // objective + gradient of |x - f(r)|^2, one pass over the knots; fills the
  // Jacobian too when Gauss-Newton steps are enabled
  double objective_grad(const double* r, const VectorXd& x, Workspace& ws) const {
    for (int l = 0; l < D_; ++l) {
      double acc = alpha_(0, l);
      for (int k = 0; k < d_; ++k) acc += alpha_(k + 1, l) * r[k];
      ws.f[l] = acc;
    }
    for (int j = 0; j < N_; ++j) {
      double sq = 0.0;
      for (int k = 0; k < d_; ++k) {
        double dk = r[k] - knots_(j, k);
        ws.diff[static_cast<size_t>(j) * d_ + k] = dk;
        sq += dk * dk;
      }
      double rho = std::sqrt(sq);
      ws.rho[static_cast<size_t>(j)] = rho;
      if (rho <= 0.0) continue;
      double e = eta_fast(rho);
      for (int l = 0; l < D_; ++l) ws.f[l] += coef_(j, l) * e;
    }
    double obj = 0.0;
    for (int l = 0; l < D_; ++l) {
      double dl = x[l] - ws.f[l];
      obj += dl * dl;
    }
    if (opt_.gauss_newton) {
      for (int k = 0; k < d_; ++k)
        for (int l = 0; l < D_; ++l) ws.jac(l, k) = alpha_(k + 1, l);
      for (int j = 0; j < N_; ++j) {
        double rho = ws.rho[static_cast<size_t>(j)];
        if (rho <= 1e-300) continue;
        double w = eta_deriv_fast(rho) / rho;
        for (int k = 0; k < d_; ++k) {
          double wk = w * ws.diff[static_cast<size_t>(j) * d_ + k];
          for (int l = 0; l < D_; ++l) ws.jac(l, k) += coef_(j, l) * wk;
        }
      }
      for (int k = 0; k < d_; ++k) {
        double g = 0.0;
        for (int l = 0; l < D_; ++l) g += (x[l] - ws.f[l]) * ws.jac(l, k);
        ws.grad[k] = -2.0 * g;
      }
      return obj;
    }
    // c_j = sum_l (x_l - f_l) s_{j,l}
    for (int j = 0; j < N_; ++j) {
      double c = 0.0;
      for (int l = 0; l < D_; ++l) c += (x[l] - ws.f[l]) * coef_(j, l);
      ws.cj[static_cast<size_t>(j)] = c;
    }
    for (int k = 0; k < d_; ++k) {
      double g = 0.0;
      for (int l = 0; l < D_; ++l) g += (x[l] - ws.f[l]) * alpha_(k + 1, l);
      for (int j = 0; j < N_; ++j) {
        double rho = ws.rho[static_cast<size_t>(j)];
        if (rho <= 1e-300) continue;
        double w = eta_deriv_fast(rho) / rho;
        g += ws.cj[static_cast<size_t>(j)] * w * ws.diff[static_cast<size_t>(j) * d_ + k];
      }
      ws.grad[k] = -2.0 * g;
    }
    return obj;
  }

  // dir = (J^T J + damping)^{-1} (-grad/2), solved in place for d <= 2
  bool gauss_newton_direction(Workspace& ws) const {
    if (d_ == 1) {
      double a = ws.jac.col(0).squaredNorm();
      a += 1e-10 * (a + 1.0);
      if (a <= 0.0) return false;
      ws.dir[0] = -0.5 * ws.grad[0] / a;
      return true;
    }
    if (d_ == 2) {
      double a = ws.jac.col(0).squaredNorm();
      double b = ws.jac.col(0).dot(ws.jac.col(1));
      double c = ws.jac.col(1).squaredNorm();
      double damp = 1e-10 * (a + c + 1.0);
      a += damp;
      c += damp;
      double det = a * c - b * b;
      if (det <= 0.0) return false;
      double g0 = -0.5 * ws.grad[0], g1 = -0.5 * ws.grad[1];
      ws.dir[0] = (c * g0 - b * g1) / det;
      ws.dir[1] = (a * g1 - b * g0) / det;
      return true;
    }
    Eigen::MatrixXd JtJ = ws.jac.transpose() * ws.jac;
    JtJ.diagonal().array() += 1e-10 * (JtJ.trace() + 1.0);
    ws.dir = JtJ.ldlt().solve(VectorXd(-0.5 * ws.grad));
    return ws.dir.allFinite();
  }

  double eta_fast(double rho) const {
    switch (d_) {
      case 1: return rho * rho * rho;
      case 2: return rho * rho * std::log(rho);
      default: return rho;
    }
  }

  double eta_deriv_fast(double rho) const {
    switch (d_) {
      case 1: return 3.0 * rho * rho;
      case 2: return rho * (2.0 * std::log(rho) + 1.0);
      default: return 1.0;
    }
  }

  // Descent with Armijo backtracking (steepest descent, or damped
  // Gauss-Newton with gradient fallback); r is updated in place and the
  // final objective is returned.
  double descend(const VectorXd& x, VectorXd& r, Workspace& ws) const {
    double val = objective_grad(r.data(), x, ws);
    for (int step = 0; step < opt_.max_steps; ++step) {
      double gnorm = ws.grad.norm();
      if (gnorm < opt_.grad_tol) break;

      bool moved = false;
      if (opt_.gauss_newton && gauss_newton_direction(ws)) {
        double slope = ws.grad.dot(ws.dir);
        if (slope < 0.0) {
          double t = 1.0;
          for (int bt = 0; bt < 30; ++bt) {
            ws.cand = r + t * ws.dir;
            double cval = objective(ws.cand.data(), x, ws.f);
            if (cval <= val + 1e-4 * t * slope) {
              r = ws.cand;
              val = cval;
              moved = true;
              break;
            }
            t *= 0.5;
          }
        }
      }
      if (!moved) {
        double t = std::min(1.0, 1.0 / gnorm);
        for (int bt = 0; bt < 60; ++bt) {
          ws.cand = r - t * ws.grad;
          double cval = objective(ws.cand.data(), x, ws.f);
          if (cval <= val - 1e-4 * t * gnorm * gnorm) {
            r = ws.cand;
            val = cval;
            moved = true;
            break;
          }
          t *= 0.5;
        }
      }
      if (!moved) break;  // no descent step accepted: local minimum
      if (step + 1 < opt_.max_steps) val = objective_grad(r.data(), x, ws);
    }
    return val;
  }

  ProjectOptions opt_;
  int d_, D_, N_;
  MatrixXd knots_, coef_, alpha_;
  MatrixXd seeds_;
  MatrixXd images_;
};

/// Projection index pi_f(x): multi-start minimizer of |x - f(r)|^2.
/// Seeds default to the model knots plus an automatic coarse grid.
inline VectorXd project(const SplineModel& model, const VectorXd& x,
                        const MatrixXd* seeds = nullptr, ProjectOptions opt = {},
                        double* objective = nullptr) {
  Projector p(model, seeds ? *seeds : model.knots, opt);
  return p.project(x, objective);
}

}  // namespace lpme
