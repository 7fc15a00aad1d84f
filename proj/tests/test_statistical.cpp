// Seeded-replicate checks of the estimator's statistical behavior. These are
// heavier than the unit suite and live in their own binary.
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "lpme/isomap.hpp"
#include "lpme/lpme.hpp"
#include "lpme/reduce.hpp"
#include "lpme/rng.hpp"
#include "lpme/sim.hpp"

using namespace lpme;

namespace {

VectorXd coarse_lambda() {
  VectorXd g(7);
  for (int i = 0; i < 7; ++i) g[i] = std::exp(static_cast<double>(2 * i - 9));
  return g;
}

LpmeOptions lean_options(std::uint64_t seed) {
  LpmeOptions opt;
  opt.max_components = 15;
  opt.lambda_grid = coarse_lambda();
  opt.seed = seed;
  return opt;
}

}  // namespace

TEST_CASE("a single-time PME fit beats the raw data against fresh truth") {
  int wins = 0;
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    Rng rng(100 + rep);
    const int I = 400;
    const double sd = 0.1;
    MatrixXd data(I, 2);
    double data_msd_to_truth = 0.0;  // paired: the raw cloud scored against its own truth
    for (int i = 0; i < I; ++i) {
      double r = rng.uniform(-3.0, 3.0);
      double nx = sd * rng.normal(), ny = sd * rng.normal();
      data(i, 0) = r + nx;
      data(i, 1) = std::sin(r + M_PI / 2.0) + ny;
      data_msd_to_truth += nx * nx + ny * ny;
    }
    data_msd_to_truth /= I;

    MixtureFit mix = reduce_cloud(data, 10, 7 + rep, 1, [] {
      ReduceOptions o;
      o.max_components = 20;
      return o;
    }());
    MatrixXd iso = isomap_embed(mix.centers, 1);
    PmeOptions popt;
    popt.lambda_grid = coarse_lambda();
    PmeFit fit = fit_pme(mix.centers, mix.weights, iso, data, popt);

    MatrixXd fresh(500, 2);
    for (int i = 0; i < fresh.rows(); ++i) {
      double r = -3.0 + 6.0 * i / (fresh.rows() - 1.0);
      fresh(i, 0) = r;
      fresh(i, 1) = std::sin(r + M_PI / 2.0);
    }
    if (msd_to_truth(fit.model, fresh) < data_msd_to_truth) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("heavy temporal smoothing wins on stationary data") {
  int wins = 0;
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    SimSpec spec;
    spec.case_id = 1;
    spec.n_per_time = 80;
    spec.sd_iota = 0.08;
    spec.seed = 300 + rep;
    SimOutput sim = generate(spec);
    LongitudinalModel m = fit_lpme(sim.observed, lean_options(10 + rep));
    double at_zero = loocv_msd(m.grid, m.B, m.times, m.tau, sim.observed, 0.0);
    double at_large = loocv_msd(m.grid, m.B, m.times, m.tau, sim.observed, 1e6);
    if (at_large <= at_zero + 1e-6) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("temporal smoothing tracks truth better than per-time fits under structural noise") {
  int wins = 0;
  const int reps = 8;
  for (std::uint64_t rep = 0; rep < reps; ++rep) {
    SimSpec spec;
    spec.case_id = 1;
    spec.n_per_time = 150;
    spec.sd_alpha = 0.25;
    spec.sd_beta = 0.25;
    spec.sd_zeta = 0.5;
    spec.sd_iota = 0.05;
    spec.seed = 500 + rep;
    SimOutput sim = generate(spec);
    const int T = sim.observed.T();

    LpmeOptions opt = lean_options(20 + rep);
    LongitudinalModel model = fit_lpme(sim.observed, opt);
    std::vector<double> lpme_per_t;
    for (int t = 0; t < T; ++t)
      lpme_per_t.push_back(msd_to_truth(model_at_time(model, model.times[t]),
                                        sim.truth.clouds[static_cast<size_t>(t)]));

    // naive per-time PME, its own initialization at every time point
    ReduceOptions ropt;
    ropt.max_components = opt.max_components;
    ReducedCloud reduced = reduce_longitudinal(sim.observed, 10, opt.seed, ropt);
    PmeOptions popt;
    popt.lambda_grid = opt.lambda_grid;
    std::vector<double> pme_msd;
    for (int t = 0; t < T; ++t) {
      MatrixXd iso = isomap_embed(reduced.centers[static_cast<size_t>(t)], 1);
      PmeFit fit = fit_pme(reduced.centers[static_cast<size_t>(t)],
                           reduced.weights[static_cast<size_t>(t)], iso,
                           sim.observed.clouds[static_cast<size_t>(t)], popt);
      pme_msd.push_back(msd_to_truth(fit.model, sim.truth.clouds[static_cast<size_t>(t)]));
    }
    std::sort(lpme_per_t.begin(), lpme_per_t.end());
    std::sort(pme_msd.begin(), pme_msd.end());
    double lpme_median = 0.5 * (lpme_per_t[(T - 1) / 2] + lpme_per_t[T / 2]);
    double pme_median = 0.5 * (pme_msd[(T - 1) / 2] + pme_msd[T / 2]);
    if (lpme_median < pme_median) ++wins;
  }
  CHECK(wins >= 6);
}

TEST_CASE("stationary embeddings vary less over time than the per-time fits") {
  SimSpec spec;
  spec.case_id = 1;
  spec.n_per_time = 100;
  spec.sd_iota = 0.08;
  spec.seed = 900;
  SimOutput sim = generate(spec);
  LongitudinalModel m = fit_lpme(sim.observed, lean_options(31));

  Rng rng(41);
  double lo = m.grid.minCoeff(), hi = m.grid.maxCoeff();
  double embed_gap = 0.0, fit_gap = 0.0;
  const int T = m.T();
  for (int i = 0; i < 100; ++i) {
    VectorXd r(1);
    r[0] = rng.uniform(lo, hi);
    embed_gap += (embed(m, m.times[0], r) - embed(m, m.times[T - 1], r)).norm();
    double worst = 0.0;
    for (int a = 0; a < T; ++a)
      for (int b = a + 1; b < T; ++b) {
        SplineModel fa = unflatten_model(m.grid, m.B.row(a).transpose(), m.D);
        SplineModel fb = unflatten_model(m.grid, m.B.row(b).transpose(), m.D);
        worst = std::max(worst, (eval_spline(fa, r) - eval_spline(fb, r)).norm());
      }
    fit_gap += worst;
  }
  CHECK(embed_gap / 100.0 <= fit_gap / 100.0);
}
