#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lpme/augment.hpp"
#include "lpme/core.hpp"
#include "lpme/isomap.hpp"
#include "lpme/lpme.hpp"
#include "lpme/parallel.hpp"
#include "lpme/pme.hpp"
#include "lpme/rng.hpp"

namespace lpme {

enum class ChangeModel { Constant, Linear, Quadratic, Sinusoidal };

inline const char* change_model_name(ChangeModel m) {
  switch (m) {
    case ChangeModel::Constant: return "constant";
    case ChangeModel::Linear: return "linear";
    case ChangeModel::Quadratic: return "quadratic";
    default: return "sinusoidal";
  }
}

inline ChangeModel parse_change_model(const std::string& s) {
  if (s == "constant") return ChangeModel::Constant;
  if (s == "linear") return ChangeModel::Linear;
  if (s == "quadratic") return ChangeModel::Quadratic;
  if (s == "sinusoidal") return ChangeModel::Sinusoidal;
  throw std::invalid_argument("unknown change model: " + s);
}

/// One simulated scenario: embedding case, noise scales, visit schedule.
struct SimSpec {
  int case_id = 1;
  double sd_alpha = 0.0;
  double sd_beta = 0.0;
  double sd_zeta = 0.0;
  double duration = 1.0;
  double interval = 0.25;
  ChangeModel change = ChangeModel::Constant;
  int n_per_time = 300;
  double sd_iota = 0.05;
  std::uint64_t seed = 0;

  int visits() const {
    double v = duration / interval;
    double r = std::round(v);
    if (!(duration > 0.0) || !(interval > 0.0) || std::abs(v - r) > 1e-9)
      throw std::invalid_argument("SimSpec: duration must be an integer multiple of interval");
    return static_cast<int>(r) + 1;
  }
};

struct SimOutput {
  LongitudinalCloud observed;
  LongitudinalCloud truth;             // same parameters, alpha = beta = 1, no noise
  std::vector<MatrixXd> truth_params;  // per time: I_t x d
};

inline int case_d(int c) {
  if (c >= 1 && c <= 5) return 1;
  if (c >= 6 && c <= 8) return 2;
  throw std::invalid_argument("unknown case: " + std::to_string(c));
}

inline int case_D(int c) {
  if (c >= 1 && c <= 3) return 2;
  if (c >= 4 && c <= 8) return 3;
  throw std::invalid_argument("unknown case: " + std::to_string(c));
}

namespace detail {

inline void case_domain(int c, VectorXd& lo, VectorXd& hi) {
  const double pi = M_PI;
  switch (c) {
    case 1: lo.setConstant(1, -3.0); hi.setConstant(1, 3.0); break;
    case 2: lo.setConstant(1, -3.0 * pi); hi.setConstant(1, 3.0 * pi); break;
    case 3: lo.setConstant(1, -4.0 * pi / 5.0); hi.setConstant(1, pi / 2.0); break;
    case 4: lo.setConstant(1, -1.0); hi.setConstant(1, 1.0); break;
    case 5: lo.setConstant(1, 0.0); hi.setConstant(1, 3.0 * pi); break;
    case 6: lo.setConstant(2, -1.0); hi.setConstant(2, 1.0); break;
    case 7:
      lo.resize(2); hi.resize(2);
      lo << 0.0, -1.0;
      hi << 3.0 * pi, 1.0;
      break;
    case 8:
      lo.resize(2); hi.resize(2);
      lo << 0.0, 0.0;
      hi << pi, 2.0 * pi;
      break;
    default: throw std::invalid_argument("unknown case: " + std::to_string(c));
  }
}

inline VectorXd case_embed(int c, const VectorXd& r, const Eigen::Vector2d& a,
                           const Eigen::Vector2d& b) {
  VectorXd x(case_D(c));
  switch (c) {
    case 1: x << r[0], a[0] * std::sin(b[0] * r[0] + M_PI / 2.0); break;
    case 2: x << r[0], a[0] * std::sin(b[0] * r[0]); break;
    case 3: x << a[0] * std::cos(b[0] * r[0]), a[1] * std::sin(b[1] * r[0]); break;
    case 4:
      x << r[0], std::pow(a[0] * r[0] + b[0], 2.0), std::pow(a[1] * r[0] + b[1], 3.0);
      break;
    case 5: x << r[0], a[0] * std::cos(b[0] * r[0]), a[1] * std::sin(b[1] * r[0]); break;
    case 6: {
      Eigen::Vector2d br(b[0] * r[0], b[1] * r[1]);
      x << br[0], br[1], a[0] * a[1] * br.squaredNorm();
      break;
    }
    case 7:
      x << a[0] * b[0] * r[0] * std::cos(a[0] * r[0]), a[1] * b[1] * r[0] * std::sin(a[1] * r[0]),
          r[1];
      break;
    case 8:
      x << a[0] * std::sin(b[0] * r[0]) * std::cos(b[1] * r[1]),
          a[0] * std::sin(b[0] * r[0]) * std::sin(b[1] * r[1]), a[0] * std::cos(b[0] * r[0]);
      break;
    default: throw std::invalid_argument("unknown case: " + std::to_string(c));
  }
  return x;
}

inline double change_value(ChangeModel m, double t) {
  switch (m) {
    case ChangeModel::Constant: return 1.0;
    case ChangeModel::Linear: return t;
    case ChangeModel::Quadratic: return t * t;
    default: return std::sin(t);
  }
}

}  // namespace detail

/// Samples one longitudinal scenario. Observed points follow the case
/// formula with per-visit alpha, beta ~ N(1, sd^2) and the structural
/// translation zeta_t h(t) u (u drawn once per run) plus per-point noise
/// iota ~ N(0, sd_iota^2 I). Truth shares the same parameters with
/// alpha = beta = 1 and no noise.
inline SimOutput generate(const SimSpec& spec) {
  const int d = case_d(spec.case_id);
  const int D = case_D(spec.case_id);
  const int T = spec.visits();
  if (spec.n_per_time < 1) throw std::invalid_argument("SimSpec: need n_per_time >= 1");
  if (spec.sd_alpha < 0 || spec.sd_beta < 0 || spec.sd_zeta < 0 || spec.sd_iota < 0)
    throw std::invalid_argument("SimSpec: negative standard deviation");

  VectorXd lo, hi;
  detail::case_domain(spec.case_id, lo, hi);

  Rng rng(spec.seed);
  VectorXd u = rng.normal_vec(D);  // translation direction, fixed for the run

  SimOutput out;
  out.observed.d = out.truth.d = d;
  out.observed.times.resize(T);
  out.truth.times.resize(T);
  out.observed.clouds.resize(static_cast<size_t>(T));
  out.truth.clouds.resize(static_cast<size_t>(T));
  out.truth_params.resize(static_cast<size_t>(T));

  const Eigen::Vector2d ones(1.0, 1.0);
  for (int v = 0; v < T; ++v) {
    double t = v * spec.interval;
    out.observed.times[v] = out.truth.times[v] = t;
    Eigen::Vector2d a(rng.normal(1.0, spec.sd_alpha), rng.normal(1.0, spec.sd_alpha));
    Eigen::Vector2d b(rng.normal(1.0, spec.sd_beta), rng.normal(1.0, spec.sd_beta));
    double zeta = rng.normal(0.0, spec.sd_zeta);
    VectorXd shift = zeta * detail::change_value(spec.change, t) * u;

    MatrixXd obs(spec.n_per_time, D), tru(spec.n_per_time, D), params(spec.n_per_time, d);
    for (int i = 0; i < spec.n_per_time; ++i) {
      VectorXd r(d);
      for (int k = 0; k < d; ++k) r[k] = rng.uniform(lo[k], hi[k]);
      VectorXd iota = spec.sd_iota * rng.normal_vec(D);
      obs.row(i) = (detail::case_embed(spec.case_id, r, a, b) + shift + iota).transpose();
      tru.row(i) = detail::case_embed(spec.case_id, r, ones, ones).transpose();
      params.row(i) = r.transpose();
    }
    out.observed.clouds[static_cast<size_t>(v)] = obs;
    out.truth.clouds[static_cast<size_t>(v)] = tru;
    out.truth_params[static_cast<size_t>(v)] = params;
  }
  return out;
}

/// Mean squared distance from truth samples to a fitted manifold. When the
/// fit lives in an augmented space, its output is truncated to the truth
/// dimension first (the augmented coordinates duplicate the originals).
inline double msd_to_truth(const SplineModel& fitted, const MatrixXd& truth_points) {
  SplineModel scored = fitted;
  const int keep = static_cast<int>(truth_points.cols());
  if (fitted.D() > keep) {
    scored.s = fitted.s.leftCols(keep);
    scored.alpha = fitted.alpha.leftCols(keep);
  } else if (fitted.D() < keep) {
    throw std::invalid_argument("msd_to_truth: fitted dimension below truth dimension");
  }
  return msd(scored, truth_points);
}

enum class Estimator { Data, Lpme, Pme };

struct EstimatorStats {
  double median = 0.0, iqr = 0.0, mean = 0.0, sd = 0.0;
  int n = 0, missing = 0;
};

/// Type-7 (linear interpolation) sample quantile of a sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  size_t i = static_cast<size_t>(std::floor(h));
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - static_cast<double>(i)) * (sorted[i + 1] - sorted[i]);
}

inline EstimatorStats summarize(std::vector<double> values, int missing) {
  EstimatorStats s;
  s.missing = missing;
  s.n = static_cast<int>(values.size());
  if (values.empty()) {
    s.median = s.iqr = s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::sort(values.begin(), values.end());
  s.median = quantile_sorted(values, 0.5);
  s.iqr = quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
  double m = 0.0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  s.mean = m;
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  s.sd = values.size() > 1 ? std::sqrt(acc / (static_cast<double>(values.size()) - 1.0)) : 0.0;
  return s;
}

struct FactorialSpec {
  std::vector<int> cases{1, 5, 8};
  std::vector<double> levels_alpha{0.0, 0.25, 1.0};
  std::vector<double> levels_beta{0.0, 0.25, 1.0};
  std::vector<double> levels_zeta{0.0, 0.25, 1.0};
  std::vector<double> durations{1.0};
  std::vector<double> intervals{0.25};
  std::vector<ChangeModel> change_models{ChangeModel::Constant, ChangeModel::Linear,
                                         ChangeModel::Quadratic, ChangeModel::Sinusoidal};
  // When set, the change model cycles with the combination index instead of
  // multiplying the design.
  bool cycle_change_models = true;
  int n_per_time = 300;
  double sd_iota = 0.05;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  LpmeOptions fit;
  bool lift_closed_cases = true;  // spherical lift for the closed case 8
  double lift_scale = 1.0;
  bool run_lpme = true;
  bool run_pme = true;
  int threads = 1;
};

/// The desk-scale preset: cases {1, 5, 8}, sd levels {0, 0.25, 1}^3 with the
/// change model cycling over combinations, one-year span at quarterly visits
/// (5 visits), 300 points per visit, 3 master seeds.
inline FactorialSpec desk_preset() {
  FactorialSpec s;
  s.fit.max_components = 40;  // desk-scale cap on mixture size
  s.lift_scale = 2.0;         // angle-dominated lift keeps case 8 well parameterized
  return s;
}

struct FactorialRow {
  int case_id = 0;
  int combo = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t run_seed = 0;
  double sd_alpha = 0, sd_beta = 0, sd_zeta = 0, duration = 0, interval = 0;
  ChangeModel change = ChangeModel::Constant;
  double msd_data = std::numeric_limits<double>::quiet_NaN();
  double msd_lpme = std::numeric_limits<double>::quiet_NaN();
  double msd_pme = std::numeric_limits<double>::quiet_NaN();
  std::string error_lpme, error_pme;
};

struct CaseSummary {
  int case_id = 0;
  EstimatorStats data, lpme, pme;
};

struct FactorialResult {
  std::vector<FactorialRow> rows;
  std::vector<CaseSummary> summaries;
};

namespace detail {

inline double paired_msd(const LongitudinalCloud& a, const LongitudinalCloud& b) {
  double total = 0.0;
  long count = 0;
  for (size_t t = 0; t < a.clouds.size(); ++t) {
    total += (a.clouds[t] - b.clouds[t]).rowwise().squaredNorm().sum();
    count += a.clouds[t].rows();
  }
  return total / static_cast<double>(count);
}

}  // namespace detail

/// Runs one factorial cell: generate, fit the requested estimators, score
/// against truth. Estimator failures are recorded in the row and do not
/// abort the sweep.
inline FactorialRow run_factorial_cell(const FactorialSpec& spec, int case_id, int combo,
                                       const SimSpec& sim_spec, std::uint64_t master_seed) {
  FactorialRow row;
  row.case_id = case_id;
  row.combo = combo;
  row.master_seed = master_seed;
  row.run_seed = sim_spec.seed;
  row.sd_alpha = sim_spec.sd_alpha;
  row.sd_beta = sim_spec.sd_beta;
  row.sd_zeta = sim_spec.sd_zeta;
  row.duration = sim_spec.duration;
  row.interval = sim_spec.interval;
  row.change = sim_spec.change;

  SimOutput sim = generate(sim_spec);
  row.msd_data = detail::paired_msd(sim.observed, sim.truth);

  LongitudinalCloud fit_cloud = sim.observed;
  const bool lifted = spec.lift_closed_cases && case_id == 8;
  if (lifted) {
    MatrixXd all(0, sim.observed.D());
    for (const auto& c : sim.observed.clouds) {
      MatrixXd merged(all.rows() + c.rows(), c.cols());
      merged << all, c;
      all = merged;
    }
    LiftSpec lift_spec;
    lift_spec.mode = LiftMode::Spherical;
    lift_spec.scale = spec.lift_scale;
    lift_spec.center = all.colwise().mean().transpose();
    for (auto& c : fit_cloud.clouds) c = lift(c, lift_spec);
  }

  LpmeOptions opt = spec.fit;
  opt.seed = sim_spec.seed;

  // one reduction serves both estimators (identical inputs and seed)
  const int T = sim.observed.T();
  ReducedCloud reduced;
  std::string reduce_error;
  try {
    const int N0 = opt.N0 > 0 ? opt.N0 : 10 * fit_cloud.d;
    ReduceOptions ropt;
    ropt.alpha = opt.alpha;
    ropt.eps = opt.eps;
    ropt.max_components = opt.max_components;
    reduced = reduce_longitudinal(fit_cloud, N0, opt.seed, ropt);
  } catch (const std::exception& e) {
    reduce_error = std::string("reduce: ") + e.what();
  }

  if (spec.run_lpme) {
    try {
      if (!reduce_error.empty()) throw std::runtime_error(reduce_error);
      LongitudinalModel model = fit_lpme(fit_cloud, opt, &reduced);
      double acc = 0.0;
      for (int t = 0; t < T; ++t)
        acc += msd_to_truth(model_at_time(model, model.times[t]),
                            sim.truth.clouds[static_cast<size_t>(t)]);
      row.msd_lpme = acc / T;
    } catch (const std::exception& e) {
      row.error_lpme = e.what();
    }
  }

  if (spec.run_pme) {
    try {
      if (!reduce_error.empty()) throw std::runtime_error(reduce_error);
      PmeOptions popt;
      popt.lambda_grid = opt.lambda_grid;
      popt.eps = opt.eps;
      popt.max_iterations = opt.max_iterations;
      double acc = 0.0;
      for (int t = 0; t < T; ++t) {
        MatrixXd iso = isomap_embed(reduced.centers[static_cast<size_t>(t)], fit_cloud.d,
                                    opt.isomap_k);
        PmeFit f = fit_pme(reduced.centers[static_cast<size_t>(t)],
                           reduced.weights[static_cast<size_t>(t)], iso,
                           fit_cloud.clouds[static_cast<size_t>(t)], popt);
        acc += msd_to_truth(f.model, sim.truth.clouds[static_cast<size_t>(t)]);
      }
      row.msd_pme = acc / T;
    } catch (const std::exception& e) {
      row.error_pme = e.what();
    }
  }
  return row;
}

/// Full factorial sweep. Combination seeds derive from
/// (master seed, case, combination index), so data generation is independent
/// of estimator order and thread count.
inline FactorialResult run_factorial(const FactorialSpec& spec) {
  struct Cell {
    int case_id;
    int combo;
    SimSpec sim;
    std::uint64_t master;
  };
  std::vector<Cell> cells;
  for (int case_id : spec.cases) {
    (void)case_d(case_id);  // validates the case number
    for (std::uint64_t master : spec.seeds) {
      int combo = 0;
      for (double sa : spec.levels_alpha)
        for (double sb : spec.levels_beta)
          for (double sz : spec.levels_zeta)
            for (double dur : spec.durations)
              for (double iv : spec.intervals) {
                std::vector<ChangeModel> models = spec.change_models;
                if (spec.cycle_change_models && !models.empty())
                  models = {spec.change_models[static_cast<size_t>(combo) %
                                               spec.change_models.size()]};
                for (ChangeModel cm : models) {
                  SimSpec s;
                  s.case_id = case_id;
                  s.sd_alpha = sa;
                  s.sd_beta = sb;
                  s.sd_zeta = sz;
                  s.duration = dur;
                  s.interval = iv;
                  s.change = cm;
                  s.n_per_time = spec.n_per_time;
                  s.sd_iota = spec.sd_iota;
                  s.seed = mix_seed(mix_seed(master, static_cast<std::uint64_t>(case_id)),
                                    static_cast<std::uint64_t>(combo));
                  cells.push_back({case_id, combo, s, master});
                  ++combo;
                }
              }
    }
  }

  FactorialResult out;
  out.rows.resize(cells.size());
  parallel_for(static_cast<int>(cells.size()), spec.threads, [&](int i) {
    const Cell& c = cells[static_cast<size_t>(i)];
    out.rows[static_cast<size_t>(i)] = run_factorial_cell(spec, c.case_id, c.combo, c.sim, c.master);
  });

  for (int case_id : spec.cases) {
    CaseSummary summary;
    summary.case_id = case_id;
    std::vector<double> v_data, v_lpme, v_pme;
    int miss_lpme = 0, miss_pme = 0, miss_data = 0;
    for (const auto& r : out.rows) {
      if (r.case_id != case_id) continue;
      if (std::isnan(r.msd_data)) ++miss_data; else v_data.push_back(r.msd_data);
      if (spec.run_lpme) {
        if (std::isnan(r.msd_lpme)) ++miss_lpme; else v_lpme.push_back(r.msd_lpme);
      }
      if (spec.run_pme) {
        if (std::isnan(r.msd_pme)) ++miss_pme; else v_pme.push_back(r.msd_pme);
      }
    }
    summary.data = summarize(std::move(v_data), miss_data);
    summary.lpme = summarize(std::move(v_lpme), miss_lpme);
    summary.pme = summarize(std::move(v_pme), miss_pme);
    out.summaries.push_back(summary);
  }
  return out;
}

}  // namespace lpme
