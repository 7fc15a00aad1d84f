#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "lpme/sim.hpp"

using namespace lpme;

TEST_CASE("case 1 without noise follows the shifted sine formula") {
  SimSpec spec;
  spec.case_id = 1;
  spec.sd_iota = 0.0;
  spec.n_per_time = 100;
  spec.seed = 3;
  SimOutput out = generate(spec);
  REQUIRE(out.observed.T() == 5);  // duration 1 at interval 0.25
  for (int t = 0; t < out.observed.T(); ++t) {
    const MatrixXd& obs = out.observed.clouds[static_cast<size_t>(t)];
    CHECK((obs - out.truth.clouds[static_cast<size_t>(t)]).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < obs.rows(); ++i)
      CHECK(std::abs(obs(i, 1) - std::sin(obs(i, 0) + M_PI / 2.0)) < 1e-9);
  }
}

TEST_CASE("case 8 without noise lies on the unit sphere") {
  SimSpec spec;
  spec.case_id = 8;
  spec.sd_iota = 0.0;
  spec.n_per_time = 200;
  spec.seed = 4;
  SimOutput out = generate(spec);
  for (const auto& cloud : out.observed.clouds)
    for (int i = 0; i < cloud.rows(); ++i)
      CHECK(std::abs(cloud.row(i).norm() - 1.0) < 1e-9);
}

TEST_CASE("generation is deterministic in the seed") {
  SimSpec spec;
  spec.case_id = 5;
  spec.sd_alpha = 0.3;
  spec.sd_zeta = 0.5;
  spec.seed = 77;
  SimOutput a = generate(spec);
  SimOutput b = generate(spec);
  for (int t = 0; t < a.observed.T(); ++t) {
    CHECK(a.observed.clouds[static_cast<size_t>(t)] == b.observed.clouds[static_cast<size_t>(t)]);
    CHECK(a.truth.clouds[static_cast<size_t>(t)] == b.truth.clouds[static_cast<size_t>(t)]);
  }
  spec.seed = 78;
  SimOutput c = generate(spec);
  CHECK(a.observed.clouds[0] != c.observed.clouds[0]);
}

TEST_CASE("unknown cases and bad schedules are rejected") {
  SimSpec spec;
  spec.case_id = 9;
  CHECK_THROWS_WITH_AS(generate(spec), doctest::Contains("unknown case"), std::invalid_argument);
  spec.case_id = 1;
  spec.interval = 0.3;  // 1 / 0.3 is not an integer
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("truth and observed stay paired") {
  SimSpec spec;
  spec.case_id = 6;
  spec.sd_alpha = 0.5;
  spec.sd_beta = 0.5;
  spec.sd_zeta = 1.0;
  spec.seed = 9;
  SimOutput out = generate(spec);
  CHECK(out.observed.times == out.truth.times);
  for (int t = 0; t < out.observed.T(); ++t) {
    CHECK(out.observed.clouds[static_cast<size_t>(t)].rows() ==
          out.truth.clouds[static_cast<size_t>(t)].rows());
    CHECK(out.truth_params[static_cast<size_t>(t)].rows() ==
          out.truth.clouds[static_cast<size_t>(t)].rows());
  }
}

TEST_CASE("msd_to_truth of the matching manifold is zero") {
  SplineModel line;
  line.knots.resize(3, 1);
  line.knots << -1.0, 0.0, 1.0;
  line.s = MatrixXd::Zero(3, 2);
  line.alpha = MatrixXd::Zero(2, 2);
  line.alpha(1, 1) = 1.0;  // vertical line x = (0, r)
  MatrixXd truth(5, 2);
  for (int i = 0; i < 5; ++i) {
    truth(i, 0) = 0.0;
    truth(i, 1) = -0.8 + 0.4 * i;
  }
  CHECK(msd_to_truth(line, truth) < 1e-8);

  SplineModel shifted = line;
  shifted.alpha(0, 0) = 0.1;  // translate by (0.1, 0), orthogonal to the line
  CHECK(msd_to_truth(shifted, truth) == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("msd_to_truth truncates lifted fits to the truth dimension") {
  SplineModel lifted;
  lifted.knots.resize(3, 1);
  lifted.knots << -1.0, 0.0, 1.0;
  lifted.s = MatrixXd::Zero(3, 3);
  lifted.alpha = MatrixXd::Zero(2, 3);
  lifted.alpha(1, 0) = 1.0;  // (r, 0, 5r): third coordinate is an augmented angle
  lifted.alpha(1, 2) = 5.0;
  MatrixXd truth(3, 2);
  truth << -0.5, 0.2, 0.0, 0.2, 0.5, 0.2;
  CHECK(msd_to_truth(lifted, truth) == doctest::Approx(0.04).epsilon(1e-6));
}

TEST_CASE("paired data MSD concentrates at D sigma^2 under iota-only noise") {
  SimSpec spec;
  spec.case_id = 1;
  spec.n_per_time = 1000;
  spec.sd_iota = 0.1;
  spec.seed = 11;
  FactorialSpec fs = desk_preset();
  fs.cases = {1};
  fs.levels_alpha = {0.0};
  fs.levels_beta = {0.0};
  fs.levels_zeta = {0.0};
  fs.n_per_time = 1000;
  fs.sd_iota = 0.1;
  fs.seeds = {11};
  fs.run_lpme = fs.run_pme = false;
  FactorialResult res = run_factorial(fs);
  REQUIRE(res.rows.size() == 1);
  double expected = 2.0 * 0.1 * 0.1;
  CHECK(std::abs(res.rows[0].msd_data - expected) / expected < 0.15);
}

TEST_CASE("singleton factors give exactly one row; zero noise gives zero data MSD") {
  FactorialSpec fs = desk_preset();
  fs.cases = {1};
  fs.levels_alpha = {0.0};
  fs.levels_beta = {0.0};
  fs.levels_zeta = {0.0};
  fs.sd_iota = 0.0;
  fs.seeds = {5};
  fs.run_lpme = fs.run_pme = false;
  FactorialResult res = run_factorial(fs);
  REQUIRE(res.rows.size() == 1);
  CHECK(res.rows[0].msd_data < 1e-9);
}

TEST_CASE("desk preset row count matches the combinatorial oracle") {
  FactorialSpec fs = desk_preset();
  fs.run_lpme = fs.run_pme = false;
  fs.n_per_time = 20;  // generation only, keep it quick
  FactorialResult res = run_factorial(fs);
  // 3 sd levels ^3 = 27 combos, cycled change models, 3 cases, 3 seeds
  CHECK(res.rows.size() == 27u * 3u * 3u);
  // all four change models appear through cycling
  std::set<ChangeModel> seen;
  for (const auto& r : res.rows) seen.insert(r.change);
  CHECK(seen.size() == 4);
  // combination seeds are independent of estimator toggles and row order
  for (const auto& r : res.rows)
    CHECK(r.run_seed == mix_seed(mix_seed(r.master_seed, static_cast<std::uint64_t>(r.case_id)),
                                 static_cast<std::uint64_t>(r.combo)));
}

TEST_CASE("summaries match an independent order-statistics recomputation") {
  FactorialSpec fs = desk_preset();
  fs.cases = {1};
  fs.seeds = {1, 2};
  fs.n_per_time = 30;
  fs.run_lpme = fs.run_pme = false;
  FactorialResult res = run_factorial(fs);
  std::vector<double> vals;
  for (const auto& r : res.rows) vals.push_back(r.msd_data);
  std::sort(vals.begin(), vals.end());
  auto q = [&](double p) {
    double h = (vals.size() - 1.0) * p;
    size_t i = static_cast<size_t>(h);
    if (i + 1 >= vals.size()) return vals.back();
    return vals[i] + (h - i) * (vals[i + 1] - vals[i]);
  };
  REQUIRE(res.summaries.size() == 1);
  CHECK(res.summaries[0].data.median == q(0.5));
  CHECK(res.summaries[0].data.iqr == q(0.75) - q(0.25));
  CHECK(res.summaries[0].data.n == static_cast<int>(vals.size()));
}
