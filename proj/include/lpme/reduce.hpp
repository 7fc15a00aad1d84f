#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lpme/core.hpp"
#include "lpme/rng.hpp"

namespace lpme {

/// Weighted mixture centers summarizing each time point's cloud.
struct ReducedCloud {
  VectorXd times;
  std::vector<MatrixXd> centers;  // per time: N_t x D
  std::vector<VectorXd> weights;  // per time: N_t, summing to 1
  int d = 1;

  int T() const { return static_cast<int>(times.size()); }
};

struct MixtureFit {
  MatrixXd centers;    // N x D cluster means
  VectorXd weights;    // N mixture weights
  double sigma = 0.0;  // shared isotropic bandwidth
  double log_likelihood = 0.0;
  VectorXd point_log_density;  // per input point
};

struct ReduceOptions {
  double alpha = 0.05;      // level of the sequential improvement test
  double eps = 1e-3;        // relative log-likelihood tolerance for EM
  int max_components = 0;   // 0 = min(10 d + 100, I - 1); d supplied by caller
  int lloyd_iterations = 100;
  int em_iterations = 500;
};

namespace detail {

// Farthest-point seeding: first center drawn from the rng, the rest maximize
// the distance to the chosen set (ties to the lowest index).
inline std::vector<int> farthest_point_seed(const MatrixXd& pts, int N, Rng& rng) {
  const int I = static_cast<int>(pts.rows());
  std::vector<int> chosen;
  chosen.reserve(static_cast<size_t>(N));
  chosen.push_back(rng.uniform_int(I));
  VectorXd dist = (pts.rowwise() - pts.row(chosen[0])).rowwise().norm();
  while (static_cast<int>(chosen.size()) < N) {
    int far = 0;
    for (int i = 1; i < I; ++i)
      if (dist[i] > dist[far]) far = i;
    chosen.push_back(far);
    VectorXd nd = (pts.rowwise() - pts.row(far)).rowwise().norm();
    dist = dist.cwiseMin(nd);
  }
  return chosen;
}

inline double normal_upper_p(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

/// Fits an N-component isotropic Gaussian mixture: deterministic seeding,
/// Lloyd refinement of the centers, shared bandwidth equal to the mean
/// within-cluster distance, then EM over the weights only. When `warm` holds
/// previously converged centers, Lloyd starts from them (padded with
/// farthest points), which keeps refinement incremental across N.
inline MixtureFit fit_mixture(const MatrixXd& pts, int N, std::uint64_t seed,
                              const ReduceOptions& opt = {}, const MatrixXd* warm = nullptr) {
  const int I = static_cast<int>(pts.rows());
  const int D = static_cast<int>(pts.cols());
  if (N < 1 || N > I) throw std::invalid_argument("fit_mixture: component count out of range");

  MatrixXd centers(N, D);
  if (warm && warm->rows() > 0 && warm->rows() <= N && warm->cols() == D) {
    const int W = static_cast<int>(warm->rows());
    centers.topRows(W) = *warm;
    VectorXd dist = VectorXd::Constant(I, std::numeric_limits<double>::infinity());
    for (int j = 0; j < W; ++j)
      dist = dist.cwiseMin((pts.rowwise() - warm->row(j)).rowwise().norm());
    for (int j = W; j < N; ++j) {
      int far = 0;
      for (int i = 1; i < I; ++i)
        if (dist[i] > dist[far]) far = i;
      centers.row(j) = pts.row(far);
      dist = dist.cwiseMin((pts.rowwise() - pts.row(far)).rowwise().norm());
    }
  } else {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(N)));
    std::vector<int> seeds = detail::farthest_point_seed(pts, N, rng);
    for (int j = 0; j < N; ++j) centers.row(j) = pts.row(seeds[static_cast<size_t>(j)]);
  }

  std::vector<int> assign(static_cast<size_t>(I), -1);
  for (int it = 0; it < opt.lloyd_iterations; ++it) {
    bool changed = false;
    for (int i = 0; i < I; ++i) {
      int bestj = 0;
      double bestd = (pts.row(i) - centers.row(0)).squaredNorm();
      for (int j = 1; j < N; ++j) {
        double dj = (pts.row(i) - centers.row(j)).squaredNorm();
        if (dj < bestd) {
          bestd = dj;
          bestj = j;
        }
      }
      if (assign[static_cast<size_t>(i)] != bestj) {
        assign[static_cast<size_t>(i)] = bestj;
        changed = true;
      }
    }
    if (!changed) break;
    MatrixXd sums = MatrixXd::Zero(N, D);
    VectorXd counts = VectorXd::Zero(N);
    for (int i = 0; i < I; ++i) {
      sums.row(assign[static_cast<size_t>(i)]) += pts.row(i);
      counts[assign[static_cast<size_t>(i)]] += 1.0;
    }
    for (int j = 0; j < N; ++j) {
      if (counts[j] > 0.0) {
        centers.row(j) = sums.row(j) / counts[j];
      } else {
        // revive an empty cluster at the point farthest from its center
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < I; ++i) {
          double di = (pts.row(i) - centers.row(assign[static_cast<size_t>(i)])).squaredNorm();
          if (di > fd) {
            fd = di;
            far = i;
          }
        }
        centers.row(j) = pts.row(far);
      }
    }
  }

  MixtureFit fit;
  fit.centers = centers;

  double wcd = 0.0;
  for (int i = 0; i < I; ++i) wcd += (pts.row(i) - centers.row(assign[static_cast<size_t>(i)])).norm();
  wcd /= I;
  VectorXd lo = pts.colwise().minCoeff(), hi = pts.colwise().maxCoeff();
  double diam = (hi - lo).norm();
  fit.sigma = std::max(wcd, std::max(1e-9 * diam, 1e-300));

  // EM over the weights with fixed centers and bandwidth.
  VectorXd counts = VectorXd::Zero(N);
  for (int i = 0; i < I; ++i) counts[assign[static_cast<size_t>(i)]] += 1.0;
  VectorXd theta = (counts.array() + 1e-12).matrix();
  theta /= theta.sum();

  const double log_norm = -0.5 * D * std::log(2.0 * M_PI * fit.sigma * fit.sigma);
  MatrixXd logphi(I, N);  // component log densities
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < N; ++j)
      logphi(i, j) = log_norm - 0.5 * (pts.row(i) - centers.row(j)).squaredNorm() / (fit.sigma * fit.sigma);

  double prev_ll = -std::numeric_limits<double>::infinity();
  VectorXd point_ld(I);
  for (int it = 0; it < opt.em_iterations; ++it) {
    VectorXd resp_sum = VectorXd::Zero(N);
    double ll = 0.0;
    for (int i = 0; i < I; ++i) {
      VectorXd t = logphi.row(i).transpose() + theta.array().log().matrix();
      double m = t.maxCoeff();
      VectorXd e = (t.array() - m).exp();
      double z = e.sum();
      point_ld[i] = m + std::log(z);
      ll += point_ld[i];
      resp_sum += e / z;
    }
    ll /= I;
    theta = resp_sum / I;
    theta = theta.cwiseMax(1e-15);
    theta /= theta.sum();
    if (std::abs(ll - prev_ll) < opt.eps * std::max(std::abs(prev_ll), 1e-12)) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;
  }
  fit.log_likelihood = prev_ll;
  fit.point_log_density = point_ld;
  fit.weights = theta;
  return fit;
}

/// Reduces one cloud to weighted mixture centers. Starting from N0
/// components, the component count grows until a one-sided paired z-test on
/// per-point log-density improvements fails to reject at level alpha, or the
/// cap min(max_components, I - 1) is reached.
inline MixtureFit reduce_cloud(const MatrixXd& pts, int N0, std::uint64_t seed, int d_hint = 1,
                               ReduceOptions opt = {}) {
  const int I = static_cast<int>(pts.rows());
  if (I < 1) throw std::invalid_argument("reduce_cloud: empty cloud");
  VectorXd lo = pts.colwise().minCoeff(), hi = pts.colwise().maxCoeff();
  if ((hi - lo).norm() == 0.0) throw std::runtime_error("zero-variance cloud");
  if (N0 < 1 || N0 > I)
    throw std::invalid_argument("reduce_cloud: need 1 <= N0 <= point count");
  if (opt.max_components <= 0) opt.max_components = 10 * d_hint + 100;
  const int hi_N = std::max(N0, std::min(opt.max_components, I - 1));

  MixtureFit current = fit_mixture(pts, N0, seed, opt);
  for (int N = N0; N < hi_N; ++N) {
    MixtureFit next = fit_mixture(pts, N + 1, seed, opt, &current.centers);
    VectorXd diff = next.point_log_density - current.point_log_density;
    double mean = diff.mean();
    double sd = I > 1 ? std::sqrt((diff.array() - mean).square().sum() / (I - 1)) : 0.0;
    bool reject;
    if (sd == 0.0) {
      reject = mean > 0.0;
    } else {
      double z = mean / (sd / std::sqrt(static_cast<double>(I)));
      reject = detail::normal_upper_p(z) < opt.alpha;
    }
    if (!reject) break;  // no significant improvement: keep N components
    current = std::move(next);
  }
  return current;
}

/// Applies reduce_cloud to every time point of a longitudinal cloud.
inline ReducedCloud reduce_longitudinal(const LongitudinalCloud& data, int N0, std::uint64_t seed,
                                        const ReduceOptions& opt = {}) {
  data.validate();
  ReducedCloud out;
  out.times = data.times;
  out.d = data.d;
  out.centers.resize(static_cast<size_t>(data.T()));
  out.weights.resize(static_cast<size_t>(data.T()));
  for (int t = 0; t < data.T(); ++t) {
    MixtureFit fit = reduce_cloud(data.clouds[static_cast<size_t>(t)], N0,
                                  mix_seed(seed, static_cast<std::uint64_t>(t)), data.d, opt);
    out.centers[static_cast<size_t>(t)] = fit.centers;
    out.weights[static_cast<size_t>(t)] = fit.weights;
  }
  return out;
}

}  // namespace lpme
