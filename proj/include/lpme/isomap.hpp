#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lpme/core.hpp"

namespace lpme {

/// k-NN graph over a set of centers with all-pairs geodesic distances.
struct GeodesicGraph {
  MatrixXd vertices;                                  // N x D
  std::vector<std::vector<std::pair<int, double>>> knn;  // symmetrized adjacency
  MatrixXd dist;                                      // N x N shortest-path distances
};

inline int default_isomap_k(int d, int N) {
  int logk = static_cast<int>(std::ceil(std::log2(std::max(N, 2)))) + 1;
  return std::max(d + 2, logk);
}

/// Builds the k-NN graph (edges symmetrized) and repairs connectivity by
/// repeatedly adding the shortest edge between components, then runs
/// Dijkstra from every vertex.
inline GeodesicGraph build_geodesic_graph(const MatrixXd& centers, int k) {
  const int N = static_cast<int>(centers.rows());
  if (N < 2) throw std::invalid_argument("build_geodesic_graph: need at least 2 points");
  k = std::min(std::max(k, 1), N - 1);

  GeodesicGraph g;
  g.vertices = centers;
  g.knn.assign(static_cast<size_t>(N), {});

  MatrixXd pair_dist(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) pair_dist(i, j) = (centers.row(i) - centers.row(j)).norm();

  std::vector<int> order(static_cast<size_t>(N));
  for (int i = 0; i < N; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pair_dist(i, a) < pair_dist(i, b); });
    for (int m = 0, added = 0; m < N && added < k; ++m) {
      int j = order[static_cast<size_t>(m)];
      if (j == i) continue;
      g.knn[static_cast<size_t>(i)].push_back({j, pair_dist(i, j)});
      ++added;
    }
  }
  // symmetrize
  for (int i = 0; i < N; ++i)
    for (auto [j, w] : g.knn[static_cast<size_t>(i)]) {
      bool found = false;
      for (auto [jj, ww] : g.knn[static_cast<size_t>(j)])
        if (jj == i) found = true;
      if (!found) g.knn[static_cast<size_t>(j)].push_back({i, pair_dist(j, i)});
    }

  // connectivity repair
  for (;;) {
    std::vector<int> comp(static_cast<size_t>(N), -1);
    int ncomp = 0;
    for (int s = 0; s < N; ++s) {
      if (comp[static_cast<size_t>(s)] >= 0) continue;
      std::vector<int> stack{s};
      comp[static_cast<size_t>(s)] = ncomp;
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (auto [j, w] : g.knn[static_cast<size_t>(v)])
          if (comp[static_cast<size_t>(j)] < 0) {
            comp[static_cast<size_t>(j)] = ncomp;
            stack.push_back(j);
          }
      }
      ++ncomp;
    }
    if (ncomp == 1) break;
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        if (comp[static_cast<size_t>(i)] != comp[static_cast<size_t>(j)] && pair_dist(i, j) < best) {
          best = pair_dist(i, j);
          bi = i;
          bj = j;
        }
    g.knn[static_cast<size_t>(bi)].push_back({bj, best});
    g.knn[static_cast<size_t>(bj)].push_back({bi, best});
  }

  // Dijkstra from every vertex
  g.dist = MatrixXd::Constant(N, N, std::numeric_limits<double>::infinity());
  for (int s = 0; s < N; ++s) {
    auto row = g.dist.row(s);
    row[s] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    pq.push({0.0, s});
    while (!pq.empty()) {
      auto [dv, v] = pq.top();
      pq.pop();
      if (dv > row[v]) continue;
      for (auto [j, w] : g.knn[static_cast<size_t>(v)])
        if (dv + w < row[j]) {
          row[j] = dv + w;
          pq.push({row[j], j});
        }
    }
  }
  return g;
}

/// Isomap: geodesic distances + classical MDS on the squared-distance matrix.
/// Coordinates are ordered by descending spectral value and sign-fixed so the
/// first nonzero loading of each eigenvector is positive.
inline MatrixXd isomap_embed(const MatrixXd& centers, int d, int k = 0) {
  const int N_in = static_cast<int>(centers.rows());
  if (N_in < d + 2) throw std::invalid_argument("isomap_embed: need at least d + 2 points");

  // merge exact duplicates; re-expand afterwards
  std::vector<int> rep;          // unique row indices
  std::vector<int> owner(static_cast<size_t>(N_in));  // map input -> unique slot
  for (int i = 0; i < N_in; ++i) {
    int found = -1;
    for (size_t u = 0; u < rep.size(); ++u)
      if ((centers.row(i) - centers.row(rep[u])).norm() == 0.0) {
        found = static_cast<int>(u);
        break;
      }
    if (found < 0) {
      rep.push_back(i);
      owner[static_cast<size_t>(i)] = static_cast<int>(rep.size()) - 1;
    } else {
      owner[static_cast<size_t>(i)] = found;
    }
  }
  const int N = static_cast<int>(rep.size());
  if (N < d + 2) throw std::invalid_argument("isomap_embed: fewer than d + 2 distinct points");
  MatrixXd uniq(N, centers.cols());
  for (int u = 0; u < N; ++u) uniq.row(u) = centers.row(rep[static_cast<size_t>(u)]);

  if (k <= 0) k = default_isomap_k(d, N);
  GeodesicGraph g = build_geodesic_graph(uniq, k);

  MatrixXd D2 = g.dist.array().square();
  MatrixXd J = MatrixXd::Identity(N, N).array() - 1.0 / N;
  MatrixXd B = -0.5 * J * D2 * J;
  B = 0.5 * (B + B.transpose());  // guard symmetry against roundoff

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(B);
  if (eig.info() != Eigen::Success) throw std::runtime_error("isomap_embed: spectral solver failed");

  MatrixXd coords(N, d);
  for (int c = 0; c < d; ++c) {
    int idx = N - 1 - c;  // eigenvalues ascend in Eigen
    VectorXd v = eig.eigenvectors().col(idx);
    for (int i = 0; i < N; ++i)
      if (std::abs(v[i]) > 1e-12) {
        if (v[i] < 0.0) v = -v;
        break;
      }
    double lam = std::max(eig.eigenvalues()[idx], 0.0);
    coords.col(c) = v * std::sqrt(lam);
  }

  MatrixXd out(N_in, d);
  for (int i = 0; i < N_in; ++i) out.row(i) = coords.row(owner[static_cast<size_t>(i)]);
  return out;
}

}  // namespace lpme
