#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lpme/lpme.hpp"

namespace lpme {

namespace detail {

struct Tri {
  Eigen::Vector3d a, b, c;
};

// Crossing of an axis-aligned ray with a triangle: the ray runs along `axis`
// through (u, v) in the other two coordinates. Returns true and the crossing
// coordinate along the axis when the ray pierces the triangle interior.
inline bool ray_hits(const Tri& t, int axis, double u, double v, double* hit) {
  const int ui = (axis + 1) % 3, vi = (axis + 2) % 3;
  double ax = t.a[ui] - u, ay = t.a[vi] - v;
  double bx = t.b[ui] - u, by = t.b[vi] - v;
  double cx = t.c[ui] - u, cy = t.c[vi] - v;
  double d1 = ax * by - ay * bx;
  double d2 = bx * cy - by * cx;
  double d3 = cx * ay - cy * ax;
  bool pos = d1 > 0 || d2 > 0 || d3 > 0;
  bool neg = d1 < 0 || d2 < 0 || d3 < 0;
  if (pos && neg) return false;
  double area = d1 + d2 + d3;
  if (area == 0.0) return false;  // degenerate in this projection
  double w_a = d2 / area, w_b = d3 / area, w_c = d1 / area;
  *hit = w_a * t.a[axis] + w_b * t.b[axis] + w_c * t.c[axis];
  return true;
}

}  // namespace detail

/// Voxel-counting volume of the closed surface embedded by the model at time
/// t (d = 2 only). The surface is sampled on a param_resolution^2 lattice,
/// triangulated, and voxel centers are classified by parity ray casting in
/// the three axis directions with majority voting. Augmented coordinates
/// beyond the first three are dropped. Throws "surface not watertight" when
/// more than 2% of voxels lie on rays with an odd crossing count.
inline double estimate_volume(const LongitudinalModel& m, double t, double voxel,
                              int param_resolution = 64) {
  if (m.d != 2) throw std::invalid_argument("estimate_volume: requires an intrinsic surface (d = 2)");
  if (m.D < 3) throw std::invalid_argument("estimate_volume: requires ambient dimension >= 3");
  if (!(voxel > 0.0)) throw std::invalid_argument("estimate_volume: voxel edge must be positive");
  const int R = std::max(param_resolution, 3);

  SplineModel f = model_at_time(m, t);
  VectorXd lo = m.grid.colwise().minCoeff(), hi = m.grid.colwise().maxCoeff();

  // The parameterization is only supported where parameters were actually
  // fitted; lattice cells far from that support would sample extrapolation
  // flaps, so they are dropped from the triangulation.
  const MatrixXd& support = m.param_support;
  double reach = std::numeric_limits<double>::infinity();
  if (support.rows() > 1) {
    std::vector<double> nn(static_cast<size_t>(support.rows()));
    for (int i = 0; i < support.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < support.rows(); ++j) {
        if (j == i) continue;
        best = std::min(best, (support.row(i) - support.row(j)).squaredNorm());
      }
      nn[static_cast<size_t>(i)] = std::sqrt(best);
    }
    std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
    reach = 4.0 * std::max(nn[nn.size() / 2], 1e-12);
  }

  std::vector<Eigen::Vector3d> verts(static_cast<size_t>(R) * R);
  std::vector<char> keep(static_cast<size_t>(R) * R, 1);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < R; ++j) {
      VectorXd r(2);
      r[0] = lo[0] + (hi[0] - lo[0]) * i / (R - 1.0);
      r[1] = lo[1] + (hi[1] - lo[1]) * j / (R - 1.0);
      if (support.rows() > 1) {
        double best = std::numeric_limits<double>::infinity();
        for (int p = 0; p < support.rows(); ++p)
          best = std::min(best, (support.row(p).transpose() - r).squaredNorm());
        if (best > reach * reach) keep[static_cast<size_t>(i) * R + j] = 0;
      }
      VectorXd x = eval_spline(f, r);
      verts[static_cast<size_t>(i) * R + j] = x.head(3);
    }

  std::vector<detail::Tri> tris;
  tris.reserve(2u * (R - 1) * (R - 1));
  auto at = [&](int i, int j) -> const Eigen::Vector3d& {
    return verts[static_cast<size_t>(i) * R + j];
  };
  auto kept = [&](int i, int j) { return keep[static_cast<size_t>(i) * R + j] != 0; };
  for (int i = 0; i + 1 < R; ++i)
    for (int j = 0; j + 1 < R; ++j) {
      if (!(kept(i, j) && kept(i + 1, j) && kept(i, j + 1) && kept(i + 1, j + 1))) continue;
      tris.push_back({at(i, j), at(i + 1, j), at(i, j + 1)});
      tris.push_back({at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  if (tris.empty()) throw std::runtime_error("estimate_volume: empty surface sample");

  // The caller asserts a closed surface; the parameterization of a closed
  // manifold carries one periodic direction (the lift's angle) plus possibly
  // small boundary loops (pole caps). Stitch the seam when the opposite
  // lattice edges land near each other, and fan small closing loops. Open
  // surfaces fail both gates and stay open.
  double surf_diag = 0.0;
  {
    Eigen::Vector3d slo = tris[0].a, shi = tris[0].a;
    for (const auto& tri : tris)
      for (const auto* v : {&tri.a, &tri.b, &tri.c}) {
        slo = slo.cwiseMin(*v);
        shi = shi.cwiseMax(*v);
      }
    surf_diag = (shi - slo).norm();
  }
  bool stitched_j = false, stitched_i = false;
  {
    std::vector<double> gaps;
    for (int i = 0; i < R; ++i)
      if (kept(i, 0) && kept(i, R - 1)) gaps.push_back((at(i, 0) - at(i, R - 1)).norm());
    if (gaps.size() > static_cast<size_t>(R / 2)) {
      std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
      if (gaps[gaps.size() / 2] < 0.2 * surf_diag) {
        stitched_j = true;
        for (int i = 0; i + 1 < R; ++i) {
          if (!(kept(i, R - 1) && kept(i + 1, R - 1) && kept(i, 0) && kept(i + 1, 0))) continue;
          tris.push_back({at(i, R - 1), at(i + 1, R - 1), at(i, 0)});
          tris.push_back({at(i + 1, R - 1), at(i + 1, 0), at(i, 0)});
        }
      }
    }
  }
  {
    std::vector<double> gaps;
    for (int j = 0; j < R; ++j)
      if (kept(0, j) && kept(R - 1, j)) gaps.push_back((at(0, j) - at(R - 1, j)).norm());
    if (gaps.size() > static_cast<size_t>(R / 2)) {
      std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
      if (gaps[gaps.size() / 2] < 0.2 * surf_diag) {
        stitched_i = true;
        for (int j = 0; j + 1 < R; ++j) {
          if (!(kept(R - 1, j) && kept(R - 1, j + 1) && kept(0, j) && kept(0, j + 1))) continue;
          tris.push_back({at(R - 1, j), at(0, j), at(R - 1, j + 1)});
          tris.push_back({at(0, j), at(0, j + 1), at(R - 1, j + 1)});
        }
      }
    }
  }
  auto fan_edge = [&](bool row_edge, int fixed) {
    std::vector<Eigen::Vector3d> loop;
    for (int k = 0; k < R; ++k) {
      int i = row_edge ? fixed : k;
      int j = row_edge ? k : fixed;
      if (kept(i, j)) loop.push_back(at(i, j));
    }
    if (loop.size() < 3) return;
    double perimeter = 0.0;
    for (size_t k = 0; k + 1 < loop.size(); ++k) perimeter += (loop[k + 1] - loop[k]).norm();
    double closure = (loop.front() - loop.back()).norm();
    // a cap loop returns to its start; an open edge ends far from it
    if (closure > 0.3 * perimeter) return;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& v : loop) centroid += v;
    centroid /= static_cast<double>(loop.size());
    for (size_t k = 0; k + 1 < loop.size(); ++k) tris.push_back({loop[k], loop[k + 1], centroid});
    tris.push_back({loop.back(), loop.front(), centroid});
  };
  if (!stitched_i) {
    fan_edge(true, 0);
    fan_edge(true, R - 1);
  }
  if (!stitched_j) {
    fan_edge(false, 0);
    fan_edge(false, R - 1);
  }

  Eigen::Vector3d blo = tris[0].a, bhi = tris[0].a;
  for (const auto& tri : tris)
    for (const auto* v : {&tri.a, &tri.b, &tri.c}) {
      blo = blo.cwiseMin(*v);
      bhi = bhi.cwiseMax(*v);
    }
  blo.array() -= voxel;
  bhi.array() += voxel;
  int n[3];
  for (int a = 0; a < 3; ++a) n[a] = std::max(1, static_cast<int>(std::ceil((bhi[a] - blo[a]) / voxel)));
  auto center = [&](int a, int idx) {
    // slight deterministic shear keeps rays off triangle edges and vertices
    return blo[a] + (idx + 0.5 + 1e-4 * ((idx % 7) - 3)) * voxel;
  };

  const long total = static_cast<long>(n[0]) * n[1] * n[2];
  std::vector<unsigned char> votes(static_cast<size_t>(total), 0);
  std::vector<unsigned char> bad(static_cast<size_t>(total), 0);
  auto index = [&](int ix, int iy, int iz) {
    return (static_cast<size_t>(ix) * n[1] + iy) * n[2] + iz;
  };

  for (int axis = 0; axis < 3; ++axis) {
    const int ui = (axis + 1) % 3, vi = (axis + 2) % 3;
    for (int iu = 0; iu < n[ui]; ++iu)
      for (int iv = 0; iv < n[vi]; ++iv) {
        double u = center(ui, iu), v = center(vi, iv);
        std::vector<double> hits;
        for (const auto& tri : tris) {
          double h;
          if (detail::ray_hits(tri, axis, u, v, &h)) hits.push_back(h);
        }
        std::sort(hits.begin(), hits.end());
        bool odd_total = hits.size() % 2 != 0;
        for (int ia = 0; ia < n[axis]; ++ia) {
          double c = center(axis, ia);
          size_t below = std::lower_bound(hits.begin(), hits.end(), c) - hits.begin();
          int idx3[3];
          idx3[axis] = ia;
          idx3[ui] = iu;
          idx3[vi] = iv;
          size_t id = index(idx3[0], idx3[1], idx3[2]);
          if (below % 2 == 1) ++votes[id];
          if (odd_total) bad[id] = 1;
        }
      }
  }

  // a voxel witnesses a gap when it lies on a ray with an odd crossing count
  // and the three directional verdicts disagree
  long n_bad = 0, n_inside = 0;
  for (long i = 0; i < total; ++i) {
    int v = votes[static_cast<size_t>(i)];
    if (bad[static_cast<size_t>(i)] && v != 0 && v != 3) ++n_bad;
    if (v >= 2) ++n_inside;
  }
  if (static_cast<double>(n_bad) > 0.02 * static_cast<double>(total))
    throw std::runtime_error("surface not watertight");
  return static_cast<double>(n_inside) * voxel * voxel * voxel;
}

}  // namespace lpme
