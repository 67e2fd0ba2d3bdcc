#pragma once

// Interface motion, gap data and extension of fields into inactive regions.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "fsic/errors.hpp"
#include "fsic/fe_space.hpp"
#include "fsic/mesh_patch.hpp"

namespace fsic {

/// Nodal values of one field along the vertical vertex line I (sorted by height).
inline std::vector<std::pair<double, double>> column_profile(const SubdividedMesh& m, const Eigen::VectorXd& U,
                                                             int I, int field) {
  const auto& pm = m.patches;
  std::vector<std::pair<double, double>> prof;
  prof.reserve(pm.vertex_rows());
  for (int J = 0; J < pm.vertex_rows(); ++J) {
    const int v = pm.vertex_index(I, J);
    prof.emplace_back(m.vertices[v].y(), U[dof_index(v, field)]);
  }
  std::sort(prof.begin(), prof.end());
  return prof;
}

inline double interpolate_profile(const std::vector<std::pair<double, double>>& prof, double y) {
  if (y <= prof.front().first) return prof.front().second;
  if (y >= prof.back().first) return prof.back().second;
  auto it = std::upper_bound(prof.begin(), prof.end(), std::make_pair(y, -HUGE_VAL));
  const auto& [y1, v1] = *it;
  const auto& [y0, v0] = *(it - 1);
  if (y1 == y0) return v1;
  return v0 + (y - y0) / (y1 - y0) * (v1 - v0);
}

struct AdvanceResult {
  InterfaceGraph iface;
  int clamped = 0;
};

/// Root of y = ref + d2(y) closest to y_old for a piecewise-linear profile d2; the box bottom
/// counts as a root when the displaced point would lie below it (clamping).
inline std::optional<double> track_height(const std::vector<std::pair<double, double>>& prof, double ref,
                                          double y_old, double y_lo, double y_hi, bool* clamped) {
  std::vector<double> ys;
  ys.push_back(y_lo);
  for (const auto& [y, v] : prof)
    if (y > y_lo && y < y_hi) ys.push_back(y);
  ys.push_back(y_hi);
  auto F = [&](double y) { return y - ref - interpolate_profile(prof, y); };
  std::optional<double> best;
  auto consider = [&](double y) {
    if (!best || std::abs(y - y_old) < std::abs(*best - y_old)) best = y;
  };
  *clamped = false;
  if (F(y_lo) >= 0) consider(y_lo);
  for (std::size_t k = 0; k + 1 < ys.size(); ++k) {
    const double a = ys[k], b = ys[k + 1];
    const double fa = F(a), fb = F(b);
    if (fa == 0) consider(a);
    if ((fa < 0 && fb > 0) || (fa > 0 && fb < 0)) consider(a - fa * (b - a) / (fb - fa));
  }
  if (F(y_hi) == 0) consider(y_hi);
  if (best && *best == y_lo && F(y_lo) > 0) *clamped = true;
  return best;
}

/// New interface heights from the vertical displacement: gamma_i = ref_i + d2(x_i, gamma_i),
/// with d2 piecewise linear along each vertical vertex line.
inline AdvanceResult advance_interface(const InterfaceGraph& ref, const InterfaceGraph& old, const Box& box,
                                       const std::vector<std::vector<std::pair<double, double>>>& d2_profiles) {
  AdvanceResult res{old, 0};
  for (std::size_t i = 0; i < ref.xs.size(); ++i) {
    bool clamped = false;
    auto y = track_height(d2_profiles[i], ref.heights[i], old.heights[i], box.y_lo, box.y_hi, &clamped);
    if (!y) throw TopologyError("interface update has no admissible position");
    res.clamped += clamped;
    res.iface.heights[i] = *y;
  }
  return res;
}

inline AdvanceResult advance_interface(const InterfaceGraph& ref, const SubdividedMesh& m, const Eigen::VectorXd& U) {
  std::vector<std::vector<std::pair<double, double>>> prof(ref.xs.size());
  for (std::size_t i = 0; i < ref.xs.size(); ++i) prof[i] = column_profile(m, U, 2 * static_cast<int>(i), D2);
  return advance_interface(ref, m.iface, m.patches.box(), prof);
}

/// Initial gap of the reference interface to a horizontal obstacle, reduced by alpha.
inline std::vector<double> gap_function(const InterfaceGraph& ref, double obstacle_height, double alpha) {
  std::vector<double> g(ref.heights.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = ref.heights[i] - obstacle_height - alpha;
    if (g[i] < 0) throw ConfigError("reference interface starts below the obstacle");
  }
  return g;
}

/// Smallest distance of the interface to the obstacle.
inline double min_gap(const InterfaceGraph& iface, double obstacle_height) {
  return iface.min_height() - obstacle_height;
}

/// Fill inactive nodal values from the interface trace (linear in x between interface vertices).
/// Interface vertices without fluid support take u = ddot(d), p = 0.
inline void extend_fields(const SubdividedMesh& m, const DofHandler& dofs, Eigen::VectorXd& U) {
  if (m.interface_edges.empty()) return;
  std::vector<int> iv;
  for (const auto& e : m.interface_edges) {
    iv.push_back(e.a);
    iv.push_back(e.b);
  }
  std::sort(iv.begin(), iv.end(), [&](int a, int b) { return m.vertices[a].x() < m.vertices[b].x(); });
  iv.erase(std::unique(iv.begin(), iv.end()), iv.end());
  const int n = static_cast<int>(iv.size());
  std::vector<double> xs(n);
  Eigen::MatrixXd trace(n, kFieldCount);
  for (int k = 0; k < n; ++k) {
    const int v = iv[k];
    xs[k] = m.vertices[v].x();
    for (int f = 0; f < kFieldCount; ++f) trace(k, f) = U[dof_index(v, f)];
    if (!dofs.vertex_active(v, U1)) {
      trace(k, U1) = U[dof_index(v, DD1)];
      trace(k, U2) = U[dof_index(v, DD2)];
      trace(k, P) = 0.0;
    }
  }
  for (int v = 0; v < m.vertex_count(); ++v) {
    const double x = m.vertices[v].x();
    int k1 = static_cast<int>(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
    int k0 = k1;
    double s = 0;
    if (k1 >= n) k0 = k1 = n - 1;
    else if (k1 > 0 && xs[k1] != x) {
      k0 = k1 - 1;
      s = (x - xs[k0]) / (xs[k1] - xs[k0]);
    }
    for (int f = 0; f < kFieldCount; ++f) {
      const int d = dof_index(v, f);
      if (dofs.active(d)) continue;
      U[d] = (1 - s) * trace(k0, f) + s * trace(k1, f);
    }
  }
}

}  // namespace fsic
