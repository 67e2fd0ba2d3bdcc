#pragma once

// Linear/bilinear finite elements on the subdivided mesh, DOF bookkeeping, quadrature.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <span>
#include <unordered_map>
#include <vector>

#include "fsic/errors.hpp"
#include "fsic/mesh_patch.hpp"

namespace fsic {

enum Field : int { U1 = 0, U2 = 1, P = 2, D1 = 3, D2 = 4, DD1 = 5, DD2 = 6 };
inline constexpr int kFieldCount = 7;

inline bool is_fluid_field(int f) { return f <= P; }

inline int dof_index(int vertex, int field) { return kFieldCount * vertex + field; }

struct QuadraturePoint {
  Vec2 ref;
  double weight;
};

/// Degree-4 rule on the reference triangle (0,0),(1,0),(0,1); weights sum to 1/2.
inline const std::vector<QuadraturePoint>& triangle_rule() {
  static const std::vector<QuadraturePoint> rule = [] {
    const double a = 0.445948490915965, b = 0.091576213509771;
    const double wa = 0.223381589678011 / 2, wb = 0.109951743655322 / 2;
    return std::vector<QuadraturePoint>{{{a, a}, wa},         {{1 - 2 * a, a}, wa}, {{a, 1 - 2 * a}, wa},
                                        {{b, b}, wb},         {{1 - 2 * b, b}, wb}, {{b, 1 - 2 * b}, wb}};
  }();
  return rule;
}

/// Three-point Gauss rule on [0,1].
inline const std::array<std::pair<double, double>, 3>& line_rule() {
  static const std::array<std::pair<double, double>, 3> rule{
      {{0.5 - 0.5 * std::sqrt(0.6), 5.0 / 18}, {0.5, 8.0 / 18}, {0.5 + 0.5 * std::sqrt(0.6), 5.0 / 18}}};
  return rule;
}

/// Tensor 3x3 Gauss rule on [0,1]^2.
inline const std::vector<QuadraturePoint>& quad_rule() {
  static const std::vector<QuadraturePoint> rule = [] {
    std::vector<QuadraturePoint> r;
    for (const auto& [x, wx] : line_rule())
      for (const auto& [y, wy] : line_rule()) r.push_back({{x, y}, wx * wy});
    return r;
  }();
  return rule;
}

/// Basis values and physical gradients at one point of a cell.
struct CellBasis {
  int nv = 0;
  std::array<double, 4> phi{};
  std::array<Vec2, 4> grad{};
  Vec2 x;
  double det = 0;
};

inline CellBasis eval_basis_ref(const SubdividedMesh& m, int c, const Vec2& r) {
  const auto& cell = m.cells[c];
  CellBasis b;
  b.nv = cell.nv;
  std::array<Vec2, 4> dref;
  if (cell.nv == 3) {
    b.phi = {1 - r.x() - r.y(), r.x(), r.y(), 0};
    dref = {Vec2(-1, -1), Vec2(1, 0), Vec2(0, 1), Vec2::Zero()};
  } else {
    const double s = r.x(), t = r.y();
    b.phi = {(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t};
    dref = {Vec2(-(1 - t), -(1 - s)), Vec2(1 - t, -s), Vec2(t, s), Vec2(-t, 1 - s)};
  }
  Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
  b.x = Vec2::Zero();
  for (int k = 0; k < cell.nv; ++k) {
    const Vec2& p = m.vertices[cell.v[k]];
    b.x += b.phi[k] * p;
    J += p * dref[k].transpose();
  }
  b.det = J.determinant();
  const Eigen::Matrix2d JinvT = J.inverse().transpose();
  for (int k = 0; k < cell.nv; ++k) b.grad[k] = JinvT * dref[k];
  return b;
}

/// Reference coordinates of a physical point (Newton iteration for bilinear maps).
inline Vec2 reference_point(const SubdividedMesh& m, int c, const Vec2& x) {
  const auto& cell = m.cells[c];
  const Vec2 p0 = m.vertices[cell.v[0]];
  if (cell.nv == 3) {
    Eigen::Matrix2d J;
    J.col(0) = m.vertices[cell.v[1]] - p0;
    J.col(1) = m.vertices[cell.v[2]] - p0;
    return J.lu().solve(x - p0);
  }
  Vec2 r(0.5, 0.5);
  for (int it = 0; it < 20; ++it) {
    const double s = r.x(), t = r.y();
    const std::array<double, 4> phi{(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t};
    const std::array<Vec2, 4> dref{Vec2(-(1 - t), -(1 - s)), Vec2(1 - t, -s), Vec2(t, s), Vec2(-t, 1 - s)};
    Vec2 f = -x;
    Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
    for (int k = 0; k < 4; ++k) {
      f += phi[k] * m.vertices[cell.v[k]];
      J += m.vertices[cell.v[k]] * dref[k].transpose();
    }
    Vec2 dr = J.lu().solve(f);
    r -= dr;
    if (dr.norm() < 1e-15) break;
  }
  return r;
}

inline CellBasis eval_basis_at(const SubdividedMesh& m, int c, const Vec2& x) {
  return eval_basis_ref(m, c, reference_point(m, c, x));
}

/// Calls f(basis, weight) for every quadrature point of cell c; weight includes |det J|.
template <class F>
void for_each_cell_point(const SubdividedMesh& m, int c, F&& f) {
  const auto& rule = m.cells[c].nv == 3 ? triangle_rule() : quad_rule();
  for (const auto& q : rule) {
    CellBasis b = eval_basis_ref(m, c, q.ref);
    f(b, q.weight * std::abs(b.det));
  }
}

/// Calls f(x, weight) at the Gauss points of segment [pa, pb].
template <class F>
void for_each_segment_point(const Vec2& pa, const Vec2& pb, F&& f) {
  const double len = (pb - pa).norm();
  for (const auto& [s, w] : line_rule()) f(Vec2(pa + s * (pb - pa)), w * len);
}

struct Constraint {
  int dof;
  double value;
};

/// Active/constrained flags and the numbering of free unknowns.
class DofHandler {
 public:
  DofHandler() = default;
  DofHandler(const SubdividedMesh& m, std::span<const Constraint> constraints) {
    const int nv = m.vertex_count();
    active_.assign(static_cast<std::size_t>(kFieldCount) * nv, 0);
    constrained_.assign(active_.size(), 0);
    value_.assign(active_.size(), 0.0);
    for (const auto& c : m.cells) {
      const bool fl = is_fluid_like(c.tag);
      for (int k = 0; k < c.nv; ++k)
        for (int f = 0; f < kFieldCount; ++f)
          if (is_fluid_field(f) == fl) active_[dof_index(c.v[k], f)] = 1;
    }
    for (const auto& c : constraints) {
      if (c.dof < 0 || c.dof >= static_cast<int>(active_.size())) throw ConfigError("constraint dof out of range");
      if (!active_[c.dof]) continue;
      constrained_[c.dof] = 1;
      value_[c.dof] = c.value;
    }
    unknown_.assign(active_.size(), -1);
    n_unknowns_ = 0;
    for (std::size_t k = 0; k < active_.size(); ++k)
      if (active_[k] && !constrained_[k]) unknown_[k] = n_unknowns_++;
    free_dofs_.reserve(n_unknowns_);
    for (std::size_t k = 0; k < active_.size(); ++k)
      if (unknown_[k] >= 0) free_dofs_.push_back(static_cast<int>(k));
  }

  int dof_count() const { return static_cast<int>(active_.size()); }
  int vertex_count() const { return dof_count() / kFieldCount; }
  int unknown_count() const { return n_unknowns_; }
  int unknown(int dof) const { return unknown_[dof]; }
  bool active(int dof) const { return active_[dof] != 0; }
  bool constrained(int dof) const { return constrained_[dof] != 0; }
  bool vertex_active(int v, int field) const { return active(dof_index(v, field)); }
  const std::vector<int>& free_dofs() const { return free_dofs_; }

  void apply_constraints(Eigen::VectorXd& U) const {
    for (std::size_t k = 0; k < active_.size(); ++k)
      if (constrained_[k]) U[k] = value_[k];
  }

  Eigen::VectorXd restrict(const Eigen::VectorXd& full) const {
    Eigen::VectorXd r(n_unknowns_);
    for (int k = 0; k < n_unknowns_; ++k) r[k] = full[free_dofs_[k]];
    return r;
  }

 private:
  std::vector<char> active_, constrained_;
  std::vector<double> value_;
  std::vector<int> unknown_, free_dofs_;
  int n_unknowns_ = 0;
};

/// Nodal values, seven fields per lattice vertex.
struct State {
  Eigen::VectorXd values;
  double time = 0;

  static State zeros(int vertex_count) { return {Eigen::VectorXd::Zero(kFieldCount * vertex_count), 0.0}; }
  double operator()(int vertex, int field) const { return values[dof_index(vertex, field)]; }
  double& operator()(int vertex, int field) { return values[dof_index(vertex, field)]; }
};

/// Nodal interpolation of a scalar function into one field.
template <class F>
void interpolate(const SubdividedMesh& m, F&& f, int field, Eigen::VectorXd& values) {
  for (int v = 0; v < m.vertex_count(); ++v) values[dof_index(v, field)] = f(m.vertices[v]);
}

/// Value and gradient of one field of a nodal vector at a basis point.
struct FieldValue {
  double value = 0;
  Vec2 grad = Vec2::Zero();
};

inline FieldValue field_at(const SubdividedMesh& m, int c, const CellBasis& b, const Eigen::VectorXd& U, int field) {
  FieldValue r;
  for (int k = 0; k < b.nv; ++k) {
    const double u = U[dof_index(m.cells[c].v[k], field)];
    r.value += b.phi[k] * u;
    r.grad += u * b.grad[k];
  }
  return r;
}

/// Solid-velocity projection (d - d_old)/dt onto the solid space via the solid mass matrix.
/// Returns nodal values for both components; zero outside the solid closure.
inline Eigen::VectorXd project_velocity(const SubdividedMesh& m, const Eigen::VectorXd& d_new,
                                        const Eigen::VectorXd& d_old, double dt) {
  if (!(dt > 0)) throw ConfigError("time step must be positive");
  const int nv = m.vertex_count();
  std::vector<int> map(nv, -1);
  int n = 0;
  for (const auto& c : m.cells)
    if (c.tag == Tag::solid)
      for (int k = 0; k < c.nv; ++k)
        if (map[c.v[k]] < 0) map[c.v[k]] = n++;
  if (n == 0) throw ConfigError("projection onto an empty solid region");
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
  for (int c = 0; c < m.cell_count(); ++c) {
    if (m.cells[c].tag != Tag::solid) continue;
    for_each_cell_point(m, c, [&](const CellBasis& b, double w) {
      Vec2 rate = Vec2::Zero();
      for (int k = 0; k < b.nv; ++k) {
        const int v = m.cells[c].v[k];
        rate += b.phi[k] * Vec2(d_new[2 * v] - d_old[2 * v], d_new[2 * v + 1] - d_old[2 * v + 1]) / dt;
      }
      for (int a = 0; a < b.nv; ++a) {
        const int ia = map[m.cells[c].v[a]];
        rhs.row(ia) += w * b.phi[a] * rate.transpose();
        for (int k = 0; k < b.nv; ++k) trip.emplace_back(ia, map[m.cells[c].v[k]], w * b.phi[a] * b.phi[k]);
      }
    });
  }
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw UndefinedError("singular solid mass matrix");
  Eigen::MatrixXd sol = ldlt.solve(rhs);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * nv);
  for (int v = 0; v < nv; ++v)
    if (map[v] >= 0) out.segment<2>(2 * v) = sol.row(map[v]).transpose();
  return out;
}

/// Mesh edge with its one or two adjacent cells.
struct MeshEdge {
  int a, b;
  std::array<int, 2> cell{-1, -1};
};

inline std::vector<MeshEdge> build_edges(const SubdividedMesh& m) {
  std::unordered_map<std::uint64_t, int> index;
  std::vector<MeshEdge> edges;
  index.reserve(static_cast<std::size_t>(m.cell_count()) * 3);
  for (int c = 0; c < m.cell_count(); ++c) {
    const auto& cell = m.cells[c];
    for (int k = 0; k < cell.nv; ++k) {
      int a = cell.v[k], b = cell.v[(k + 1) % cell.nv];
      const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
      auto [it, fresh] = index.emplace(key, static_cast<int>(edges.size()));
      if (fresh) edges.push_back({a, b, {c, -1}});
      else edges[it->second].cell[1] = c;
    }
  }
  return edges;
}

}  // namespace fsic
