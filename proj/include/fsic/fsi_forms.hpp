#pragma once

// Residual/Jacobian contributions of the fluid, the solid and their Nitsche coupling.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "fsic/errors.hpp"
#include "fsic/fe_space.hpp"
#include "fsic/mesh_patch.hpp"

namespace fsic {

struct MaterialParams {
  double nu_f = 1.0;
  double mu_s = 2e6;
  double lambda_s = 2e6;
  std::function<Vec2(const Vec2&, double)> f_fluid;  // empty means zero
  std::function<Vec2(const Vec2&, double)> f_solid;

  void validate() const {
    if (!(nu_f > 0) || !(mu_s > 0) || !(lambda_s >= 0)) throw ConfigError("invalid material parameters");
  }
};

struct NitscheParams {
  double gamma_fsi0 = 1e3;
  double gamma_pt = 1e-2;
  double gamma_cip = 1e-2;
  double gamma_a0 = 0.0;

  double gamma_fsi(double nu, double h) const { return gamma_fsi0 * nu / h; }
  double gamma_a(double h) const { return gamma_a0 / (h * h); }
  void validate() const {
    if (!(gamma_fsi0 > 0) || gamma_pt < 0 || gamma_cip < 0 || gamma_a0 < 0) throw ConfigError("invalid stabilization parameters");
  }
};

enum class InterfaceMode { noslip, slip };

/// Residual (full DOF layout) and Jacobian (free unknowns only).
struct AssembledSystem {
  Eigen::VectorXd residual;
  Eigen::VectorXd scale;  // row-wise |K||U| + |b|, used as round-off yardstick
  Eigen::SparseMatrix<double> jacobian;
  int interface_points = 0;
  int active_points = 0;
  bool slip = false;
};

/// Accumulates element contributions r = K U - b (linear) or (r, J) (nonlinear).
class SystemAssembler {
 public:
  SystemAssembler(const DofHandler& dofs, const Eigen::VectorXd& U)
      : dofs_(dofs), U_(U), residual_(Eigen::VectorXd::Zero(U.size())), scale_(Eigen::VectorXd::Zero(U.size())) {}

  const Eigen::VectorXd& state() const { return U_; }
  const DofHandler& dofs() const { return dofs_; }

  void add_linear(std::span<const int> idx, const Eigen::MatrixXd& K, const Eigen::VectorXd& b) {
    const int n = static_cast<int>(idx.size());
    Eigen::VectorXd u(n);
    for (int k = 0; k < n; ++k) u[k] = U_[idx[k]];
    Eigen::VectorXd r = K * u - b;
    Eigen::VectorXd s = K.cwiseAbs() * u.cwiseAbs() + b.cwiseAbs();
    for (int k = 0; k < n; ++k) {
      residual_[idx[k]] += r[k];
      scale_[idx[k]] += s[k];
    }
    add_jacobian(idx, K);
  }

  void add_nonlinear(std::span<const int> idx, const Eigen::VectorXd& r, const Eigen::MatrixXd& J) {
    const int n = static_cast<int>(idx.size());
    for (int k = 0; k < n; ++k) {
      residual_[idx[k]] += r[k];
      scale_[idx[k]] += std::abs(r[k]);
    }
    add_jacobian(idx, J);
  }

  AssembledSystem finish() {
    AssembledSystem sys;
    const int n = dofs_.unknown_count();
    sys.jacobian.resize(n, n);
    sys.jacobian.setFromTriplets(trip_.begin(), trip_.end());
    sys.residual = std::move(residual_);
    sys.scale = std::move(scale_);
    sys.interface_points = interface_points;
    sys.active_points = active_points;
    sys.slip = slip;
    trip_.clear();
    return sys;
  }

  int interface_points = 0;
  int active_points = 0;
  bool slip = false;

 private:
  void add_jacobian(std::span<const int> idx, const Eigen::MatrixXd& K) {
    const int n = static_cast<int>(idx.size());
    for (int i = 0; i < n; ++i) {
      const int ri = dofs_.unknown(idx[i]);
      if (ri < 0) continue;
      for (int j = 0; j < n; ++j) {
        const int cj = dofs_.unknown(idx[j]);
        if (cj < 0 || K(i, j) == 0.0) continue;
        trip_.emplace_back(ri, cj, K(i, j));
      }
    }
  }

  const DofHandler& dofs_;
  const Eigen::VectorXd& U_;
  Eigen::VectorXd residual_, scale_;
  std::vector<Eigen::Triplet<double>> trip_;
};

inline std::vector<int> fluid_cell_dofs(const SubdividedMesh& m, int c) {
  std::vector<int> idx;
  for (int k = 0; k < m.cells[c].nv; ++k)
    for (int f : {U1, U2, P}) idx.push_back(dof_index(m.cells[c].v[k], f));
  return idx;
}

inline std::vector<int> solid_cell_dofs(const SubdividedMesh& m, int c) {
  std::vector<int> idx;
  for (int k = 0; k < m.cells[c].nv; ++k)
    for (int f : {D1, D2, DD1, DD2}) idx.push_back(dof_index(m.cells[c].v[k], f));
  return idx;
}

struct TimeLevel {
  double t = 0;
  double dt = 1e-5;  // +inf gives the steady operator
  double inv_dt() const { return std::isinf(dt) ? 0.0 : 1.0 / dt; }
};

/// Fluid (Stokes, optionally penalized) and solid (linear elasticity, velocity projection) volume terms.
inline void assemble_bulk(SystemAssembler& as, const SubdividedMesh& m, const Eigen::VectorXd& U_old,
                          const MaterialParams& mat, const NitscheParams& nit, const TimeLevel& tl) {
  const double idt = tl.inv_dt();
  const double ga = nit.gamma_a(m.h());
  for (int c = 0; c < m.cell_count(); ++c) {
    const auto& cell = m.cells[c];
    const int nv = cell.nv;
    if (is_fluid_like(cell.tag)) {
      const double pen = cell.tag == Tag::artificial ? ga : 0.0;
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * nv, 3 * nv);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(3 * nv);
      for_each_cell_point(m, c, [&](const CellBasis& B, double w) {
        Vec2 uold(field_at(m, c, B, U_old, U1).value, field_at(m, c, B, U_old, U2).value);
        Vec2 f = mat.f_fluid ? mat.f_fluid(B.x, tl.t) : Vec2::Zero();
        for (int a = 0; a < nv; ++a) {
          for (int i = 0; i < 2; ++i) b[3 * a + i] += w * B.phi[a] * (idt * uold[i] + f[i]);
          for (int k = 0; k < nv; ++k) {
            const double mass = w * (idt + pen) * B.phi[a] * B.phi[k];
            const double lap = w * mat.nu_f * B.grad[a].dot(B.grad[k]);
            for (int i = 0; i < 2; ++i) {
              K(3 * a + i, 3 * k + i) += mass + lap;
              for (int j = 0; j < 2; ++j) K(3 * a + i, 3 * k + j) += w * mat.nu_f * B.grad[k][i] * B.grad[a][j];
              K(3 * a + i, 3 * k + 2) -= w * B.phi[k] * B.grad[a][i];
              K(3 * a + 2, 3 * k + i) += w * B.grad[k][i] * B.phi[a];
            }
          }
        }
      });
      auto idx = fluid_cell_dofs(m, c);
      as.add_linear(idx, K, b);
    } else {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(4 * nv, 4 * nv);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(4 * nv);
      for_each_cell_point(m, c, [&](const CellBasis& B, double w) {
        Vec2 dold(field_at(m, c, B, U_old, D1).value, field_at(m, c, B, U_old, D2).value);
        Vec2 vold(field_at(m, c, B, U_old, DD1).value, field_at(m, c, B, U_old, DD2).value);
        Vec2 f = mat.f_solid ? mat.f_solid(B.x, tl.t) : Vec2::Zero();
        for (int a = 0; a < nv; ++a) {
          for (int i = 0; i < 2; ++i) {
            b[4 * a + i] += w * B.phi[a] * (idt * vold[i] + f[i]);
            b[4 * a + 2 + i] += w * B.phi[a] * idt * dold[i];
          }
          for (int k = 0; k < nv; ++k) {
            const double mass = w * B.phi[a] * B.phi[k];
            const double lap = w * mat.mu_s * B.grad[a].dot(B.grad[k]);
            for (int i = 0; i < 2; ++i) {
              K(4 * a + i, 4 * k + 2 + i) += idt * mass;
              K(4 * a + i, 4 * k + i) += lap;
              for (int j = 0; j < 2; ++j)
                K(4 * a + i, 4 * k + j) +=
                    w * (mat.mu_s * B.grad[k][i] * B.grad[a][j] + mat.lambda_s * B.grad[k][j] * B.grad[a][i]);
              K(4 * a + 2 + i, 4 * k + i) += idt * mass;
              K(4 * a + 2 + i, 4 * k + 2 + i) -= mass;
            }
          }
        }
      });
      auto idx = solid_cell_dofs(m, c);
      as.add_linear(idx, K, b);
    }
  }
}

/// Normal traction sigma_f n = s n on lateral (x = const) boundary edges of fluid-like cells.
/// include(tag, y_mid) selects the edges that carry it.
template <class Select>
void assemble_lateral_traction(SystemAssembler& as, const SubdividedMesh& m, const std::vector<MeshEdge>& edges,
                               double s, Select&& include) {
  const Box box = m.patches.box();
  const double tol = 1e-12 * box.width();
  for (const auto& e : edges) {
    if (e.cell[1] >= 0) continue;
    const int c = e.cell[0];
    if (!is_fluid_like(m.cells[c].tag)) continue;
    const Vec2 pa = m.vertices[e.a], pb = m.vertices[e.b];
    Vec2 n;
    if (std::abs(pa.x() - box.x_lo) < tol && std::abs(pb.x() - box.x_lo) < tol) n = Vec2(-1, 0);
    else if (std::abs(pa.x() - box.x_hi) < tol && std::abs(pb.x() - box.x_hi) < tol) n = Vec2(1, 0);
    else continue;
    if (!include(m.cells[c].tag, 0.5 * (pa.y() + pb.y()))) continue;
    const int nv = m.cells[c].nv;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * nv, 3 * nv);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(3 * nv);
    for_each_segment_point(pa, pb, [&](const Vec2& x, double w) {
      CellBasis B = eval_basis_at(m, c, x);
      for (int a = 0; a < nv; ++a)
        for (int i = 0; i < 2; ++i) b[3 * a + i] += w * B.phi[a] * s * n[i];
    });
    auto idx = fluid_cell_dofs(m, c);
    as.add_linear(idx, K, b);
  }
}

inline double edge_height(const SubdividedMesh& m, int c, double len) {
  const double A = std::abs(cell_area(m, c));
  return m.cells[c].nv == 3 ? 2 * A / len : A / len;
}

/// Continuous interior penalty on pressure-gradient jumps across edges between fluid-like cells.
inline void assemble_cip(SystemAssembler& as, const SubdividedMesh& m, const std::vector<MeshEdge>& edges,
                         const MaterialParams& mat, const NitscheParams& nit) {
  if (nit.gamma_cip == 0) return;
  for (const auto& e : edges) {
    const int c0 = e.cell[0], c1 = e.cell[1];
    if (c1 < 0 || !is_fluid_like(m.cells[c0].tag) || !is_fluid_like(m.cells[c1].tag)) continue;
    const Vec2 pa = m.vertices[e.a], pb = m.vertices[e.b];
    const double len = (pb - pa).norm();
    const Vec2 t = (pb - pa) / len;
    const Vec2 ne(t.y(), -t.x());
    const double hn = std::min(edge_height(m, c0, len), edge_height(m, c1, len));
    const double coef = nit.gamma_cip * hn * hn * hn / mat.nu_f;
    const int n0 = m.cells[c0].nv, n1 = m.cells[c1].nv;
    // jump of grad p . n is constant per side for triangles, varies along the edge for quads
    std::vector<int> idx;
    for (int k = 0; k < n0; ++k) idx.push_back(dof_index(m.cells[c0].v[k], P));
    for (int k = 0; k < n1; ++k) idx.push_back(dof_index(m.cells[c1].v[k], P));
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n0 + n1, n0 + n1);
    for_each_segment_point(pa, pb, [&](const Vec2& x, double w) {
      CellBasis B0 = eval_basis_at(m, c0, x), B1 = eval_basis_at(m, c1, x);
      Eigen::VectorXd J(n0 + n1);
      for (int k = 0; k < n0; ++k) J[k] = B0.grad[k].dot(ne);
      for (int k = 0; k < n1; ++k) J[n0 + k] = -B1.grad[k].dot(ne);
      K.noalias() += w * coef * J * J.transpose();
    });
    as.add_linear(idx, K, Eigen::VectorXd::Zero(n0 + n1));
  }
}

/// Trial/test functionals of one interface quadrature point over the local
/// (fluid cell: u1,u2,p per vertex; solid cell: d1,d2,dd1,dd2 per vertex) index space.
struct InterfaceTrace {
  std::vector<int> dofs;
  int nf = 0, ns = 0;
  Vec2 x, n, tau;
  double weight = 0;
  bool has_fluid = false;
  std::array<Eigen::VectorXd, 2> u, dd, d;   // also the test functionals v, (unused), w
  Eigen::VectorXd p;
  std::array<Eigen::VectorXd, 2> sf;         // sigma_f(u,p) n
  std::array<Eigen::VectorXd, 2> sf_test;    // sigma_f(v,-q) n
  std::array<Eigen::VectorXd, 2> ss;         // sigma_s(d) n

  int size() const { return static_cast<int>(dofs.size()); }
  Eigen::VectorXd along(const std::array<Eigen::VectorXd, 2>& f, const Vec2& dir) const {
    return dir.x() * f[0] + dir.y() * f[1];
  }
};

inline std::vector<int> interface_dofs(const SubdividedMesh& m, const InterfaceEdge& e) {
  std::vector<int> idx;
  if (e.fluid_cell >= 0) idx = fluid_cell_dofs(m, e.fluid_cell);
  auto s = solid_cell_dofs(m, e.solid_cell);
  idx.insert(idx.end(), s.begin(), s.end());
  return idx;
}

inline InterfaceTrace make_trace(const SubdividedMesh& m, const InterfaceEdge& e, const Vec2& x, double w,
                                 const MaterialParams& mat) {
  InterfaceTrace tr;
  tr.dofs = interface_dofs(m, e);
  tr.has_fluid = e.fluid_cell >= 0;
  tr.nf = tr.has_fluid ? m.cells[e.fluid_cell].nv : 0;
  tr.ns = m.cells[e.solid_cell].nv;
  tr.x = x;
  tr.n = e.normal;
  tr.tau = Vec2(-e.normal.y(), e.normal.x());
  if (tr.tau.x() < 0) tr.tau = -tr.tau;
  tr.weight = w;
  const int n = tr.size();
  auto zero = [&] { return Eigen::VectorXd::Zero(n); };
  for (int i = 0; i < 2; ++i) {
    tr.u[i] = zero();
    tr.dd[i] = zero();
    tr.d[i] = zero();
    tr.sf[i] = zero();
    tr.sf_test[i] = zero();
    tr.ss[i] = zero();
  }
  tr.p = zero();
  const Vec2& nn = tr.n;
  if (tr.has_fluid) {
    CellBasis B = eval_basis_at(m, e.fluid_cell, x);
    for (int a = 0; a < tr.nf; ++a) {
      const int iu = 3 * a, ip = 3 * a + 2;
      tr.p[ip] = B.phi[a];
      for (int i = 0; i < 2; ++i) {
        tr.u[i][iu + i] = B.phi[a];
        // sigma_f(u,p) n, component i: nu sum_j (d_j u_i + d_i u_j) n_j - p n_i
        for (int k = 0; k < 2; ++k) {
          const double g = mat.nu_f * ((i == k ? B.grad[a].dot(nn) : 0.0) + B.grad[a][i] * nn[k]);
          tr.sf[i][iu + k] += g;
          tr.sf_test[i][iu + k] += g;
        }
        tr.sf[i][ip] -= B.phi[a] * nn[i];
        tr.sf_test[i][ip] += B.phi[a] * nn[i];
      }
    }
  }
  CellBasis S = eval_basis_at(m, e.solid_cell, x);
  const int off = 3 * tr.nf;
  for (int a = 0; a < tr.ns; ++a) {
    const int id = off + 4 * a, iv = off + 4 * a + 2;
    for (int i = 0; i < 2; ++i) {
      tr.d[i][id + i] = S.phi[a];
      tr.dd[i][iv + i] = S.phi[a];
      // sigma_s(d) n, component i: mu sum_j (d_j d_i + d_i d_j) n_j + lambda div d n_i
      for (int k = 0; k < 2; ++k)
        tr.ss[i][id + k] += mat.mu_s * ((i == k ? S.grad[a].dot(nn) : 0.0) + S.grad[a][i] * nn[k]) +
                            mat.lambda_s * S.grad[a][k] * nn[i];
    }
  }
  return tr;
}

/// Loops over interface quadrature points: f(edge_index, trace).
template <class F>
void for_each_interface_point(const SubdividedMesh& m, const MaterialParams& mat, F&& f) {
  for (int ei = 0; ei < static_cast<int>(m.interface_edges.size()); ++ei) {
    const auto& e = m.interface_edges[ei];
    for_each_segment_point(m.vertices[e.a], m.vertices[e.b], [&](const Vec2& x, double w) {
      InterfaceTrace tr = make_trace(m, e, x, w, mat);
      f(ei, tr);
    });
  }
}

/// Nitsche coupling of one interface point; K gains the bilinear form, no right-hand side.
inline void nitsche_point(Eigen::MatrixXd& K, const InterfaceTrace& tr, InterfaceMode mode, double gamma_fsi) {
  const double w = tr.weight;
  if (mode == InterfaceMode::noslip) {
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd jump = tr.dd[i] - tr.u[i];             // ddot(d) - u
      Eigen::VectorXd Tf = tr.sf[i] - gamma_fsi * jump;      // numerical traction
      Eigen::VectorXd test = tr.d[i] - tr.u[i];              // w - v
      K.noalias() -= w * test * Tf.transpose();
      K.noalias() -= w * tr.sf_test[i] * jump.transpose();
    }
  } else {
    const Vec2& n = tr.n;
    Eigen::VectorXd jump = tr.along(tr.dd, n) - tr.along(tr.u, n);
    Eigen::VectorXd Tfn = tr.along(tr.sf, n) - gamma_fsi * jump;
    Eigen::VectorXd test = tr.along(tr.d, n) - tr.along(tr.u, n);
    Eigen::VectorXd sq = tr.along(tr.sf_test, n);
    K.noalias() -= w * test * Tfn.transpose();
    K.noalias() -= w * sq * jump.transpose();
  }
}

/// Nitsche interface coupling on every interface edge with a fluid side.
/// point_filter(edge, point_index) may exclude points (used for the split formulation).
template <class Filter>
void assemble_nitsche(SystemAssembler& as, const SubdividedMesh& m, const MaterialParams& mat,
                      const NitscheParams& nit, InterfaceMode mode, Filter&& keep) {
  const double gf = nit.gamma_fsi(mat.nu_f, m.h());
  as.slip = mode == InterfaceMode::slip;
  int q = 0;
  for (const auto& e : m.interface_edges) {
    if (e.fluid_cell < 0) {
      q += 3;
      continue;
    }
    std::vector<int> idx = interface_dofs(m, e);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(idx.size(), idx.size());
    bool any = false;
    for_each_segment_point(m.vertices[e.a], m.vertices[e.b], [&](const Vec2& x, double w) {
      if (keep(q++)) {
        nitsche_point(K, make_trace(m, e, x, w, mat), mode, gf);
        any = true;
      }
    });
    if (any) as.add_linear(idx, K, Eigen::VectorXd::Zero(idx.size()));
  }
}

inline void assemble_nitsche(SystemAssembler& as, const SubdividedMesh& m, const MaterialParams& mat,
                             const NitscheParams& nit, InterfaceMode mode) {
  assemble_nitsche(as, m, mat, nit, mode, [](int) { return true; });
}

/// Interface pressure stabilization gamma_pt h (p - p_old, q) on the fluid-side trace.
inline void assemble_pressure_time_stab(SystemAssembler& as, const SubdividedMesh& m, const Eigen::VectorXd& U_old,
                                        const NitscheParams& nit) {
  if (nit.gamma_pt == 0) return;
  const double coef = nit.gamma_pt * m.h();
  for (const auto& e : m.interface_edges) {
    const int c = e.fluid_cell;
    if (c < 0) continue;
    const int nv = m.cells[c].nv;
    std::vector<int> idx;
    for (int k = 0; k < nv; ++k) idx.push_back(dof_index(m.cells[c].v[k], P));
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv, nv);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nv);
    for_each_segment_point(m.vertices[e.a], m.vertices[e.b], [&](const Vec2& x, double w) {
      CellBasis B = eval_basis_at(m, c, x);
      const double pold = field_at(m, c, B, U_old, P).value;
      for (int a = 0; a < nv; ++a) {
        b[a] += w * coef * pold * B.phi[a];
        for (int k = 0; k < nv; ++k) K(a, k) += w * coef * B.phi[a] * B.phi[k];
      }
    });
    as.add_linear(idx, K, b);
  }
}

}  // namespace fsic
