#pragma once

// Interface and volume diagnostics, energy terms, and post-run normalization.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "fsic/contact_model.hpp"
#include "fsic/domain_tracking.hpp"
#include "fsic/errors.hpp"
#include "fsic/fe_space.hpp"
#include "fsic/fsi_forms.hpp"

namespace fsic {

/// Raw per-step quantities; normalized contact/velocity functionals are derived afterwards.
struct StepFunctionals {
  double d_min = 0;
  double J_p = 0;           // |int_Gamma p|
  double J_Pgamma = 0;      // gamma_C int_Gamma [P_gamma]_+
  double contact_norm = 0;  // || gamma_C^{1/2} [P]_+ + gamma_C^{-1/2} lambda ||_Gamma
  double lambda_norm = 0;   // || lambda ||_Gamma
  double vel_fsi_norm = 0;  // || (ddot d - u) . n ||_{Gamma_fsi}
  double un_norm = 0;       // || u . n ||_{Gamma_fsi}
  double ddn_norm = 0;      // || ddot d . n ||_{Gamma_fsi}
  double J_vel_C = 0;       // int_{Gamma_C} (ddot d - u) . n
  double J_sigma_sn = 0;    // int_Gamma sigma_s,n
  double p_mid = 0;         // || p ||_{L2(fluid, 0.4 <= x <= 0.6)}
  int active_points = 0;
};

inline StepFunctionals interface_functionals(const std::vector<ContactPoint>& pts, double gamma_c) {
  StepFunctionals f;
  double pint = 0, cn = 0, ln = 0, vf = 0, un = 0, dn = 0;
  for (const auto& p : pts) {
    const double w = p.weight;
    const double Pp = positive_part(p.p_gamma);
    pint += w * p.pressure;
    f.J_Pgamma += w * gamma_c * Pp;
    const double c = std::sqrt(gamma_c) * Pp + p.lambda / std::sqrt(gamma_c);
    cn += w * c * c;
    ln += w * p.lambda * p.lambda;
    f.J_sigma_sn += w * p.sigma_sn;
    if (p.p_gamma > 0) {
      ++f.active_points;
      f.J_vel_C += w * p.jump_n;
    } else {
      vf += w * p.jump_n * p.jump_n;
      un += w * p.un * p.un;
      dn += w * p.ddn * p.ddn;
    }
  }
  f.J_p = std::abs(pint);
  f.contact_norm = std::sqrt(cn);
  f.lambda_norm = std::sqrt(ln);
  f.vel_fsi_norm = std::sqrt(vf);
  f.un_norm = std::sqrt(un);
  f.ddn_norm = std::sqrt(dn);
  return f;
}

namespace detail {
inline std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, double x0, bool keep_right) {
  std::vector<Vec2> out;
  auto inside = [&](const Vec2& p) { return keep_right ? p.x() >= x0 : p.x() <= x0; };
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Vec2& a = poly[k];
    const Vec2& b = poly[(k + 1) % poly.size()];
    if (inside(a)) out.push_back(a);
    if (inside(a) != inside(b)) {
      const double s = (x0 - a.x()) / (b.x() - a.x());
      out.push_back(a + s * (b - a));
    }
  }
  return out;
}
}  // namespace detail

/// L2 norm of the pressure over fluid cells clipped to the slab x_lo <= x <= x_hi.
inline double pressure_norm_slab(const SubdividedMesh& m, const Eigen::VectorXd& U, double x_lo, double x_hi) {
  double acc = 0;
  for (int c = 0; c < m.cell_count(); ++c) {
    if (m.cells[c].tag != Tag::fluid) continue;
    std::vector<Vec2> poly;
    double cmin = HUGE_VAL, cmax = -HUGE_VAL;
    for (int k = 0; k < m.cells[c].nv; ++k) {
      poly.push_back(m.cell_vertex(c, k));
      cmin = std::min(cmin, poly.back().x());
      cmax = std::max(cmax, poly.back().x());
    }
    if (cmax <= x_lo || cmin >= x_hi) continue;
    if (cmin >= x_lo && cmax <= x_hi) {
      for_each_cell_point(m, c, [&](const CellBasis& B, double w) {
        const double p = field_at(m, c, B, U, P).value;
        acc += w * p * p;
      });
      continue;
    }
    poly = detail::clip_halfplane(detail::clip_halfplane(poly, x_lo, true), x_hi, false);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      const std::array<Vec2, 3> t{poly[0], poly[k], poly[k + 1]};
      const double A = std::abs(geom::signed_area(t));
      for (const auto& q : triangle_rule()) {
        const Vec2 x = t[0] + q.ref.x() * (t[1] - t[0]) + q.ref.y() * (t[2] - t[0]);
        CellBasis B = eval_basis_at(m, c, x);
        const double p = field_at(m, c, B, U, P).value;
        acc += 2 * A * q.weight * p * p;
      }
    }
  }
  return std::sqrt(acc);
}

struct EnergyTerms {
  double fluid_kinetic = 0;   // ||u||^2 over fluid and artificial fluid
  double solid_kinetic = 0;   // ||ddot d||^2
  double elastic = 0;         // (sigma_s(d), grad d)
  double d_h1 = 0;            // ||d||^2_{H1}
  double viscous = 0;         // nu ||grad u||^2
  double pressure_stab = 0;   // S_p(p, p)
  double artificial = 0;      // gamma_a ||u||^2 on artificial fluid
  double fsi_penalty = 0;     // gamma_fsi ||ddot d - u||^2 (normal part on slip interfaces)
  double contact = 0;         // || gamma_C^{-1/2} lambda + gamma_C^{1/2} [P]_+ ||^2
  double mechanical() const { return 0.5 * (fluid_kinetic + solid_kinetic + elastic); }
};

inline EnergyTerms energy_terms(const SubdividedMesh& m, const std::vector<MeshEdge>& edges, const Eigen::VectorXd& U,
                                const MaterialParams& mat, const NitscheParams& nit, InterfaceMode mode,
                                const std::vector<ContactPoint>& pts, double gamma_c) {
  EnergyTerms e;
  const double ga = nit.gamma_a(m.h());
  for (int c = 0; c < m.cell_count(); ++c) {
    const Tag tag = m.cells[c].tag;
    for_each_cell_point(m, c, [&](const CellBasis& B, double w) {
      if (is_fluid_like(tag)) {
        auto u1 = field_at(m, c, B, U, U1), u2 = field_at(m, c, B, U, U2);
        const double uu = u1.value * u1.value + u2.value * u2.value;
        e.fluid_kinetic += w * uu;
        e.viscous += w * mat.nu_f * (u1.grad.squaredNorm() + u2.grad.squaredNorm());
        if (tag == Tag::artificial) e.artificial += w * ga * uu;
      } else {
        auto d1 = field_at(m, c, B, U, D1), d2 = field_at(m, c, B, U, D2);
        auto v1 = field_at(m, c, B, U, DD1), v2 = field_at(m, c, B, U, DD2);
        e.solid_kinetic += w * (v1.value * v1.value + v2.value * v2.value);
        Eigen::Matrix2d G;
        G.row(0) = d1.grad.transpose();
        G.row(1) = d2.grad.transpose();
        const Eigen::Matrix2d E = 0.5 * (G + G.transpose());
        const Eigen::Matrix2d S = 2 * mat.mu_s * E + mat.lambda_s * E.trace() * Eigen::Matrix2d::Identity();
        e.elastic += w * (S.array() * G.array()).sum();
        e.d_h1 += w * (d1.value * d1.value + d2.value * d2.value + G.squaredNorm());
      }
    });
  }
  for (const auto& ed : edges) {
    const int c0 = ed.cell[0], c1 = ed.cell[1];
    if (c1 < 0 || !is_fluid_like(m.cells[c0].tag) || !is_fluid_like(m.cells[c1].tag)) continue;
    const Vec2 pa = m.vertices[ed.a], pb = m.vertices[ed.b];
    const double len = (pb - pa).norm();
    const Vec2 t = (pb - pa) / len;
    const Vec2 ne(t.y(), -t.x());
    const double hn = std::min(edge_height(m, c0, len), edge_height(m, c1, len));
    const double coef = nit.gamma_cip * hn * hn * hn / mat.nu_f;
    for_each_segment_point(pa, pb, [&](const Vec2& x, double w) {
      CellBasis B0 = eval_basis_at(m, c0, x), B1 = eval_basis_at(m, c1, x);
      const double j = (field_at(m, c0, B0, U, P).grad - field_at(m, c1, B1, U, P).grad).dot(ne);
      e.pressure_stab += w * coef * j * j;
    });
  }
  const double gf = nit.gamma_fsi(mat.nu_f, m.h());
  for (const auto& ie : m.interface_edges) {
    if (ie.fluid_cell < 0) continue;
    for_each_segment_point(m.vertices[ie.a], m.vertices[ie.b], [&](const Vec2& x, double w) {
      CellBasis Bf = eval_basis_at(m, ie.fluid_cell, x), Bs = eval_basis_at(m, ie.solid_cell, x);
      Vec2 jump(field_at(m, ie.solid_cell, Bs, U, DD1).value - field_at(m, ie.fluid_cell, Bf, U, U1).value,
                field_at(m, ie.solid_cell, Bs, U, DD2).value - field_at(m, ie.fluid_cell, Bf, U, U2).value);
      const double j2 = mode == InterfaceMode::slip ? std::pow(jump.dot(ie.normal), 2) : jump.squaredNorm();
      e.fsi_penalty += w * gf * j2;
    });
  }
  for (const auto& p : pts) {
    const double c = p.lambda / std::sqrt(gamma_c) + std::sqrt(gamma_c) * positive_part(p.p_gamma);
    e.contact += p.weight * c * c;
  }
  return e;
}

/// Mean of a per-step series over the steps with t <= t_max.
inline double window_average(const std::vector<double>& t, const std::vector<double>& v, double t_max) {
  double s = 0;
  int n = 0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] <= t_max + 1e-12) {
      s += v[k];
      ++n;
    }
  if (n == 0) throw UndefinedError("empty averaging window");
  return s / n;
}

/// value / normalization, undefined when the normalization vanishes.
inline double normalized(double value, double norm) {
  if (!(norm > 0)) throw UndefinedError("normalization is zero");
  return value / norm;
}

}  // namespace fsic
