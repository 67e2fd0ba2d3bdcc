#pragma once

// Max-bracket contact condition, its flux variants, the consistency terms and the split formulation.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "fsic/errors.hpp"
#include "fsic/fe_space.hpp"
#include "fsic/fsi_forms.hpp"
#include "fsic/mesh_patch.hpp"

namespace fsic {

enum class Formulation { virtual_obstacle, relaxed, artificial_fluid, adhoc };
enum class FluxVariant { physical, numerical, slip_physical, slip_numerical, slip_extended };

inline const char* to_string(Formulation f) {
  switch (f) {
    case Formulation::virtual_obstacle: return "virtual-obstacle";
    case Formulation::relaxed: return "relaxed";
    case Formulation::artificial_fluid: return "artificial";
    case Formulation::adhoc: return "adhoc";
  }
  return "?";
}

inline const char* to_string(FluxVariant f) {
  switch (f) {
    case FluxVariant::physical: return "physical";
    case FluxVariant::numerical: return "numerical";
    case FluxVariant::slip_physical: return "slip-physical";
    case FluxVariant::slip_numerical: return "slip-numerical";
    case FluxVariant::slip_extended: return "slip-extended";
  }
  return "?";
}

inline const char* to_string(InterfaceMode m) { return m == InterfaceMode::slip ? "slip" : "noslip"; }

inline bool is_slip_flux(FluxVariant f) {
  return f == FluxVariant::slip_physical || f == FluxVariant::slip_numerical || f == FluxVariant::slip_extended;
}

/// Flux variant actually used: physical/numerical map to their slip forms on a slip interface.
inline FluxVariant effective_flux(FluxVariant f, InterfaceMode mode) {
  if (mode == InterfaceMode::slip) {
    if (f == FluxVariant::physical) return FluxVariant::slip_physical;
    if (f == FluxVariant::numerical) return FluxVariant::slip_numerical;
  } else if (is_slip_flux(f)) {
    throw ConfigError(std::string("flux variant ") + to_string(f) + " requires a slip interface");
  }
  return f;
}

struct ContactConfig {
  Formulation formulation = Formulation::virtual_obstacle;
  FluxVariant flux = FluxVariant::numerical;
  InterfaceMode mode = InterfaceMode::noslip;
  double gamma_c0 = 1e3;
  double theta = 0.0;
  double obstacle_height = 0.25;
  double relaxation_factor = 0.1;  // relaxed formulation: alpha = factor * h

  double gamma_c(double mu_s, double h) const { return gamma_c0 * mu_s / h; }
  double alpha(double h) const { return formulation == Formulation::relaxed ? relaxation_factor * h : 0.0; }
  void validate() const {
    if (!(gamma_c0 > 0)) throw ConfigError("gamma_C0 must be positive");
    if (theta < 0 || theta > 1) throw ConfigError("theta must lie in [0, 1]");
    if (relaxation_factor < 0) throw ConfigError("negative relaxation");
    effective_flux(flux, mode);
  }
};

/// P_gamma = gap - lambda / gamma_C.
inline double p_gamma(double gap, double lambda, double gamma_c) {
  if (!(gamma_c > 0)) throw ConfigError("gamma_C must be positive");
  return gap - lambda / gamma_c;
}

inline double positive_part(double x) { return x > 0 ? x : 0.0; }
/// Generalized derivative of the positive part, with H(0) = 0.
inline double heaviside(double x) { return x > 0 ? 1.0 : 0.0; }

/// Linear functionals of one interface point used by the contact terms.
struct ContactFunctionals {
  Eigen::VectorXd gap;      // d . n_w (the constant -g is separate)
  Eigen::VectorXd lambda;   // contact force variant
  Eigen::VectorXd lambda_s; // solid part, as test functional in w
  Eigen::VectorXd lambda_f; // fluid part, as test functional in (v, q, w)
  Eigen::VectorXd sigma_sn; // n_w^T sigma_s(d) n
  Eigen::VectorXd wn;       // w . n_w
};

inline ContactFunctionals contact_functionals(const InterfaceTrace& tr, FluxVariant flux, double gamma_fsi) {
  const Vec2 nw = InterfaceGraph::wall_normal();
  ContactFunctionals cf;
  cf.gap = tr.along(tr.d, nw);
  cf.wn = cf.gap;
  cf.sigma_sn = tr.along(tr.ss, nw);
  const int n = tr.size();
  std::array<Eigen::VectorXd, 2> Tf, Tf_test;
  for (int i = 0; i < 2; ++i) {
    Tf[i] = tr.sf[i] - gamma_fsi * (tr.dd[i] - tr.u[i]);
    Tf_test[i] = tr.sf[i] - gamma_fsi * (tr.d[i] - tr.u[i]);
  }
  const double nnw = tr.n.dot(nw);
  switch (flux) {
    case FluxVariant::physical:
      cf.lambda_s = cf.sigma_sn;
      cf.lambda_f = tr.along(tr.sf, nw);
      cf.lambda = cf.lambda_s - cf.lambda_f;
      break;
    case FluxVariant::numerical:
      cf.lambda_s = cf.sigma_sn;
      cf.lambda_f = tr.along(Tf_test, nw);
      cf.lambda = cf.lambda_s - tr.along(Tf, nw);
      break;
    case FluxVariant::slip_physical:
      cf.lambda_s = nnw * tr.along(tr.ss, tr.n);
      cf.lambda_f = nnw * tr.along(tr.sf, tr.n);
      cf.lambda = cf.lambda_s - cf.lambda_f;
      break;
    case FluxVariant::slip_numerical:
    case FluxVariant::slip_extended:
      cf.lambda_s = nnw * tr.along(tr.ss, tr.n);
      if (flux == FluxVariant::slip_extended) cf.lambda_s += tr.tau.dot(nw) * tr.along(tr.ss, tr.tau);
      cf.lambda_f = nnw * tr.along(Tf_test, tr.n);
      cf.lambda = cf.lambda_s - nnw * tr.along(Tf, tr.n);
      break;
  }
  if (!tr.has_fluid) {
    cf.lambda_f = Eigen::VectorXd::Zero(n);
  }
  return cf;
}

inline Eigen::VectorXd local_values(const InterfaceTrace& tr, const Eigen::VectorXd& U) {
  Eigen::VectorXd u(tr.size());
  for (int k = 0; k < tr.size(); ++k) u[k] = U[tr.dofs[k]];
  return u;
}

/// Pointwise contact data of the current state.
struct ContactPoint {
  int edge = -1;
  Vec2 x, n;
  double weight = 0;
  double gap = 0;        // d . n_w - g
  double lambda = 0;
  double p_gamma = 0;
  double sigma_sn = 0;
  double jump_n = 0;     // (ddot(d) - u) . n
  double un = 0, ddn = 0;
  double pressure = 0;
  bool has_fluid = false;
};

struct ContactContext {
  const SubdividedMesh& mesh;
  const MaterialParams& mat;
  const NitscheParams& nit;
  const ContactConfig& cfg;
  const std::vector<double>& gap0;  // reference gap per interface abscissa (before relaxation)
  double gap_at(double x) const {
    const auto& xs = mesh.iface.xs;
    if (x <= xs.front()) return gap0.front();
    if (x >= xs.back()) return gap0.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const int i = static_cast<int>(it - xs.begin()) - 1;
    const double s = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return (1 - s) * gap0[i] + s * gap0[i + 1] - cfg.alpha(mesh.h());
  }
  double gamma_c() const { return cfg.gamma_c(mat.mu_s, mesh.h()); }
  double gamma_fsi() const { return nit.gamma_fsi(mat.nu_f, mesh.h()); }
  FluxVariant flux() const { return effective_flux(cfg.flux, cfg.mode); }
};

inline std::vector<ContactPoint> evaluate_contact(const ContactContext& ctx, const Eigen::VectorXd& U) {
  std::vector<ContactPoint> pts;
  const double gc = ctx.gamma_c();
  for_each_interface_point(ctx.mesh, ctx.mat, [&](int ei, const InterfaceTrace& tr) {
    ContactFunctionals cf = contact_functionals(tr, ctx.flux(), ctx.gamma_fsi());
    Eigen::VectorXd u = local_values(tr, U);
    ContactPoint cp;
    cp.edge = ei;
    cp.x = tr.x;
    cp.n = tr.n;
    cp.weight = tr.weight;
    cp.has_fluid = tr.has_fluid;
    cp.gap = cf.gap.dot(u) - ctx.gap_at(tr.x.x());
    cp.lambda = tr.has_fluid ? cf.lambda.dot(u) : cf.sigma_sn.dot(u);
    cp.p_gamma = p_gamma(cp.gap, cp.lambda, gc);
    cp.sigma_sn = cf.sigma_sn.dot(u);
    cp.un = tr.along(tr.u, tr.n).dot(u);
    cp.ddn = tr.along(tr.dd, tr.n).dot(u);
    cp.jump_n = cp.ddn - cp.un;
    cp.pressure = tr.p.dot(u);
    pts.push_back(cp);
  });
  return pts;
}

/// gamma_C([P_gamma]_+, w . n_w) on the whole interface (semismooth Jacobian).
inline void assemble_contact(SystemAssembler& as, const ContactContext& ctx) {
  const double gc = ctx.gamma_c();
  const double gf = ctx.gamma_fsi();
  const auto& U = as.state();
  for (const auto& e : ctx.mesh.interface_edges) {
    std::vector<int> idx = interface_dofs(ctx.mesh, e);
    const int n = static_cast<int>(idx.size());
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    bool any = false;
    for_each_segment_point(ctx.mesh.vertices[e.a], ctx.mesh.vertices[e.b], [&](const Vec2& x, double w) {
      InterfaceTrace tr = make_trace(ctx.mesh, e, x, w, ctx.mat);
      ContactFunctionals cf = contact_functionals(tr, ctx.flux(), gf);
      Eigen::VectorXd u = local_values(tr, U);
      const Eigen::VectorXd& lam = tr.has_fluid ? cf.lambda : cf.sigma_sn;
      const double P = cf.gap.dot(u) - ctx.gap_at(x.x()) - lam.dot(u) / gc;
      ++as.interface_points;
      if (P > 0) {
        ++as.active_points;
        any = true;
        r.noalias() += w * gc * P * cf.wn;
        J.noalias() += w * cf.wn * (gc * cf.gap - lam).transpose();
      }
    });
    if (any) as.add_nonlinear(idx, r, J);
  }
}

/// Consistency terms -theta (Q, lambda_s(w)) - theta (dQ/dt, lambda_f(v,q,w)),
/// Q = gamma_C [P_gamma]_+ + lambda.
inline void assemble_theta_terms(SystemAssembler& as, const ContactContext& ctx, const Eigen::VectorXd& U_old,
                                 double dt) {
  const double theta = ctx.cfg.theta;
  if (theta == 0) return;
  const double gc = ctx.gamma_c();
  const double gf = ctx.gamma_fsi();
  const auto& U = as.state();
  for (const auto& e : ctx.mesh.interface_edges) {
    std::vector<int> idx = interface_dofs(ctx.mesh, e);
    const int n = static_cast<int>(idx.size());
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for_each_segment_point(ctx.mesh.vertices[e.a], ctx.mesh.vertices[e.b], [&](const Vec2& x, double w) {
      InterfaceTrace tr = make_trace(ctx.mesh, e, x, w, ctx.mat);
      ContactFunctionals cf = contact_functionals(tr, ctx.flux(), gf);
      Eigen::VectorXd u = local_values(tr, U), uo = local_values(tr, U_old);
      const double g = ctx.gap_at(x.x());
      auto Q = [&](const Eigen::VectorXd& v) {
        const double P = cf.gap.dot(v) - g - cf.lambda.dot(v) / gc;
        return gc * positive_part(P) + cf.lambda.dot(v);
      };
      const double P = cf.gap.dot(u) - g - cf.lambda.dot(u) / gc;
      Eigen::VectorXd dQ = heaviside(P) * (gc * cf.gap - cf.lambda) + cf.lambda;
      const double q = Q(u), qo = Q(uo);
      r.noalias() -= theta * w * (q * cf.lambda_s + (q - qo) / dt * cf.lambda_f);
      J.noalias() -= theta * w * (cf.lambda_s + cf.lambda_f / dt) * dQ.transpose();
    });
    as.add_nonlinear(idx, r, J);
  }
}

/// Previous-step split for the split formulation: true where the pure-solid
/// P_gamma,s = d . n_w - g - sigma_s,n / gamma_C of U_old is positive (contact part).
inline std::vector<char> adhoc_split(const ContactContext& ctx, const Eigen::VectorXd& U_old) {
  std::vector<char> split;
  const double gc = ctx.gamma_c();
  for_each_interface_point(ctx.mesh, ctx.mat, [&](int, const InterfaceTrace& tr) {
    ContactFunctionals cf = contact_functionals(tr, ctx.flux(), ctx.gamma_fsi());
    Eigen::VectorXd u = local_values(tr, U_old);
    const double P = cf.gap.dot(u) - ctx.gap_at(tr.x.x()) - cf.sigma_sn.dot(u) / gc;
    split.push_back(P > 0 ? 1 : 0);
  });
  return split;
}

/// Split formulation: Nitsche coupling on the fluid part of the previous-step split,
/// gamma_C (P_gamma,s(d), w . n_w) without bracket on the contact part.
inline void assemble_adhoc(SystemAssembler& as, const ContactContext& ctx, const std::vector<char>& split) {
  const double gc = ctx.gamma_c();
  std::size_t expected = 3 * ctx.mesh.interface_edges.size();
  if (split.size() != expected) throw ConfigError("split does not match the interface quadrature");
  assemble_nitsche(as, ctx.mesh, ctx.mat, ctx.nit, ctx.cfg.mode, [&](int q) { return split[q] == 0; });
  int q = 0;
  for (const auto& e : ctx.mesh.interface_edges) {
    std::vector<int> idx = interface_dofs(ctx.mesh, e);
    const int n = static_cast<int>(idx.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    bool any = false;
    for_each_segment_point(ctx.mesh.vertices[e.a], ctx.mesh.vertices[e.b], [&](const Vec2& x, double w) {
      ++as.interface_points;
      if (!split[q++]) return;
      ++as.active_points;
      any = true;
      InterfaceTrace tr = make_trace(ctx.mesh, e, x, w, ctx.mat);
      ContactFunctionals cf = contact_functionals(tr, ctx.flux(), ctx.gamma_fsi());
      K.noalias() += w * cf.wn * (gc * cf.gap - cf.sigma_sn).transpose();
      b.noalias() += w * gc * ctx.gap_at(x.x()) * cf.wn;
    });
    if (any) as.add_linear(idx, K, b);
  }
}

}  // namespace fsic
