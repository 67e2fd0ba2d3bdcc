#pragma once

// Semismooth Newton per time step and the backward-Euler time loop on moving domains.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#ifdef FSIC_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#else
#include <Eigen/SparseLU>
#endif

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fsic/contact_model.hpp"
#include "fsic/domain_tracking.hpp"
#include "fsic/errors.hpp"
#include "fsic/fe_space.hpp"
#include "fsic/fsi_forms.hpp"
#include "fsic/functionals.hpp"
#include "fsic/mesh_patch.hpp"

namespace fsic {

class SparseDirectSolver {
 public:
  SparseDirectSolver() {
#ifdef FSIC_HAVE_UMFPACK
    lu_.umfpackControl()(UMFPACK_ORDERING) = UMFPACK_ORDERING_METIS;
#endif
  }

  void factorize(const Eigen::SparseMatrix<double>& A) {
    A_ = &A;
    lu_.compute(A);
    if (lu_.info() != Eigen::Success) throw UndefinedError("sparse factorization failed");
  }
  /// Solve with one step of iterative refinement.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = lu_.solve(b);
    Eigen::VectorXd r = b - (*A_) * x;
    x += lu_.solve(r);
    return x;
  }
  static const char* backend() {
#ifdef FSIC_HAVE_UMFPACK
    return "umfpack";
#else
    return "eigen-sparselu";
#endif
  }

 private:
  const Eigen::SparseMatrix<double>* A_ = nullptr;
#ifdef FSIC_HAVE_UMFPACK
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu_;
#else
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
#endif
};

struct SolverConfig {
  double dt = 1e-5;
  double t_end = 4e-3;
  double newton_rtol = 1e-7;
  double newton_atol = 1e-14;
  int newton_max_iter = 25;
  int max_damping = 4;

  void validate() const {
    if (!(dt > 0) || !(t_end > 0)) throw ConfigError("dt and t_end must be positive");
    if (!(newton_rtol > 0) || newton_max_iter < 1) throw ConfigError("invalid Newton settings");
  }
};

struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  std::vector<double> residuals;
  int active_points = 0;
};

/// Residual norm below which round-off dominates.
inline double roundoff_floor(const DofHandler& dofs, const AssembledSystem& sys) {
  return 1e3 * std::numeric_limits<double>::epsilon() * dofs.restrict(sys.scale).norm();
}

/// Damped semismooth Newton on the free unknowns; assemble(U) returns an AssembledSystem.
template <class Assemble>
NewtonResult newton_solve(Eigen::VectorXd& U, const DofHandler& dofs, Assemble&& assemble, const SolverConfig& cfg) {
  NewtonResult res;
  AssembledSystem sys = assemble(U);
  Eigen::VectorXd r = dofs.restrict(sys.residual);
  const double r0 = r.norm();
  res.residuals.push_back(r0);
  res.active_points = sys.active_points;
  if (!std::isfinite(r0)) return res;
  auto done = [&](double rn) {
    return rn <= std::max({cfg.newton_rtol * r0, cfg.newton_atol, roundoff_floor(dofs, sys)});
  };
  if (done(r0)) {
    res.converged = true;
    return res;
  }
  SparseDirectSolver lu;
  const auto& free = dofs.free_dofs();
  for (int it = 1; it <= cfg.newton_max_iter; ++it) {
    lu.factorize(sys.jacobian);
    const Eigen::VectorXd dx = lu.solve(r);
    double step = 1.0;
    Eigen::VectorXd U_try;
    AssembledSystem sys_try;
    Eigen::VectorXd r_try;
    for (int k = 0; k <= cfg.max_damping; ++k) {
      U_try = U;
      for (std::size_t q = 0; q < free.size(); ++q) U_try[free[q]] -= step * dx[q];
      sys_try = assemble(U_try);
      r_try = dofs.restrict(sys_try.residual);
      if (r_try.norm() < r.norm() || k == cfg.max_damping) break;
      step *= 0.5;
    }
    U = std::move(U_try);
    sys = std::move(sys_try);
    r = std::move(r_try);
    res.iterations = it;
    res.residuals.push_back(r.norm());
    res.active_points = sys.active_points;
    if (!std::isfinite(r.norm())) return res;
    if (done(r.norm())) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

enum class WallCondition { noslip, slip };

struct BoundarySetup {
  WallCondition bottom = WallCondition::noslip;   // fluid at y = y_lo
  bool traction_below_wall = true;                 // lateral traction also on artificial fluid
  bool clamp_solid_lateral = true;
  std::function<double(double)> lateral_traction;  // s(t): sigma_f n = s n on lateral fluid boundaries
};

/// Everything that defines a run.
struct SimulationSetup {
  PatchMesh patches;
  InterfaceGraph reference;           // interface at t = 0
  std::optional<double> wall;         // tags fluid below it as artificial
  MaterialParams mat;
  NitscheParams nit;
  ContactConfig contact;
  BoundarySetup bc;
  SolverConfig solver;
  double gap_obstacle = 0.25;         // obstacle height entering the reference gap

  void validate() const {
    mat.validate();
    nit.validate();
    contact.validate();
    solver.validate();
  }
};

inline std::vector<Constraint> boundary_constraints(const SubdividedMesh& m, const BoundarySetup& bc) {
  std::vector<Constraint> cons;
  const Box box = m.patches.box();
  const double tol = 1e-12 * std::max(box.width(), box.height());
  for (int v = 0; v < m.vertex_count(); ++v) {
    const Vec2& x = m.vertices[v];
    const bool bottom = std::abs(x.y() - box.y_lo) < tol;
    const bool lateral = std::abs(x.x() - box.x_lo) < tol || std::abs(x.x() - box.x_hi) < tol;
    if (bottom) {
      if (bc.bottom == WallCondition::noslip) cons.push_back({dof_index(v, U1), 0.0});
      cons.push_back({dof_index(v, U2), 0.0});
    }
    if (lateral) {
      if (!bc.traction_below_wall && m.wall && x.y() <= *m.wall + tol) {
        cons.push_back({dof_index(v, U1), 0.0});
        cons.push_back({dof_index(v, U2), 0.0});
      }
      if (bc.clamp_solid_lateral)
        for (int f : {D1, D2, DD1, DD2}) cons.push_back({dof_index(v, f), 0.0});
    }
  }
  return cons;
}

/// Per-step output of the time loop.
struct StepRecord {
  int step = 0;
  double t = 0;
  int newton_iterations = 0;
  int clamped = 0;
  StepFunctionals f;
  EnergyTerms energy;
};

struct RunResult {
  std::vector<StepRecord> steps;
  bool failed = false;
  double failure_time = 0;
  std::string failure;
};

/// Mesh, DOFs and assembly closure of one time step.
class StepProblem {
 public:
  StepProblem(const SimulationSetup& s, const InterfaceGraph& iface, const Eigen::VectorXd& U_old, double t)
      : setup_(s),
        mesh_(subdivide(s.patches, iface, s.wall)),
        dofs_(mesh_, boundary_constraints(mesh_, s.bc)),
        edges_(build_edges(mesh_)),
        gap0_(gap_function(s.reference, s.gap_obstacle, 0.0)),
        ctx_{mesh_, setup_.mat, setup_.nit, setup_.contact, gap0_},
        U_old_(U_old),
        tl_{t, s.solver.dt} {
    if (s.contact.formulation == Formulation::adhoc) split_ = adhoc_split(ctx_, U_old_);
  }

  const SubdividedMesh& mesh() const { return mesh_; }
  const DofHandler& dofs() const { return dofs_; }
  const std::vector<MeshEdge>& edges() const { return edges_; }
  const ContactContext& context() const { return ctx_; }
  const Eigen::VectorXd& previous() const { return U_old_; }

  AssembledSystem assemble(const Eigen::VectorXd& U) const {
    SystemAssembler as(dofs_, U);
    assemble_bulk(as, mesh_, U_old_, setup_.mat, setup_.nit, tl_);
    if (setup_.bc.lateral_traction) {
      const double s = setup_.bc.lateral_traction(tl_.t);
      const bool below = setup_.bc.traction_below_wall;
      assemble_lateral_traction(as, mesh_, edges_, s,
                                [&](Tag tag, double) { return tag == Tag::fluid || (below && tag == Tag::artificial); });
    }
    assemble_cip(as, mesh_, edges_, setup_.mat, setup_.nit);
    assemble_pressure_time_stab(as, mesh_, U_old_, setup_.nit);
    if (setup_.contact.formulation == Formulation::adhoc) {
      assemble_adhoc(as, ctx_, split_);
    } else {
      assemble_nitsche(as, mesh_, setup_.mat, setup_.nit, setup_.contact.mode);
      assemble_contact(as, ctx_);
      assemble_theta_terms(as, ctx_, U_old_, tl_.dt);
    }
    return as.finish();
  }

  /// Initial Newton guess: previous state with boundary values imposed.
  Eigen::VectorXd initial_guess() const {
    Eigen::VectorXd U = U_old_;
    dofs_.apply_constraints(U);
    return U;
  }

 private:
  const SimulationSetup& setup_;
  SubdividedMesh mesh_;
  DofHandler dofs_;
  std::vector<MeshEdge> edges_;
  std::vector<double> gap0_;
  ContactContext ctx_;
  Eigen::VectorXd U_old_;
  TimeLevel tl_;
  std::vector<char> split_;
};

using StepObserver = std::function<void(const StepRecord&, const StepProblem&, const Eigen::VectorXd&)>;

inline StepFunctionals step_functionals(const StepProblem& sp, const Eigen::VectorXd& U, const InterfaceGraph& next,
                                        const SimulationSetup& s, std::vector<ContactPoint>* pts_out = nullptr) {
  auto pts = evaluate_contact(sp.context(), U);
  StepFunctionals f = interface_functionals(pts, sp.context().gamma_c());
  f.d_min = min_gap(next, s.contact.obstacle_height);
  f.p_mid = pressure_norm_slab(sp.mesh(), U, 0.4, 0.6);
  if (pts_out) *pts_out = std::move(pts);
  return f;
}

/// Time loop from the zero state. Step failures end the run with failed = true.
inline RunResult run(const SimulationSetup& s, const StepObserver& observer = {}) {
  s.validate();
  RunResult out;
  InterfaceGraph iface = s.reference;
  Eigen::VectorXd U = Eigen::VectorXd::Zero(kFieldCount * s.patches.vertex_count());
  const int nsteps = static_cast<int>(std::llround(s.solver.t_end / s.solver.dt));
  for (int m = 1; m <= nsteps; ++m) {
    const double t = m * s.solver.dt;
    try {
      StepProblem sp(s, iface, U, t);
      Eigen::VectorXd Un = sp.initial_guess();
      NewtonResult nr = newton_solve(Un, sp.dofs(), [&](const Eigen::VectorXd& V) { return sp.assemble(V); }, s.solver);
      if (!nr.converged) {
        std::ostringstream msg;
        msg << "Newton did not converge in " << nr.iterations << " iterations; residuals";
        for (double r : nr.residuals) msg << ' ' << r;
        throw StepFailure(msg.str(), t);
      }
      extend_fields(sp.mesh(), sp.dofs(), Un);
      AdvanceResult adv = advance_interface(s.reference, sp.mesh(), Un);
      StepRecord rec;
      rec.step = m;
      rec.t = t;
      rec.newton_iterations = nr.iterations;
      rec.clamped = adv.clamped;
      std::vector<ContactPoint> pts;
      rec.f = step_functionals(sp, Un, adv.iface, s, &pts);
      rec.energy = energy_terms(sp.mesh(), sp.edges(), Un, s.mat, s.nit, s.contact.mode, pts, sp.context().gamma_c());
      U = std::move(Un);
      iface = std::move(adv.iface);
      out.steps.push_back(rec);
      if (observer) observer(rec, sp, U);
    } catch (const StepFailure& e) {
      out.failed = true;
      out.failure_time = e.t;
      out.failure = e.what();
      return out;
    } catch (const std::exception& e) {
      out.failed = true;
      out.failure_time = t;
      out.failure = e.what();
      return out;
    }
  }
  return out;
}

}  // namespace fsic
