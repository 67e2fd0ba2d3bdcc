#pragma once

// Builtin benchmark configurations, config (de)serialization and CSV output.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsic/contact_model.hpp"
#include "fsic/errors.hpp"
#include "fsic/functionals.hpp"
#include "fsic/time_solver.hpp"

namespace fsic {

/// Flat, serializable description of a run.
struct ScenarioConfig {
  std::string name = "virtual-obstacle";
  std::string formulation = "virtual-obstacle";  // virtual-obstacle | relaxed | artificial | adhoc
  std::string interface = "noslip";              // noslip | slip
  std::string flux = "numerical";                // physical | numerical | slip-extended
  std::string wall_bc = "noslip";                // fluid condition on the box bottom
  int mesh_level = 1;
  double dt = 1e-5;
  double t_end = 6e-3;
  double gamma_c0 = 1e3;
  double gamma_fsi0 = 1e3;
  double gamma_a0 = 0.0;
  double gamma_pt = 1e-2;
  double gamma_cip = 1e-2;
  double theta = 0.0;
  double nu_f = 1.0;
  double mu_s = 2e6;
  double lambda_s = 2e6;
  double pressure = 1.3e5;      // lateral traction magnitude
  double ramp_start = -1.0;     // < 0: constant traction
  double ramp_end = -1.0;
  double obstacle_height = 0.25;
  double interface_height = 0.5;
  double box_height = 0.6;
  double relaxation_factor = 0.1;
  bool traction_below_wall = true;
  double newton_rtol = 1e-7;
  int newton_max_iter = 25;
  int dump_mesh_every = 0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioConfig, name, formulation, interface, flux, wall_bc,
                                                mesh_level, dt, t_end, gamma_c0, gamma_fsi0, gamma_a0, gamma_pt,
                                                gamma_cip, theta, nu_f, mu_s, lambda_s, pressure, ramp_start,
                                                ramp_end, obstacle_height, interface_height, box_height,
                                                relaxation_factor, traction_below_wall, newton_rtol,
                                                newton_max_iter, dump_mesh_every)

inline std::vector<std::string> builtin_scenarios() {
  return {"virtual-obstacle", "wall-contact-artificial", "wall-contact-relaxed", "wall-contact-adhoc"};
}

inline ScenarioConfig builtin_scenario(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  if (name == "virtual-obstacle") return c;
  c.formulation = name == "wall-contact-artificial" ? "artificial"
                  : name == "wall-contact-relaxed" ? "relaxed"
                  : name == "wall-contact-adhoc"   ? "adhoc"
                                                   : "";
  if (c.formulation.empty()) throw ConfigError("unknown scenario: " + name);
  c.interface = "slip";
  c.t_end = 4e-3;
  c.pressure = 3e5;
  c.ramp_start = 1e-3;
  c.ramp_end = 1.2e-3;
  c.traction_below_wall = false;
  if (c.formulation == "artificial") c.gamma_a0 = 1e2;
  return c;
}

/// Overwrite fields present in j (keys not in the schema are rejected).
inline void apply_json(ScenarioConfig& c, const nlohmann::json& j) {
  nlohmann::json base = c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!base.contains(it.key())) throw ConfigError("unknown configuration key: " + it.key());
    base[it.key()] = it.value();
  }
  try {
    c = base.get<ScenarioConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid configuration value: ") + e.what());
  }
}

inline Formulation parse_formulation(const std::string& s) {
  if (s == "virtual-obstacle") return Formulation::virtual_obstacle;
  if (s == "relaxed") return Formulation::relaxed;
  if (s == "artificial") return Formulation::artificial_fluid;
  if (s == "adhoc") return Formulation::adhoc;
  throw ConfigError("unknown formulation: " + s);
}

inline FluxVariant parse_flux(const std::string& s) {
  if (s == "physical") return FluxVariant::physical;
  if (s == "numerical") return FluxVariant::numerical;
  if (s == "slip-physical") return FluxVariant::slip_physical;
  if (s == "slip-numerical") return FluxVariant::slip_numerical;
  if (s == "slip-extended") return FluxVariant::slip_extended;
  throw ConfigError("unknown flux variant: " + s);
}

inline InterfaceMode parse_interface(const std::string& s) {
  if (s == "noslip") return InterfaceMode::noslip;
  if (s == "slip") return InterfaceMode::slip;
  throw ConfigError("unknown interface condition: " + s);
}

inline WallCondition parse_wall(const std::string& s) {
  if (s == "noslip") return WallCondition::noslip;
  if (s == "slip") return WallCondition::slip;
  throw ConfigError("unknown wall condition: " + s);
}

/// Lateral traction magnitude: constant, or linear ramp to zero over [ramp_start, ramp_end].
inline double traction_magnitude(const ScenarioConfig& c, double t) {
  if (c.ramp_start < 0) return c.pressure;
  if (t <= c.ramp_start) return c.pressure;
  if (t >= c.ramp_end) return 0.0;
  return c.pressure * (c.ramp_end - t) / (c.ramp_end - c.ramp_start);
}

/// Level L: 20 * 2^L patch columns; rows 7 * 2^L below and 9 * 2^L above the obstacle line.
/// Formulations posed on the domain above the wall drop the lower band.
inline SimulationSetup make_setup(const ScenarioConfig& c) {
  if (c.mesh_level < 0 || c.mesh_level > 5) throw ConfigError("mesh level must lie in [0, 5]");
  if (!(c.obstacle_height > 0) || !(c.interface_height > c.obstacle_height) || !(c.box_height > c.interface_height))
    throw ConfigError("expected 0 < obstacle < interface < box top");
  if (c.ramp_start >= 0 && !(c.ramp_end > c.ramp_start)) throw ConfigError("ramp end must follow ramp start");
  SimulationSetup s;
  const int k = 1 << c.mesh_level;
  const Formulation form = parse_formulation(c.formulation);
  const bool cropped = form == Formulation::relaxed || form == Formulation::adhoc;
  if (cropped)
    s.patches = build_banded_patch_mesh(20 * k, 0.0, 1.0, c.obstacle_height, {{c.box_height, 9 * k}});
  else
    s.patches = build_banded_patch_mesh(20 * k, 0.0, 1.0, 0.0, {{c.obstacle_height, 7 * k}, {c.box_height, 9 * k}});
  s.reference = InterfaceGraph::flat(s.patches, c.interface_height);
  if (!cropped) s.wall = c.obstacle_height;
  s.gap_obstacle = c.obstacle_height;
  s.mat.nu_f = c.nu_f;
  s.mat.mu_s = c.mu_s;
  s.mat.lambda_s = c.lambda_s;
  s.nit.gamma_fsi0 = c.gamma_fsi0;
  s.nit.gamma_pt = c.gamma_pt;
  s.nit.gamma_cip = c.gamma_cip;
  s.nit.gamma_a0 = c.gamma_a0;
  s.contact.formulation = form;
  s.contact.flux = parse_flux(c.flux);
  s.contact.mode = parse_interface(c.interface);
  s.contact.gamma_c0 = c.gamma_c0;
  s.contact.theta = c.theta;
  s.contact.obstacle_height = c.obstacle_height;
  s.contact.relaxation_factor = c.relaxation_factor;
  s.bc.bottom = parse_wall(c.wall_bc);
  s.bc.traction_below_wall = c.traction_below_wall;
  s.bc.lateral_traction = [c](double t) { return traction_magnitude(c, t); };
  s.solver.dt = c.dt;
  s.solver.t_end = c.t_end;
  s.solver.newton_rtol = c.newton_rtol;
  s.solver.newton_max_iter = c.newton_max_iter;
  s.validate();
  return s;
}

inline std::vector<std::string> series_columns() {
  return {"t",           "d_min",         "J_p",           "J_Pgamma",     "J_contact",  "J_vel_fsi",
          "J_vel_C",     "J_sigma_sn",    "p_L2_mid",      "newton_its",   "active_points",
          "fluid_kinetic", "solid_kinetic", "elastic",     "d_h1",         "viscous",    "pressure_stab",
          "artificial",  "fsi_penalty",   "contact_energy", "mechanical",  "contact_norm", "lambda_norm",
          "vel_fsi_norm", "un_norm",      "ddn_norm"};
}

/// Averaging window for the normalized functionals.
inline constexpr double kNormalizationWindow = 4e-3;

struct Normalization {
  double lambda = NAN;    // mean ||lambda||
  double velocity = NAN;  // mean ||u.n|| + mean ||ddot d.n||
};

inline Normalization self_normalization(const std::vector<StepRecord>& steps) {
  Normalization n;
  if (steps.empty()) return n;
  std::vector<double> t, l, un, dn;
  for (const auto& s : steps) {
    t.push_back(s.t);
    l.push_back(s.f.lambda_norm);
    un.push_back(s.f.un_norm);
    dn.push_back(s.f.ddn_norm);
  }
  const double tw = std::max(kNormalizationWindow, 0.0);
  n.lambda = window_average(t, l, tw);
  n.velocity = window_average(t, un, tw) + window_average(t, dn, tw);
  return n;
}

inline double safe_ratio(double v, double n) { return n > 0 ? v / n : NAN; }

inline void write_series_csv(const std::filesystem::path& path, const RunResult& r, const Normalization& nz) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw ConfigError("cannot write " + path.string());
  const auto cols = series_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) std::fprintf(f, "%s%s", k ? "," : "", cols[k].c_str());
  std::fprintf(f, "\n");
  for (const auto& s : r.steps) {
    const auto& e = s.energy;
    const double v[] = {s.t, s.f.d_min, s.f.J_p, s.f.J_Pgamma, safe_ratio(s.f.contact_norm, nz.lambda),
                        safe_ratio(s.f.vel_fsi_norm, nz.velocity), s.f.J_vel_C, s.f.J_sigma_sn, s.f.p_mid,
                        double(s.newton_iterations), double(s.f.active_points), e.fluid_kinetic, e.solid_kinetic,
                        e.elastic, e.d_h1, e.viscous, e.pressure_stab, e.artificial, e.fsi_penalty, e.contact,
                        e.mechanical(), s.f.contact_norm, s.f.lambda_norm, s.f.vel_fsi_norm, s.f.un_norm,
                        s.f.ddn_norm};
    for (std::size_t k = 0; k < std::size(v); ++k) std::fprintf(f, "%s%.12e", k ? "," : "", v[k]);
    std::fprintf(f, "\n");
  }
  if (r.failed) std::fprintf(f, "# step failure at t=%.12e: %s\n", r.failure_time, r.failure.c_str());
  std::fclose(f);
}

inline void write_energy_csv(const std::filesystem::path& path, const RunResult& r) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw ConfigError("cannot write " + path.string());
  std::fprintf(f, "t,fluid_kinetic,solid_kinetic,elastic,d_h1,viscous,pressure_stab,artificial,fsi_penalty,contact,mechanical\n");
  for (const auto& s : r.steps) {
    const auto& e = s.energy;
    std::fprintf(f, "%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e\n", s.t, e.fluid_kinetic,
                 e.solid_kinetic, e.elastic, e.d_h1, e.viscous, e.pressure_stab, e.artificial, e.fsi_penalty,
                 e.contact, e.mechanical());
  }
  if (r.failed) std::fprintf(f, "# step failure at t=%.12e: %s\n", r.failure_time, r.failure.c_str());
  std::fclose(f);
}

inline void write_snapshot(const std::filesystem::path& path, const ScenarioConfig& c) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << nlohmann::json(c).dump(2) << '\n';
}

inline ScenarioConfig read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  ScenarioConfig c = builtin_scenario(j.value("name", std::string("virtual-obstacle")));
  apply_json(c, j);
  return c;
}

/// Run a configuration and write series.csv, energy.csv, config.snapshot (and mesh dumps) into dir.
/// on_step, if given, is called after every accepted step.
inline RunResult run_to_directory(const ScenarioConfig& c, const std::filesystem::path& dir,
                                  const StepObserver& on_step = {}) {
  std::filesystem::create_directories(dir);
  write_snapshot(dir / "config.snapshot", c);
  SimulationSetup s = make_setup(c);
  StepObserver obs = [&](const StepRecord& rec, const StepProblem& sp, const Eigen::VectorXd& U) {
    if (c.dump_mesh_every > 0 && rec.step % c.dump_mesh_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "mesh_%06d.txt", rec.step);
      std::ofstream os(dir / name);
      write_mesh_dump(os, sp.mesh());
    }
    if (on_step) on_step(rec, sp, U);
  };
  RunResult r = run(s, obs);
  write_series_csv(dir / "series.csv", r, self_normalization(r.steps));
  write_energy_csv(dir / "energy.csv", r);
  return r;
}

}  // namespace fsic
