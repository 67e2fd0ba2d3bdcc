// Command-line driver: run a builtin scenario or sweep one parameter.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fsic/scenarios.hpp"

namespace {

struct Overrides {
  std::string scenario = "virtual-obstacle";
  std::string config_file;
  std::string out = "out";
  std::optional<int> mesh_level;
  std::optional<double> dt, t_end, gamma_c0, gamma_fsi0, gamma_a0, theta;
  std::optional<std::string> flux, interface, formulation, wall_bc;
  std::optional<int> dump_mesh_every;
  int progress = 0;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--scenario", o.scenario, "builtin scenario")
      ->check(CLI::IsMember(fsic::builtin_scenarios()));
  app->add_option("--config", o.config_file, "JSON configuration file");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--mesh-level", o.mesh_level, "0: 1280, 1: 5120, 2: 20480 elements");
  app->add_option("--dt", o.dt);
  app->add_option("--t-end", o.t_end);
  app->add_option("--gamma-c0", o.gamma_c0);
  app->add_option("--gamma-fsi0", o.gamma_fsi0);
  app->add_option("--gamma-a0", o.gamma_a0);
  app->add_option("--theta", o.theta);
  app->add_option("--flux", o.flux)->check(CLI::IsMember({"physical", "numerical", "slip-extended"}));
  app->add_option("--interface", o.interface)->check(CLI::IsMember({"slip", "noslip"}));
  app->add_option("--formulation", o.formulation)->check(CLI::IsMember({"relaxed", "artificial", "adhoc", "virtual-obstacle"}));
  app->add_option("--wall-bc", o.wall_bc)->check(CLI::IsMember({"slip", "noslip"}));
  app->add_option("--dump-mesh-every", o.dump_mesh_every, "write the subdivided mesh every k steps");
  app->add_option("--progress", o.progress, "print a status line every k steps (0: off)");
}

fsic::StepObserver progress_printer(int every) {
  if (every <= 0) return {};
  return [every](const fsic::StepRecord& rec, const fsic::StepProblem&, const Eigen::VectorXd&) {
    if (rec.step % every != 0) return;
    std::fprintf(stderr, "t=%.5e d_min=%.6e active=%d newton=%d\n", rec.t, rec.f.d_min, rec.f.active_points,
                 rec.newton_iterations);
  };
}

// builtin < config file < command line
fsic::ScenarioConfig resolve(const Overrides& o) {
  fsic::ScenarioConfig c = fsic::builtin_scenario(o.scenario);
  if (!o.config_file.empty()) {
    std::ifstream is(o.config_file);
    if (!is) throw fsic::ConfigError("cannot read " + o.config_file);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw fsic::ConfigError(std::string("malformed configuration file: ") + e.what());
    }
    fsic::apply_json(c, j);
  }
  if (o.mesh_level) c.mesh_level = *o.mesh_level;
  if (o.dt) c.dt = *o.dt;
  if (o.t_end) c.t_end = *o.t_end;
  if (o.gamma_c0) c.gamma_c0 = *o.gamma_c0;
  if (o.gamma_fsi0) c.gamma_fsi0 = *o.gamma_fsi0;
  if (o.gamma_a0) c.gamma_a0 = *o.gamma_a0;
  if (o.theta) c.theta = *o.theta;
  if (o.flux) c.flux = *o.flux;
  if (o.interface) c.interface = *o.interface;
  if (o.formulation) c.formulation = *o.formulation;
  if (o.wall_bc) c.wall_bc = *o.wall_bc;
  if (o.dump_mesh_every) c.dump_mesh_every = *o.dump_mesh_every;
  fsic::make_setup(c);  // validation
  return c;
}

int report(const fsic::RunResult& r, const std::filesystem::path& dir) {
  if (r.failed) {
    std::fprintf(stderr, "%s: step failure at t=%.6e: %s\n", dir.string().c_str(), r.failure_time, r.failure.c_str());
    return 2;
  }
  int contact_steps = 0;
  double dmin = HUGE_VAL;
  for (const auto& s : r.steps) {
    contact_steps += s.f.active_points > 0;
    dmin = std::min(dmin, s.f.d_min);
  }
  std::printf("%s: %zu steps, %d steps in contact, min d_min %.6e\n", dir.string().c_str(), r.steps.size(),
              contact_steps, dmin);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eulerian fluid-structure-contact simulator"};
  app.require_subcommand(1);

  Overrides run_o;
  auto* run_cmd = app.add_subcommand("run", "run one scenario");
  add_common(run_cmd, run_o);

  Overrides sweep_o;
  std::string param;
  auto* sweep_cmd = app.add_subcommand("sweep", "run one scenario for several values of a parameter");
  add_common(sweep_cmd, sweep_o);
  sweep_cmd->add_option("--param", param, "key=v1,v2,... (e.g. gamma_c0=10,1e2,1e3)")->required();

  app.add_subcommand("list", "list builtin scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("list")) {
      for (const auto& s : fsic::builtin_scenarios()) std::printf("%s\n", s.c_str());
      return 0;
    }
    if (app.got_subcommand(run_cmd)) {
      const auto cfg = resolve(run_o);
      return report(fsic::run_to_directory(cfg, run_o.out, progress_printer(run_o.progress)), run_o.out);
    }
    const auto base = resolve(sweep_o);
    const auto eq = param.find('=');
    if (eq == std::string::npos) throw fsic::ConfigError("--param expects key=v1,v2,...");
    const std::string key = param.substr(0, eq);
    std::vector<std::string> values;
    std::stringstream ss(param.substr(eq + 1));
    for (std::string v; std::getline(ss, v, ',');)
      if (!v.empty()) values.push_back(v);
    if (values.empty()) throw fsic::ConfigError("--param lists no values");
    int status = 0;
    for (const auto& v : values) {
      fsic::ScenarioConfig c = base;
      nlohmann::json patch;
      try {
        patch[key] = nlohmann::json::parse(v);
      } catch (const nlohmann::json::exception&) {
        patch[key] = v;
      }
      fsic::apply_json(c, patch);
      fsic::make_setup(c);
      const std::filesystem::path dir = std::filesystem::path(sweep_o.out) / (key + "=" + v);
      status = std::max(status, report(fsic::run_to_directory(c, dir, progress_printer(sweep_o.progress)), dir));
    }
    return status;
  } catch (const fsic::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  }
}
