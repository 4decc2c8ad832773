// Command-line front end: point, sweep, optimize, trajectory, check.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "optomech/config.hpp"
#include "optomech/control.hpp"
#include "optomech/observables.hpp"
#include "optomech/sweep.hpp"
#include "optomech/trajectory.hpp"

namespace {

using namespace optomech;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Overrides {
  std::string config;
  std::string preset;
  std::optional<double> omega_m, q_m, kappa, g, eta, theta, temperature, g0;
  std::optional<std::string> model, cost, objective, format;
  std::optional<double> p, q, p_over_q, nu;
  std::vector<std::string> cyclic_hz;
  std::vector<std::string> optimize;
  std::string output;
  bool strict = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "TOML configuration file")->check(CLI::ExistingFile);
  app->add_option("--preset", o.preset, "start from a named default grid (fig1, fig2-cond, ...)");
  app->add_option("--omega-m", o.omega_m, "mechanical frequency, rad/s");
  app->add_option("--q-m", o.q_m, "mechanical quality factor");
  app->add_option("--kappa", o.kappa, "cavity decay rate, rad/s");
  app->add_option("--g", o.g, "coupling rate, rad/s");
  app->add_option("--eta", o.eta, "detection efficiency");
  app->add_option("--theta", o.theta, "homodyne angle, rad");
  app->add_option("--temperature", o.temperature, "bath temperature, K");
  app->add_option("--model", o.model, "rwa or nonrwa");
  app->add_option("--g0", o.g0, "single-photon coupling, rad/s (enables eps_probe)");
  app->add_option("--cost", o.cost, "cooling or squeezing");
  app->add_option("--p", o.p, "state cost weight");
  app->add_option("--q", o.q, "effort cost weight");
  app->add_option("--p-over-q", o.p_over_q, "cost ratio (sets p = ratio * q)");
  app->add_option("--nu", o.nu, "squeezed quadrature angle, rad");
  app->add_option("--cyclic-hz", o.cyclic_hz,
                  "rate fields given in cyclic Hz, multiplied by 2 pi (omega_m,kappa,g,g0)")
      ->delimiter(',');
  app->add_option("--objective", o.objective,
                  "conditional_phonon | unconditional_phonon | conditional_min_variance | "
                  "unconditional_min_variance");
  app->add_option("--optimize", o.optimize, "axes to optimize: theta, nu, g")->delimiter(',');
  app->add_option("--output,-o", o.output, "output path (default stdout)");
  app->add_option("--format", o.format, "csv or json");
  app->add_flag("--strict", o.strict, "exit with status 3 when any point fails");
}

SweepConfig build_config(const Overrides& o) {
  SweepConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config);
  else if (!o.preset.empty()) cfg = figure_preset(o.preset);
  if (!o.config.empty() && !o.preset.empty())
    throw ConfigError("give either --config or --preset, not both");

  PhysicalParams& p = cfg.base;
  if (o.omega_m) p.omega_m = *o.omega_m;
  if (o.q_m) p.q_m = *o.q_m;
  if (o.kappa) p.kappa = *o.kappa;
  if (o.g) p.g = *o.g;
  if (o.eta) p.eta = *o.eta;
  if (o.theta) p.theta = *o.theta;
  if (o.temperature) p.temperature = *o.temperature;
  if (o.model) p.model = parse_model(*o.model);
  if (o.g0) cfg.g0 = *o.g0;
  if (o.cost) cfg.cost.kind = parse_cost_kind(*o.cost);
  if (o.q) cfg.cost.q = *o.q;
  if (o.p) cfg.cost.p = *o.p;
  if (o.p_over_q) {
    if (o.p) throw ConfigError("give either --p or --p-over-q");
    cfg.cost.p = *o.p_over_q * cfg.cost.q;
  }
  if (o.nu) cfg.cost.nu = *o.nu;
  if (o.objective) cfg.objective = parse_objective(*o.objective);
  if (!o.optimize.empty()) {
    cfg.optimize_theta = cfg.optimize_nu = cfg.optimize_g = false;
    for (const auto& axis : o.optimize) {
      if (axis == "theta") cfg.optimize_theta = true;
      else if (axis == "nu") cfg.optimize_nu = true;
      else if (axis == "g") cfg.optimize_g = true;
      else throw ConfigError("cannot optimize over '" + axis + "'");
    }
  }
  if (!o.output.empty()) cfg.output = o.output;
  if (o.format) {
    if (*o.format == "csv") cfg.format = OutputFormat::Csv;
    else if (*o.format == "json") cfg.format = OutputFormat::Json;
    else throw ConfigError("--format must be csv or json");
  }
  apply_cyclic_hz(cfg, o.cyclic_hz);
  cfg.validate();
  return cfg;
}

template <typename F>
void with_output(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path);
  write(out);
}

int finish(const std::vector<ResultRow>& rows, bool strict) {
  std::size_t failed = 0;
  for (const auto& row : rows) {
    if (row.status != "ok") {
      ++failed;
      std::cerr << "row failed (" << row.status << "): " << row.error << "\n";
    }
  }
  return strict && failed > 0 ? kExitSolver : kExitOk;
}

void emit(const SweepConfig& cfg, const std::vector<ResultRow>& rows) {
  with_output(cfg.output, [&](std::ostream& out) {
    if (cfg.format == OutputFormat::Json) write_json(out, cfg, rows);
    else write_csv(out, cfg, rows);
  });
}

int run_point_command(const Overrides& o) {
  SweepConfig cfg = build_config(o);
  if (!cfg.grids.empty()) throw ConfigError("point takes no grids; use sweep");
  const std::vector<ResultRow> rows{run_configured_point(cfg, cfg.base, cfg.cost)};
  emit(cfg, rows);
  return finish(rows, o.strict);
}

int run_sweep_command(const Overrides& o) {
  const SweepConfig cfg = build_config(o);
  const auto rows = run_sweep(cfg);
  emit(cfg, rows);
  return finish(rows, o.strict);
}

int run_optimize_command(const Overrides& o, const std::string& which) {
  Overrides plain = o;
  plain.optimize.clear();
  SweepConfig cfg = build_config(plain);
  nlohmann::json result;
  if (which == "theta" || which == "nu") {
    const AngleOptimum a = optimize_angle(cfg.base, cfg.cost,
                                          which == "theta" ? AngleAxis::Theta : AngleAxis::Nu,
                                          cfg.objective);
    result = {{"axis", which},
              {"angle", a.angle},
              {"value", a.value},
              {"multimodal", a.multimodal},
              {"basins", a.basins},
              {"basin_values", a.basin_values},
              {"worst_margin", a.worst_margin}};
    if (!std::isfinite(a.value)) {
      std::cout << result.dump(1) << "\n";
      return o.strict ? kExitSolver : kExitOk;
    }
  } else if (which == "g") {
    const CouplingOptimum c = optimize_coupling(cfg.base, cfg.cost, cfg.objective,
                                                std::find(o.optimize.begin(), o.optimize.end(),
                                                          "theta") != o.optimize.end());
    result = {{"axis", "g"}, {"g", c.g}, {"theta", c.theta}, {"value", c.value},
              {"worst_margin", c.worst_margin}};
  } else {
    throw ConfigError("--which must be theta, nu or g");
  }
  result["objective"] = std::string(to_string(cfg.objective));
  with_output(cfg.output, [&](std::ostream& out) { out << result.dump(1) << "\n"; });
  return kExitOk;
}

struct TrajectoryOptions {
  double dt_factor = 0.01;
  double burn_in_factor = 5.0;
  double window_factor = 20.0;
  long ensemble = 1000;
  std::uint64_t seed = 1;
  long decimation = 10;
  bool no_feedback = false;
  std::string dump;
};

int run_trajectory_command(const Overrides& o, const TrajectoryOptions& t) {
  const SweepConfig cfg = build_config(o);
  const LqgSolution lqg = synthesize(cfg.base, cfg.cost);
  const bool feedback = !t.no_feedback;
  const ModelMatrices& m = lqg.matrices;

  TrajectoryConfig tc;
  tc.feedback_enabled = feedback;
  tc.dt = t.dt_factor / trajectory_stiffness(m, lqg.k, feedback);
  const double tau = relaxation_time(m, lqg.k, feedback);
  tc.burn_in = static_cast<long>(std::ceil(t.burn_in_factor * tau / tc.dt));
  tc.steps = static_cast<long>(std::ceil(t.window_factor * tau / tc.dt));
  tc.ensemble = t.ensemble;
  tc.seed = t.seed;
  tc.decimation = t.decimation;

  Eigen::MatrixXd reference;
  if (feedback) {
    reference = lqg.v_excess;
  } else {
    const ModelMatrices n = m.normalized();
    const Eigen::MatrixXd f = n.c * lqg.v_conditional + n.gamma_row;
    reference = solve_lyapunov(n.a, f.transpose() * f);
  }

  EnsembleEstimate estimate;
  if (!t.dump.empty()) {
    const auto records = simulate_ensemble(m, lqg.v_conditional, lqg.k, tc);
    std::ofstream out(t.dump, std::ios::binary);
    if (!out) throw ConfigError("cannot open dump file " + t.dump);
    for (const auto& r : records) write_record(out, r);
    estimate = ensemble_excess_covariance(records);
  } else {
    estimate = simulate_excess_covariance(m, lqg.v_conditional, lqg.k, tc);
  }

  const auto matrix = [](const Eigen::MatrixXd& v) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      std::vector<double> row(v.cols());
      for (Eigen::Index j = 0; j < v.cols(); ++j) row[j] = v(i, j);
      rows.push_back(row);
    }
    return rows;
  };
  const nlohmann::json result = {
      {"dt", tc.dt},
      {"burn_in_steps", tc.burn_in},
      {"steps", tc.steps},
      {"ensemble", tc.ensemble},
      {"seed", tc.seed},
      {"feedback", feedback},
      {"estimate", matrix(estimate.second_moment)},
      {"standard_error", matrix(estimate.standard_error)},
      {"lyapunov", matrix(reference)},
      {"mean_current", estimate.mean_current},
      {"mean_current_error", estimate.mean_current_error}};
  with_output(cfg.output, [&](std::ostream& out) { out << result.dump(1) << "\n"; });
  return kExitOk;
}

int run_check_command(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open results file " + path);
  const CsvTable table = read_csv(in);
  const std::size_t margin_worst = table.column("margin_worst");
  const std::size_t physical = table.column("physical");
  const std::size_t status = table.column("status");
  const std::array<std::string, 2> prefixes{"cond_", "uncond_"};

  std::size_t bad = 0, failed = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row[status] == "solver_error" || row[status] == "config_error") {
      ++failed;
      continue;
    }
    bool ok = row[physical] == "1";
    const double margin = std::strtod(row[margin_worst].c_str(), nullptr);
    ok = ok && margin >= -kPhysicalityTolerance;
    worst = std::min(worst, margin);
    // Re-derive the mechanical margin from the stored blocks.
    for (const auto& prefix : prefixes) {
      const MechanicalBlock b{std::strtod(row[table.column(prefix + "vqq")].c_str(), nullptr),
                              std::strtod(row[table.column(prefix + "vpp")].c_str(), nullptr),
                              std::strtod(row[table.column(prefix + "vqp")].c_str(), nullptr)};
      Eigen::MatrixXd v(2, 2);
      v << b.vqq, b.vqp, b.vqp, b.vpp;
      ok = ok && check_physicality(v).passes;
    }
    if (!ok) {
      ++bad;
      std::cout << "row " << i << ": unphysical (margin " << format_double(margin) << ")\n";
    }
  }
  std::cout << table.rows.size() << " rows, " << bad << " unphysical, " << failed
            << " solver failures, worst margin " << format_double(worst) << "\n";
  return strict && (bad > 0 || failed > 0) ? kExitSolver : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady states of a measured, feedback-cooled optomechanical oscillator"};
  app.require_subcommand(1);

  Overrides point_o, sweep_o, opt_o, traj_o;
  auto* point = app.add_subcommand("point", "evaluate one parameter point");
  add_common(point, point_o);
  auto* sweep = app.add_subcommand("sweep", "evaluate a Cartesian grid of points");
  add_common(sweep, sweep_o);
  auto* optimize = app.add_subcommand("optimize", "optimize theta, nu or g at one point");
  add_common(optimize, opt_o);
  std::string which = "theta";
  optimize->add_option("--which", which, "theta, nu or g");

  auto* trajectory = app.add_subcommand("trajectory", "Monte Carlo ensemble of conditional means");
  add_common(trajectory, traj_o);
  TrajectoryOptions topt;
  trajectory->add_option("--dt-factor", topt.dt_factor, "dt times the stiffest rate");
  trajectory->add_option("--burn-in", topt.burn_in_factor, "burn-in in relaxation times");
  trajectory->add_option("--window", topt.window_factor, "recorded time in relaxation times");
  trajectory->add_option("--ensemble", topt.ensemble, "number of trajectories");
  trajectory->add_option("--seed", topt.seed, "RNG seed");
  trajectory->add_option("--decimation", topt.decimation, "record every n-th step");
  trajectory->add_flag("--no-feedback", topt.no_feedback, "disable u = -K<X>");
  trajectory->add_option("--dump", topt.dump, "write binary records to this path");

  auto* check = app.add_subcommand("check", "physicality audit of a results CSV");
  std::string check_path;
  bool check_strict = false;
  check->add_option("file", check_path, "results CSV")->required();
  check->add_flag("--strict", check_strict, "exit with status 3 on any failure");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*point) return run_point_command(point_o);
    if (*sweep) return run_sweep_command(sweep_o);
    if (*optimize) return run_optimize_command(opt_o, which);
    if (*trajectory) return run_trajectory_command(traj_o, topt);
    if (*check) return run_check_command(check_path, check_strict);
  } catch (const SolverError& e) {
    std::cerr << "solver failure (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::out_of_range& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
