#include "optomech/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <tbb/parallel_for.h>

#include "optomech/solvers.hpp"

namespace optomech {

using Eigen::MatrixXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGolden = 0.6180339887498949;

MechanicalBlock nan_block() { return {kNaN, kNaN, kNaN}; }

// Every row of the sweep table goes through this wrapper so a failing point
// turns into a flagged row instead of aborting the sweep.
template <typename F>
void guarded(ResultRow& row, F&& body) {
  try {
    body();
  } catch (const SolverError& e) {
    row.status = "solver_error";
    row.error = std::string(to_string(e.kind())) + ": " + e.what();
  } catch (const std::invalid_argument& e) {
    row.status = "config_error";
    row.error = e.what();
  }
}

struct PeriodicScan {
  double start;
  double period;
};

// Minimizes a periodic function: coarse grid, then golden section inside the
// bracket of every coarse minimum within 1% of the best.
AngleOptimum optimize_periodic(const std::function<ObjectiveValue(double)>& f,
                               PeriodicScan scan, double (*wrap)(double)) {
  const int n = kAngleGrid;
  std::vector<double> x(n), v(n);
  AngleOptimum out;
  for (int i = 0; i < n; ++i) {
    x[i] = scan.start + scan.period * i / n;
    const ObjectiveValue r = f(x[i]);
    v[i] = r.value;
    out.worst_margin = std::min(out.worst_margin, r.worst_margin);
  }
  const double best = *std::min_element(v.begin(), v.end());
  if (!std::isfinite(best)) {
    out.angle = wrap(x[0]);
    return out;
  }

  const double step = scan.period / n;
  const double cut = best + 0.01 * std::abs(best);
  for (int i = 0; i < n; ++i) {
    const double left = v[(i + n - 1) % n];
    const double right = v[(i + 1) % n];
    if (!(v[i] < left && v[i] <= right) || v[i] > cut) continue;
    double margin = kInf;
    const auto line = [&](double a) {
      const ObjectiveValue r = f(a);
      margin = std::min(margin, r.worst_margin);
      return r.value;
    };
    const double a = golden_section(line, x[i] - step, x[i] + step, kAngleTolerance);
    const double va = line(a);
    out.worst_margin = std::min(out.worst_margin, margin);
    out.basins.push_back(wrap(a));
    out.basin_values.push_back(std::min(va, v[i]));
    if (v[i] < va) out.basins.back() = wrap(x[i]);
  }
  if (out.basins.empty()) {
    // Flat landscape: every neighbour ties.
    const auto it = std::min_element(v.begin(), v.end());
    out.basins.push_back(wrap(x[it - v.begin()]));
    out.basin_values.push_back(*it);
  }
  const auto it = std::min_element(out.basin_values.begin(), out.basin_values.end());
  out.angle = out.basins[it - out.basin_values.begin()];
  out.value = *it;
  out.multimodal = out.basins.size() > 1;
  return out;
}

double wrap_theta(double theta) {
  double t = std::fmod(theta, kPi);
  if (t < 0.0) t += kPi;
  return t;
}

PeriodicScan scan_for(AngleAxis which) {
  // The nu grid starts one step above -pi/2 so that pi/2 is included.
  return which == AngleAxis::Theta ? PeriodicScan{0.0, kPi}
                                   : PeriodicScan{-kPi / 2.0 + kPi / kAngleGrid, kPi};
}

void apply_axis(const Axis& axis, std::size_t index, PhysicalParams& p, CostSpec& c) {
  if (axis.name == "model") {
    p.model = axis.models[index];
    return;
  }
  const double v = axis.values[index];
  if (axis.name == "g") p.g = v;
  else if (axis.name == "omega_m") p.omega_m = v;
  else if (axis.name == "q_m") p.q_m = v;
  else if (axis.name == "kappa") p.kappa = v;
  else if (axis.name == "eta") p.eta = v;
  else if (axis.name == "theta") p.theta = v;
  else if (axis.name == "temperature") p.temperature = v;
  else if (axis.name == "nu") c.nu = v;
  else if (axis.name == "p_over_q") c.p = v * c.q;
  else throw std::invalid_argument("unknown grid axis: " + axis.name);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

nlohmann::json number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json params_json(const PhysicalParams& p) {
  return {{"omega_m", p.omega_m}, {"q_m", p.q_m},   {"kappa", p.kappa},
          {"g", p.g},             {"eta", p.eta},   {"theta", p.theta},
          {"temperature", p.temperature},           {"model", std::string(to_string(p.model))}};
}

nlohmann::json config_object(const SweepConfig& cfg) {
  nlohmann::json grids = nlohmann::json::array();
  for (const auto& axis : cfg.grids) {
    nlohmann::json values = nlohmann::json::array();
    if (axis.name == "model") {
      for (auto m : axis.models) values.push_back(std::string(to_string(m)));
    } else {
      for (double v : axis.values) values.push_back(v);
    }
    grids.push_back({{"axis", axis.name}, {"values", values}});
  }
  nlohmann::json optimize = nlohmann::json::array();
  if (cfg.optimize_theta) optimize.push_back("theta");
  if (cfg.optimize_nu) optimize.push_back("nu");
  if (cfg.optimize_g) optimize.push_back("g");
  return {{"name", cfg.name},
          {"params", params_json(cfg.base)},
          {"cost", {{"kind", std::string(to_string(cfg.cost.kind))},
                    {"p", cfg.cost.p}, {"q", cfg.cost.q}, {"nu", cfg.cost.nu}}},
          {"g0", number(cfg.g0)},
          {"objective", std::string(to_string(cfg.objective))},
          {"optimize", optimize},
          {"grids", grids}};
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::ConditionalPhonon: return "conditional_phonon";
    case Objective::UnconditionalPhonon: return "unconditional_phonon";
    case Objective::ConditionalMinVariance: return "conditional_min_variance";
    case Objective::UnconditionalMinVariance: return "unconditional_min_variance";
  }
  return "unknown";
}

Objective parse_objective(std::string_view text) {
  for (auto o : {Objective::ConditionalPhonon, Objective::UnconditionalPhonon,
                 Objective::ConditionalMinVariance, Objective::UnconditionalMinVariance}) {
    if (text == to_string(o)) return o;
  }
  throw std::invalid_argument("unknown objective: " + std::string(text));
}

bool is_conditional(Objective objective) {
  return objective == Objective::ConditionalPhonon ||
         objective == Objective::ConditionalMinVariance;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::vector<double> log_space(double start, double stop, int count) {
  std::vector<double> out(count);
  const double a = std::log10(start), b = std::log10(stop);
  for (int i = 0; i < count; ++i)
    out[i] = count == 1 ? start : std::pow(10.0, a + (b - a) * i / (count - 1));
  return out;
}

std::vector<double> lin_space(double start, double stop, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = count == 1 ? start : start + (stop - start) * i / (count - 1);
  return out;
}

double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tol) {
  double a = lo, b = hi;
  double c = b - kGolden * (b - a);
  double d = a + kGolden * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

ObjectiveValue evaluate_objective(const PhysicalParams& params, const CostSpec& cost,
                                  Objective objective) {
  ObjectiveValue out;
  try {
    const ModelMatrices m = build_matrices(params);
    const FilterSolution filter = solve_filter_are(m);
    out.worst_margin = conditional_margin(m, filter.v);
    const MechanicalBlock cond = MechanicalBlock::from(filter.v);
    switch (objective) {
      case Objective::ConditionalPhonon:
        out.value = phonon_number(cond);
        return out;
      case Objective::ConditionalMinVariance:
        out.value = min_quadrature_variance(cond).v_min;
        return out;
      default:
        break;
    }
    const LqgSolution lqg = synthesize(m, filter, cost);
    out.worst_margin = std::min(out.worst_margin, unconditional_margin(lqg));
    const MechanicalBlock total = MechanicalBlock::from(lqg.v_total);
    if (objective == Objective::UnconditionalPhonon) {
      out.value = phonon_number(total);
    } else if (cost.kind == CostKind::Squeezing) {
      out.value = rotated_variance(total, cost.nu);
    } else {
      out.value = min_quadrature_variance(total).v_min;
    }
  } catch (const SolverError&) {
    out.value = kInf;
  }
  return out;
}

AngleOptimum optimize_angle(const PhysicalParams& params, const CostSpec& cost, AngleAxis which,
                            Objective objective) {
  const auto f = [&](double angle) {
    PhysicalParams p = params;
    CostSpec c = cost;
    if (which == AngleAxis::Theta) p.theta = angle;
    else c.nu = angle;
    return evaluate_objective(p, c, objective);
  };
  return optimize_periodic(f, scan_for(which),
                           which == AngleAxis::Theta ? wrap_theta : wrap_half_period);
}

CouplingOptimum optimize_coupling(const PhysicalParams& params, const CostSpec& cost,
                                  Objective objective, bool with_theta) {
  CouplingOptimum out;
  const auto f = [&](double log_g) {
    PhysicalParams p = params;
    p.g = std::pow(10.0, log_g);
    if (!with_theta) return std::pair{evaluate_objective(p, cost, objective), p.theta};
    const AngleOptimum a = optimize_angle(p, cost, AngleAxis::Theta, objective);
    return std::pair{ObjectiveValue{a.value, a.worst_margin}, a.angle};
  };
  const double lo = std::log10(kCouplingMin), hi = std::log10(kCouplingMax);
  constexpr int kPoints = 25;
  std::vector<double> values(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    const auto r = f(lo + (hi - lo) * i / (kPoints - 1));
    values[i] = r.first.value;
    out.worst_margin = std::min(out.worst_margin, r.first.worst_margin);
  }
  const int best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  const double step = (hi - lo) / (kPoints - 1);
  const double a = std::max(lo, lo + step * (best - 1));
  const double b = std::min(hi, lo + step * (best + 1));
  const double log_g = golden_section(
      [&](double x) {
        const auto r = f(x);
        out.worst_margin = std::min(out.worst_margin, r.first.worst_margin);
        return r.first.value;
      },
      a, b, 1e-3);
  double chosen = log_g;
  auto r = f(log_g);
  if (values[best] < r.first.value) {
    chosen = lo + step * best;
    r = f(chosen);
  }
  out.g = std::pow(10.0, chosen);
  out.value = r.first.value;
  out.theta = r.second;
  out.worst_margin = std::min(out.worst_margin, r.first.worst_margin);
  return out;
}

ResultRow run_point(const PhysicalParams& params, const CostSpec& cost, double g0) {
  ResultRow row;
  row.params = params;
  row.cost = cost;
  row.g0 = g0;
  row.conditional = row.unconditional = row.no_feedback = nan_block();
  guarded(row, [&] {
    cost.validate();
    row.derived = derived_quantities(params);
    const ModelMatrices m = build_matrices(params);
    const FilterSolution filter = solve_filter_are(m);
    row.filter_residual = filter.report.relative_residual;
    row.uncorrelated_quadrature = filter.uncorrelated_quadrature;
    row.conditional = MechanicalBlock::from(filter.v);

    const LqgSolution lqg = synthesize(m, filter, cost);
    row.control_residual = lqg.control_report.relative_residual;
    row.unconditional = MechanicalBlock::from(lqg.v_total);
    row.sigma_fb = lqg.feedback_strength;
    if (std::isfinite(g0)) row.eps_probe = probe_amplitude(params.g, g0, params.kappa);

    row.margin_cond = conditional_margin(m, filter.v);
    row.margin_uncond = unconditional_margin(lqg);
    row.margin_worst = std::min(row.margin_cond, row.margin_uncond);

    const ModelMatrices n = m.normalized();
    if (is_hurwitz(n.a)) {
      const MatrixXd open = solve_lyapunov(n.a, n.d);
      row.no_feedback = MechanicalBlock::from(open);
      row.margin_worst =
          std::min(row.margin_worst, check_stationary_physicality(n.a, n.d).margin);
    }

    row.n_cond = phonon_number(row.conditional);
    const SqueezingResult sc = min_quadrature_variance(row.conditional);
    row.vmin_cond = sc.v_min;
    row.phi_cond = sc.angle;
    row.purity_cond = purity(row.conditional);

    row.n_uncond = phonon_number(row.unconditional);
    if (cost.kind == CostKind::Squeezing) {
      row.vmin_uncond = rotated_variance(row.unconditional, cost.nu);
      row.phi_uncond = wrap_half_period(cost.nu);
    } else {
      const SqueezingResult su = min_quadrature_variance(row.unconditional);
      row.vmin_uncond = su.v_min;
      row.phi_uncond = su.angle;
    }
    row.purity_uncond = purity(row.unconditional);

    row.physical = row.margin_worst >= -kPhysicalityTolerance;
    if (!row.physical) {
      row.status = "unphysical";
      row.error = "covariance violates V + i Omega / 2 >= 0";
    }
  });
  return row;
}

void SweepConfig::validate() const {
  base.validate();
  cost.validate();
  for (const auto& axis : grids) {
    if (axis.size() == 0) throw std::invalid_argument("grid axis '" + axis.name + "' is empty");
    if (axis.name == "model") continue;
    const bool up = axis.values.size() < 2 || axis.values[1] > axis.values[0];
    for (std::size_t i = 1; i < axis.values.size(); ++i) {
      if (up ? !(axis.values[i] > axis.values[i - 1]) : !(axis.values[i] < axis.values[i - 1]))
        throw std::invalid_argument("grid axis '" + axis.name + "' is not strictly monotone");
    }
    for (std::size_t i = 0; i < axis.values.size(); ++i) {
      PhysicalParams p = base;
      CostSpec c = cost;
      apply_axis(axis, i, p, c);  // rejects unknown names
      p.validate();
      c.validate();
    }
  }
  for (std::size_t i = 0; i < grids.size(); ++i)
    for (std::size_t j = i + 1; j < grids.size(); ++j)
      if (grids[i].name == grids[j].name)
        throw std::invalid_argument("grid axis '" + grids[i].name + "' given twice");
  const auto gridded = [&](const std::string& name) {
    return std::any_of(grids.begin(), grids.end(), [&](const Axis& a) { return a.name == name; });
  };
  if (optimize_theta && gridded("theta"))
    throw std::invalid_argument("theta cannot be both optimized and gridded");
  if (optimize_nu && gridded("nu"))
    throw std::invalid_argument("nu cannot be both optimized and gridded");
  if (optimize_g && gridded("g"))
    throw std::invalid_argument("g cannot be both optimized and gridded");
  if (optimize_nu && (cost.kind != CostKind::Squeezing || is_conditional(objective)))
    throw std::invalid_argument(
        "nu optimization needs a squeezing cost and an unconditional objective");
}

std::size_t SweepConfig::rows() const {
  std::size_t count = 1;
  for (const auto& axis : grids) count *= axis.size();
  return count;
}

ResultRow run_configured_point(const SweepConfig& cfg, const PhysicalParams& params,
                               const CostSpec& cost) {
  double worst = kInf;
  bool multimodal = false;

  // Innermost: nu for the feedback target.
  const auto over_nu = [&](const PhysicalParams& p, CostSpec c, double* nu_out) {
    if (!cfg.optimize_nu) return evaluate_objective(p, c, cfg.objective);
    const AngleOptimum a = optimize_angle(p, c, AngleAxis::Nu, cfg.objective);
    if (nu_out) *nu_out = a.angle;
    multimodal = multimodal || a.multimodal;
    return ObjectiveValue{a.value, a.worst_margin};
  };
  const auto over_theta = [&](PhysicalParams p, double* theta_out, double* nu_out) {
    if (!cfg.optimize_theta) return over_nu(p, cost, nu_out);
    const AngleOptimum a = optimize_periodic(
        [&](double theta) {
          p.theta = theta;
          return over_nu(p, cost, nullptr);
        },
        scan_for(AngleAxis::Theta), wrap_theta);
    multimodal = multimodal || a.multimodal;
    if (theta_out) *theta_out = a.angle;
    p.theta = a.angle;
    if (nu_out && cfg.optimize_nu) over_nu(p, cost, nu_out);
    return ObjectiveValue{a.value, a.worst_margin};
  };

  PhysicalParams p = params;
  CostSpec c = cost;
  double theta_opt = kNaN, nu_opt = kNaN, g_opt = kNaN;
  if (cfg.optimize_g) {
    const double lo = std::log10(kCouplingMin), hi = std::log10(kCouplingMax);
    constexpr int kPoints = 25;
    const double step = (hi - lo) / (kPoints - 1);
    const auto f = [&](double log_g) {
      PhysicalParams q = params;
      q.g = std::pow(10.0, log_g);
      const ObjectiveValue r = over_theta(q, nullptr, nullptr);
      worst = std::min(worst, r.worst_margin);
      return r.value;
    };
    std::vector<double> values(kPoints);
    for (int i = 0; i < kPoints; ++i) values[i] = f(lo + step * i);
    const int best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
    double log_g = golden_section(f, std::max(lo, lo + step * (best - 1)),
                                  std::min(hi, lo + step * (best + 1)), 1e-3);
    if (values[best] < f(log_g)) log_g = lo + step * best;
    p.g = g_opt = std::pow(10.0, log_g);
  }
  if (cfg.optimize_theta || cfg.optimize_nu) {
    const ObjectiveValue r = over_theta(p, &theta_opt, &nu_opt);
    worst = std::min(worst, r.worst_margin);
    if (cfg.optimize_theta) p.theta = theta_opt;
    if (cfg.optimize_nu) c.nu = nu_opt;
  }

  ResultRow row = run_point(p, c, cfg.g0);
  row.theta_opt = cfg.optimize_theta ? theta_opt : kNaN;
  row.nu_opt = cfg.optimize_nu ? nu_opt : kNaN;
  row.g_opt = g_opt;
  row.multimodal = multimodal;
  if (row.status == "ok" || row.status == "unphysical") {
    row.margin_worst = std::min(row.margin_worst, worst);
    row.physical = row.margin_worst >= -kPhysicalityTolerance;
    if (!row.physical && row.status == "ok") {
      row.status = "unphysical";
      row.error = "a covariance evaluated during optimization violates V + i Omega / 2 >= 0";
    }
  }
  return row;
}

std::vector<ResultRow> run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t total = cfg.rows();
  std::vector<ResultRow> rows(total);
  tbb::parallel_for(std::size_t{0}, total, [&](std::size_t index) {
    PhysicalParams p = cfg.base;
    CostSpec c = cfg.cost;
    std::size_t rest = index;
    for (std::size_t a = cfg.grids.size(); a-- > 0;) {
      const std::size_t n = cfg.grids[a].size();
      apply_axis(cfg.grids[a], rest % n, p, c);
      rest /= n;
    }
    rows[index] = run_configured_point(cfg, p, c);
  });
  return rows;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns{
      "model", "omega_m", "q_m", "kappa", "g", "eta", "theta", "temperature",
      "cost", "nu", "p", "q", "p_over_q", "g0",
      "nbar", "cq", "gamma_th", "gamma_th_norm",
      "n_cond", "vmin_cond", "phi_cond", "squeezed_cond", "purity_cond",
      "n_uncond", "vmin_uncond", "phi_uncond", "squeezed_uncond", "purity_uncond",
      "cond_vqq", "cond_vpp", "cond_vqp",
      "uncond_vqq", "uncond_vpp", "uncond_vqp",
      "nofb_vqq", "nofb_vpp", "nofb_vqp",
      "theta_opt", "nu_opt", "g_opt", "multimodal",
      "sigma_fb", "eps_probe",
      "margin_cond", "margin_uncond", "margin_worst", "physical", "uncorrelated_quadrature",
      "filter_residual", "control_residual", "status", "error"};
  return columns;
}

std::vector<std::string> csv_fields(const ResultRow& r) {
  const auto f = format_double;
  const auto b = [](bool v) { return std::string(v ? "1" : "0"); };
  return {std::string(to_string(r.params.model)), f(r.params.omega_m), f(r.params.q_m),
          f(r.params.kappa), f(r.params.g), f(r.params.eta), f(r.params.theta),
          f(r.params.temperature),
          std::string(to_string(r.cost.kind)), f(r.cost.nu), f(r.cost.p), f(r.cost.q),
          f(r.cost.p_over_q()), f(r.g0),
          f(r.derived.nbar), f(r.derived.cq), f(r.derived.gamma_th), f(r.derived.gamma_th_norm),
          f(r.n_cond), f(r.vmin_cond), f(r.phi_cond), b(r.vmin_cond < 0.5), f(r.purity_cond),
          f(r.n_uncond), f(r.vmin_uncond), f(r.phi_uncond), b(r.vmin_uncond < 0.5),
          f(r.purity_uncond),
          f(r.conditional.vqq), f(r.conditional.vpp), f(r.conditional.vqp),
          f(r.unconditional.vqq), f(r.unconditional.vpp), f(r.unconditional.vqp),
          f(r.no_feedback.vqq), f(r.no_feedback.vpp), f(r.no_feedback.vqp),
          f(r.theta_opt), f(r.nu_opt), f(r.g_opt), b(r.multimodal),
          f(r.sigma_fb), f(r.eps_probe),
          f(r.margin_cond), f(r.margin_uncond), f(r.margin_worst), b(r.physical),
          b(r.uncorrelated_quadrature),
          f(r.filter_residual), f(r.control_residual), r.status, r.error};
}

std::string config_json(const SweepConfig& cfg) { return config_object(cfg).dump(); }

void write_csv(std::ostream& out, const SweepConfig& cfg, const std::vector<ResultRow>& rows,
               bool timestamp) {
  out << "# schema=" << kSchemaVersion << "\n";
  out << "# artifact_version=" << kArtifactVersion << "\n";
  if (timestamp) out << "# generated=" << utc_timestamp() << "\n";
  out << "# config=" << config_json(cfg) << "\n";
  const auto& columns = csv_columns();
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const auto& row : rows) {
    const auto fields = csv_fields(row);
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_quote(fields[i]);
    out << "\n";
  }
}

void write_json(std::ostream& out, const SweepConfig& cfg, const std::vector<ResultRow>& rows,
                bool timestamp) {
  nlohmann::json meta = {{"schema", kSchemaVersion},
                         {"artifact_version", kArtifactVersion},
                         {"config", config_object(cfg)}};
  if (timestamp) meta["generated"] = utc_timestamp();
  nlohmann::json array = nlohmann::json::array();
  const auto& columns = csv_columns();
  for (const auto& row : rows) {
    const auto fields = csv_fields(row);
    nlohmann::json object = nlohmann::json::object();
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const std::string& key = columns[i];
      if (key == "model" || key == "cost" || key == "status" || key == "error") {
        object[key] = fields[i];
      } else if (key == "squeezed_cond" || key == "squeezed_uncond" || key == "multimodal" ||
                 key == "physical" || key == "uncorrelated_quadrature") {
        object[key] = fields[i] == "1";
      } else {
        object[key] = number(std::strtod(fields[i].c_str(), nullptr));
      }
    }
    array.push_back(std::move(object));
  }
  out << nlohmann::json{{"meta", meta}, {"rows", array}}.dump(1) << "\n";
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::out_of_range("missing column: " + name);
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.meta.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
    } else if (table.header.empty()) {
      table.header = split_csv_line(line);
    } else {
      table.rows.push_back(split_csv_line(line));
      if (table.rows.back().size() != table.header.size())
        throw std::runtime_error("CSV row has " + std::to_string(table.rows.back().size()) +
                                 " fields, header has " + std::to_string(table.header.size()));
    }
  }
  return table;
}

std::vector<std::string> preset_names() {
  return {"fig1",      "fig2-cond", "fig2-uncond", "fig3-cond", "fig3-uncond",
          "fig5",      "fig6-cond", "fig6-uncond", "fig7-cond", "fig7-uncond", "fig8"};
}

SweepConfig figure_preset(const std::string& name) {
  SweepConfig cfg;
  cfg.name = name;
  PhysicalParams& p = cfg.base;
  p.kappa = 1e8;
  p.q_m = 1e8;
  p.eta = 1.0;
  p.temperature = 300.0;
  p.theta = kPi / 2.0;
  const Axis both_models{"model", {}, {DissipationModel::Rwa, DissipationModel::NonRwa}};
  const bool cond = name.size() > 5 && name.substr(name.size() - 5) == "-cond";

  if (name == "fig1") {
    p.omega_m = 1e6;
    p.q_m = 1e4;
    p.g = 1e5;
    p.model = DissipationModel::NonRwa;
    cfg.cost = {CostKind::Cooling, 0.0, 1e3, 1e-5};
    cfg.grids = {};
  } else if (name == "fig2-cond" || name == "fig2-uncond") {
    p.omega_m = 1e6;
    cfg.grids = {both_models, {"g", log_space(1e3, 1e8, 41), {}}};
    cfg.objective = cond ? Objective::ConditionalPhonon : Objective::UnconditionalPhonon;
    cfg.optimize_theta = true;
  } else if (name == "fig3-cond" || name == "fig3-uncond") {
    cfg.grids = {both_models, {"omega_m", log_space(1e4, 1e8, 17), {}}};
    cfg.objective = cond ? Objective::ConditionalPhonon : Objective::UnconditionalPhonon;
    cfg.optimize_theta = true;
    cfg.optimize_g = true;
  } else if (name == "fig5") {
    p.model = DissipationModel::NonRwa;
    cfg.grids = {{"omega_m", log_space(1e4, 1e9, 11), {}}, {"g", log_space(1e4, 1e8, 9), {}}};
    cfg.objective = Objective::ConditionalMinVariance;
  } else if (name == "fig6-cond" || name == "fig6-uncond") {
    p.g = 5e6;
    p.model = DissipationModel::NonRwa;
    std::vector<double> thetas(32);
    for (int i = 0; i < 32; ++i) thetas[i] = kPi * (i + 0.5) / 32.0;
    cfg.grids = {{"omega_m", {1e4, 1e6}, {}}, {"theta", thetas, {}}};
    cfg.cost = CostSpec::squeezing(0.0, 1e12);
    cfg.objective = cond ? Objective::ConditionalMinVariance : Objective::UnconditionalMinVariance;
    cfg.optimize_nu = !cond;
  } else if (name == "fig7-cond" || name == "fig7-uncond") {
    p.g = 1e7;
    cfg.grids = {both_models, {"omega_m", log_space(1e4, 1e8, 17), {}}};
    cfg.cost = CostSpec::squeezing(0.0, 1e12);
    cfg.objective = cond ? Objective::ConditionalMinVariance : Objective::UnconditionalMinVariance;
    cfg.optimize_theta = true;
    cfg.optimize_nu = !cond;
  } else if (name == "fig8") {
    p.omega_m = 2.0 * kPi * 1.139e6;
    p.q_m = 1.03e9;
    p.kappa = 2.0 * kPi * 15.9e6;
    p.eta = 0.77;
    p.g = 3.1e5;
    p.model = DissipationModel::NonRwa;
    cfg.g0 = 2.0 * kPi * 127.0;
    cfg.grids = {{"p_over_q", log_space(1e0, 1e12, 49), {}}};
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return cfg;
}

}  // namespace optomech
