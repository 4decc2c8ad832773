#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "optomech/control.hpp"
#include "optomech/model.hpp"
#include "optomech/observables.hpp"

namespace optomech {

inline constexpr const char* kSchemaVersion = "optomech-results/1";
inline constexpr const char* kArtifactVersion = "1.0.0";

enum class Objective {
  ConditionalPhonon,
  UnconditionalPhonon,
  ConditionalMinVariance,
  UnconditionalMinVariance,
};

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view text);
bool is_conditional(Objective objective);

enum class AngleAxis { Theta, Nu };

struct ResultRow {
  PhysicalParams params;
  CostSpec cost;
  double g0 = std::numeric_limits<double>::quiet_NaN();
  DerivedQuantities derived;

  MechanicalBlock conditional;
  MechanicalBlock unconditional;
  MechanicalBlock no_feedback;  ///< unconditional state with u = 0 (NaN if unstable)
  double n_cond = 0.0, vmin_cond = 0.0, phi_cond = 0.0;
  double n_uncond = 0.0, vmin_uncond = 0.0, phi_uncond = 0.0;
  double purity_cond = 0.0, purity_uncond = 0.0;

  double theta_opt = std::numeric_limits<double>::quiet_NaN();
  double nu_opt = std::numeric_limits<double>::quiet_NaN();
  double g_opt = std::numeric_limits<double>::quiet_NaN();
  bool multimodal = false;

  double sigma_fb = 0.0;   ///< (rad/s)^(1/2)
  double eps_probe = std::numeric_limits<double>::quiet_NaN();

  double margin_cond = 0.0;
  double margin_uncond = 0.0;
  double margin_worst = 0.0;  ///< over every covariance evaluated for this row
  bool physical = false;
  bool uncorrelated_quadrature = false;

  double filter_residual = 0.0;
  double control_residual = 0.0;
  std::string status = "ok";  ///< ok | unphysical | solver_error | config_error
  std::string error;
};

/// Evaluates one parameter point. Solver failures end up in `status`/`error`.
ResultRow run_point(const PhysicalParams& params, const CostSpec& cost,
                    double g0 = std::numeric_limits<double>::quiet_NaN());

/// Value of `objective` at one point; +inf when the solvers fail.
struct ObjectiveValue {
  double value = std::numeric_limits<double>::infinity();
  double worst_margin = std::numeric_limits<double>::infinity();
};

ObjectiveValue evaluate_objective(const PhysicalParams& params, const CostSpec& cost,
                                  Objective objective);

struct AngleOptimum {
  double angle = 0.0;
  double value = std::numeric_limits<double>::infinity();
  bool multimodal = false;
  std::vector<double> basins;        ///< refined angles of all near-optimal minima
  std::vector<double> basin_values;
  double worst_margin = std::numeric_limits<double>::infinity();
};

inline constexpr int kAngleGrid = 64;
inline constexpr double kAngleTolerance = 1e-4;

/// Coarse 64-point scan over one period, then golden-section refinement of
/// every coarse minimum within 1% of the best one.
/// theta is searched on [0, pi), nu on (-pi/2, pi/2].
AngleOptimum optimize_angle(const PhysicalParams& params, const CostSpec& cost, AngleAxis which,
                            Objective objective);

struct CouplingOptimum {
  double g = 0.0;
  double theta = std::numeric_limits<double>::quiet_NaN();
  double value = std::numeric_limits<double>::infinity();
  double worst_margin = std::numeric_limits<double>::infinity();
};

inline constexpr double kCouplingMin = 1e2;
inline constexpr double kCouplingMax = 1e8;

/// Log-spaced scan of g over [1e2, 1e8] rad/s followed by golden-section in
/// log g; theta is optimized at every candidate when `with_theta` is set.
CouplingOptimum optimize_coupling(const PhysicalParams& params, const CostSpec& cost,
                                  Objective objective, bool with_theta);

double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tol);

struct Axis {
  std::string name;  ///< g, omega_m, q_m, kappa, eta, theta, temperature, nu, p_over_q, model
  std::vector<double> values;
  std::vector<DissipationModel> models;  ///< used when name == "model"

  std::size_t size() const { return name == "model" ? models.size() : values.size(); }
};

enum class OutputFormat { Csv, Json };

struct SweepConfig {
  std::string name = "sweep";
  PhysicalParams base;
  CostSpec cost = CostSpec::cooling(1e12);
  double g0 = std::numeric_limits<double>::quiet_NaN();
  std::vector<Axis> grids;
  Objective objective = Objective::UnconditionalPhonon;
  bool optimize_theta = false;
  bool optimize_nu = false;
  bool optimize_g = false;
  std::string output;
  OutputFormat format = OutputFormat::Csv;

  void validate() const;
  std::size_t rows() const;
};

/// Evaluates the optimizations requested by `cfg` at one point.
ResultRow run_configured_point(const SweepConfig& cfg, const PhysicalParams& params,
                               const CostSpec& cost);

/// Cartesian product of the grids, first axis slowest. Rows come back in that
/// order regardless of how the parallel loop schedules them.
std::vector<ResultRow> run_sweep(const SweepConfig& cfg);

void write_csv(std::ostream& out, const SweepConfig& cfg, const std::vector<ResultRow>& rows,
               bool timestamp = true);
void write_json(std::ostream& out, const SweepConfig& cfg, const std::vector<ResultRow>& rows,
                bool timestamp = true);

/// Column names of the CSV schema, in order.
const std::vector<std::string>& csv_columns();

/// Values of one row in csv_columns() order, formatted with 17 significant digits.
std::vector<std::string> csv_fields(const ResultRow& row);

struct CsvTable {
  std::vector<std::string> meta;  ///< "# " lines without the prefix
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);

std::string format_double(double value);

/// One-line JSON rendering of the configuration, embedded in output headers.
std::string config_json(const SweepConfig& cfg);

/// Named default grids behind the figure types (fig1, fig2-cond, ...).
std::vector<std::string> preset_names();
SweepConfig figure_preset(const std::string& name);

std::vector<double> log_space(double start, double stop, int count);
std::vector<double> lin_space(double start, double stop, int count);

}  // namespace optomech
