#pragma once

#include <array>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "optomech/model.hpp"
#include "optomech/solvers.hpp"

namespace optomech {

enum class CostKind { Cooling, Squeezing };

std::string_view to_string(CostKind kind);
CostKind parse_cost_kind(std::string_view text);

/// Quadratic state/effort weights of the infinite-horizon LQG problem.
struct CostSpec {
  CostKind kind = CostKind::Cooling;
  double nu = 0.0;  ///< squeezed quadrature angle (rad), Squeezing only
  double p = 1.0;
  double q = 1.0;

  static CostSpec cooling(double p_over_q) { return {CostKind::Cooling, 0.0, p_over_q, 1.0}; }
  static CostSpec squeezing(double nu, double p_over_q) {
    return {CostKind::Squeezing, nu, p_over_q, 1.0};
  }

  double p_over_q() const { return p / q; }
  void validate() const;
};

/// Maps an angle onto the half-open period (-pi/2, pi/2].
double wrap_half_period(double angle);

struct CostMatrices {
  Eigen::MatrixXd p;  ///< 4 x 4 state weight, rad/s
  Eigen::MatrixXd q;  ///< 2 x 2 effort weight
};

CostMatrices cost_matrices(const CostSpec& spec, double omega_m);

class UnstableClosedLoop : public SolverError {
 public:
  UnstableClosedLoop(const std::string& what, std::vector<std::complex<double>> spectrum)
      : SolverError(SolverErrorKind::UnstableN, what, std::move(spectrum)) {}
};

struct LqgSolution {
  ModelMatrices matrices;          ///< physical units
  Eigen::MatrixXd y;               ///< control Riccati solution (dimensionless)
  Eigen::MatrixXd k;               ///< 2 x 4 gain, physical units
  Eigen::MatrixXd v_conditional;
  Eigen::MatrixXd v_excess;
  Eigen::MatrixXd v_total;
  double feedback_strength = 0.0;  ///< (rad/s)^(1/2)
  SolveReport filter_report;
  SolveReport control_report;
  bool uncorrelated_quadrature = false;
  std::vector<std::complex<double>> closed_loop;  ///< spectrum of A - BK, rad/s
};

/// Full LQG pipeline: filter ARE, control ARE, gain, excess-noise Lyapunov.
LqgSolution synthesize(const PhysicalParams& params, const CostSpec& spec);

/// Same, reusing a model and filter solution already computed for `params`.
LqgSolution synthesize(const ModelMatrices& matrices, const FilterSolution& filter,
                       const CostSpec& spec);

/// Physicality margins of the conditional and unconditional states. Values
/// within double rounding of zero are recomputed in quad precision from the
/// model: Newton steps on the filter Riccati equation, then the excess-noise
/// Lyapunov equation for the same gain.
double conditional_margin(const ModelMatrices& matrices, const Eigen::MatrixXd& v_c);
double unconditional_margin(const LqgSolution& s);

/// Normalized-units pieces used by synthesize.
struct ControlLaw {
  RiccatiSolution riccati;
  Eigen::MatrixXd k_normalized;  ///< K in units where Omega_m = 1
};

/// Solves the control ARE in units of `m.rate_unit`. The weights are
/// rebalanced to p' = 1/q' = sqrt(p/q) first; Y is scaled back afterwards.
ControlLaw solve_control(const ModelMatrices& m, const CostSpec& spec);

/// sqrt((K V^E K^T)_11) with K in physical units.
double feedback_strength(const Eigen::MatrixXd& k, const Eigen::MatrixXd& v_excess);

/// V^c_{Q X_theta} = cos(theta) V^c_QX + sin(theta) V^c_QY.
double position_light_covariance(const Eigen::MatrixXd& v_c, double theta);

/// Common factor u = (eta kappa / Omega_m) (V^c_{Q X_theta})^2.
double asymptotic_excess_scale(const PhysicalParams& params, const Eigen::MatrixXd& v_c);

struct ExcessCooling {
  double qq = 0.0;
  double pp = 0.0;
};

/// Closed-form V^E_QQ, V^E_PP in the limit p/q -> infinity (cooling cost).
ExcessCooling asymptotic_excess_cooling(const PhysicalParams& params,
                                        const Eigen::MatrixXd& v_c);

struct ExcessSqueezing {
  double qq = 0.0;  ///< V^E_{Q_nu Q_nu}
  double pp = 0.0;  ///< V^E_{P_nu P_nu}; +infinity on the divergent branches
  double qp = 0.0;  ///< V^E_{Q_nu P_nu}
};

inline constexpr double kDivergent = std::numeric_limits<double>::infinity();

/// Closed-form excess covariance in the rotated frame
/// Q_nu = cos(nu) Q + sin(nu) P, P_nu = -sin(nu) Q + cos(nu) P, for the
/// squeezing cost in the limit p/q -> infinity. NonRWA model only.
ExcessSqueezing asymptotic_excess_squeezing(const PhysicalParams& params,
                                            const Eigen::MatrixXd& v_c, double nu);

/// Mechanical block of `v` expressed in the frame rotated by nu.
Eigen::Matrix2d rotate_mechanical(const Eigen::MatrixXd& v, double nu);

/// Leading-order gain for the RWA cooling problem in units where Omega_m = 1.
Eigen::MatrixXd asymptotic_gain_rwa(const PhysicalParams& params, double p_over_q);

/// Exact fit of v(r) = v_inf + a r^{-1/4} + b r^{-1/2} through three points.
struct Extrapolation {
  std::array<double, 3> ratios{};
  std::array<double, 3> values{};
  double limit = 0.0;
};

Extrapolation extrapolate_quarter_power(const std::array<double, 3>& ratios,
                                        const std::array<double, 3>& values);

/// Ratios used for every limit-tagged output.
inline constexpr std::array<double, 3> kLimitRatios{1e10, 1e11, 1e12};

}  // namespace optomech
