#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace optomech {

// CODATA 2018, exact by SI definition.
inline constexpr double kHbar = 1.054571817e-34;     // J s
inline constexpr double kBoltzmann = 1.380649e-23;   // J / K
inline constexpr double kPi = 3.14159265358979323846;

enum class DissipationModel { Rwa, NonRwa };

std::string_view to_string(DissipationModel model);
DissipationModel parse_model(std::string_view text);

/// Experimental parameter set of the linearized, resonantly probed
/// optomechanical system. All rates are angular (rad/s).
struct PhysicalParams {
  double omega_m = 1e6;      ///< mechanical frequency
  double q_m = 1e8;          ///< mechanical quality factor
  double kappa = 1e8;        ///< cavity decay rate
  double g = 1e5;            ///< probe-enhanced coupling rate
  double eta = 1.0;          ///< detection efficiency
  double theta = kPi / 2.0;  ///< homodyne angle (rad)
  double temperature = 300.0;  ///< bath temperature (K)
  DissipationModel model = DissipationModel::NonRwa;

  double gamma_m() const { return omega_m / q_m; }

  /// Throws std::invalid_argument when a field is non-finite or out of range.
  void validate() const;
};

/// State-space model d<X> = (A<X> + Bu)dt + (V C^T + Gamma^T)dW for the
/// quadrature vector (Q, P, X, Y) (or (Q, P) for a reduced model).
///
/// Matrices are stored in physical units; `rate_unit` is the rate used to
/// nondimensionalize them before any steady-state solve.
struct ModelMatrices {
  Eigen::MatrixXd a;          ///< drift, n x n
  Eigen::MatrixXd b;          ///< feedback input, n x 2
  Eigen::MatrixXd c;          ///< measurement row, 1 x n
  Eigen::MatrixXd d;          ///< diffusion, n x n
  Eigen::MatrixXd gamma_row;  ///< measurement-noise correlation, 1 x n
  double rate_unit = 1.0;

  Eigen::Index states() const { return a.rows(); }

  /// Copy with every rate expressed in units of `rate_unit`
  /// (A, D divided by it; B, C, Gamma by its square root).
  ModelMatrices normalized() const;
};

struct DerivedQuantities {
  double nbar = 0.0;
  double cq = 0.0;             ///< 0 when nbar == 0 (undefined)
  double gamma_th = 0.0;       ///< rad/s
  double gamma_th_norm = 0.0;
};

/// Bose-Einstein occupation 1/(exp(hbar w / kB T) - 1); exactly 0 at T = 0.
double thermal_occupation(double omega_m, double temperature);

DerivedQuantities derived_quantities(const PhysicalParams& params);

ModelMatrices build_matrices(const PhysicalParams& params);

/// Probe amplitude from the steady state of the driven cavity at zero
/// detuning, g = g0 * 2 eps / sqrt(kappa).
double probe_amplitude(double g, double g0, double kappa);

/// Mechanics-only model with the cavity slaved to the mechanical position.
///
/// This is an internal comparison model: the cavity quadratures are replaced
/// by their drift steady state plus the white-noise limit of the cavity input
/// (Y -> -4gQ/kappa, X -> 0), which turns the cavity input noise into
/// backaction on P and into the effective measurement noise. It is not meant
/// to reproduce any published closed-form adiabatic result.
ModelMatrices adiabatic_reduce(const ModelMatrices& matrices,
                               const PhysicalParams& params);

}  // namespace optomech
