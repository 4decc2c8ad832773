#pragma once

#include <Eigen/Dense>

namespace optomech {

/// Mechanical (Q, P) part of a covariance matrix. Vacuum is 1/2 on the diagonal.
struct MechanicalBlock {
  double vqq = 0.5;
  double vpp = 0.5;
  double vqp = 0.0;

  static MechanicalBlock from(const Eigen::MatrixXd& v) { return {v(0, 0), v(1, 1), v(0, 1)}; }
  double determinant() const { return vqq * vpp - vqp * vqp; }
};

struct SqueezingResult {
  double v_min = 0.0;
  double angle = 0.0;  ///< rad, in (-pi/2, pi/2]
  bool squeezed = false;
};

double phonon_number(const MechanicalBlock& block);

/// Variance of Q_nu = cos(nu) Q + sin(nu) P.
double rotated_variance(const MechanicalBlock& block, double nu);

SqueezingResult min_quadrature_variance(const MechanicalBlock& block);

struct Physicality {
  bool passes = false;
  double margin = 0.0;  ///< smallest eigenvalue of V + (i/2) Omega
};

inline constexpr double kPhysicalityTolerance = 1e-10;

/// Checks V + (i/2) Omega >= 0 with Omega the direct sum of [[0, 1], [-1, 0]]
/// over consecutive quadrature pairs.
Physicality check_physicality(const Eigen::MatrixXd& v);

/// Physicality of the stationary solution of N X + X N^T + S = 0, solved and
/// checked in quad precision. For hot states the rounding of X to double
/// alone moves the margin past the tolerance.
Physicality check_stationary_physicality(const Eigen::MatrixXd& n, const Eigen::MatrixXd& s);

double purity(const MechanicalBlock& block);

}  // namespace optomech
