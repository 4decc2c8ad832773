#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "optomech/model.hpp"

namespace optomech {

enum class SolveMethod { Schur, NewtonRefined, OdeIntegration, KroneckerDirect };

std::string_view to_string(SolveMethod method);

struct SolveReport {
  /// Frobenius norm of the defining matrix equation, Omega_m-normalized units.
  double residual = 0.0;
  /// `residual` divided by the summed norms of the equation's terms.
  double relative_residual = 0.0;
  SolveMethod method = SolveMethod::Schur;
  bool stabilizing = false;
  int iterations = 0;
};

enum class SolverErrorKind {
  NoStabilizingSolution,
  SingularU1,
  UnstableN,
  NonConvergence,
};

std::string_view to_string(SolverErrorKind kind);

class SolverError : public std::runtime_error {
 public:
  SolverError(SolverErrorKind kind, const std::string& what,
              std::vector<std::complex<double>> spectrum = {})
      : std::runtime_error(what), kind_(kind), spectrum_(std::move(spectrum)) {}

  SolverErrorKind kind() const { return kind_; }
  /// Closed-loop (or Hamiltonian) spectrum relevant to the failure, if any.
  const std::vector<std::complex<double>>& spectrum() const { return spectrum_; }

 private:
  SolverErrorKind kind_;
  std::vector<std::complex<double>> spectrum_;
};

/// Relative tolerance a returned Riccati solution must meet.
inline constexpr double kAreTolerance = 1e-10;

struct FilterSolution {
  Eigen::MatrixXd v;  ///< steady-state conditional covariance V^c
  SolveReport report;
  /// Set when V^c_{Q X_theta} vanishes, i.e. the measured light quadrature
  /// carries no correlation with the mechanical position.
  bool uncorrelated_quadrature = false;
};

struct RiccatiSolution {
  Eigen::MatrixXd y;
  SolveReport report;
};

/// Stabilizing solution of
///   A V + V A^T + D - (V C^T + Gamma^T)(C V + Gamma) = 0.
/// The model is normalized by its rate unit before solving; V is
/// dimensionless so no rescaling is needed on return.
FilterSolution solve_filter_are(const ModelMatrices& m);

/// Integrates dV/dt = A V + V A^T + D - (V C^T + Gamma^T)(C V + Gamma) with
/// classical RK4 until the update rate in normalized time satisfies
/// ||dV/dt||_F <= tol * ||V||_F for a window of consecutive steps.
///
/// `dt` is in seconds; it must satisfy dt * rate < 0.1 for the stiffest rate
/// reported by `filter_stiffness` at `v0`.
FilterSolution integrate_filter_ode(const ModelMatrices& m,
                                    const Eigen::MatrixXd& v0, double dt,
                                    double tol = 1e-12,
                                    long max_steps = 200'000'000);

/// Largest eigenvalue modulus (rad/s) among A and the filter closed loop
/// A - Gamma^T C - V C^T C evaluated at `v`.
double filter_stiffness(const ModelMatrices& m, const Eigen::MatrixXd& v);

/// Unique stabilizing solution of A^T Y + Y A + P - Y B Q^-1 B^T Y = 0 from
/// the stable invariant subspace of [[A, -B Q^-1 B^T], [-P, -A^T]], followed
/// by Newton (Kleinman) refinement.
RiccatiSolution solve_control_are(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b,
                                  const Eigen::MatrixXd& p,
                                  const Eigen::MatrixXd& q);

/// Solution of N V + V N^T + S = 0 via the vectorized (Kronecker) system.
/// Throws SolverError(UnstableN) unless N is Hurwitz.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& n,
                               const Eigen::MatrixXd& s);

/// Eigenvalues of `n`, rightmost first (descending real part).
std::vector<std::complex<double>> closed_loop_spectrum(const Eigen::MatrixXd& n);

bool is_hurwitz(const Eigen::MatrixXd& n);

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& v) {
  return 0.5 * (v + v.transpose());
}

}  // namespace optomech
