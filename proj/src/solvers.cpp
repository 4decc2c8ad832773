#include "optomech/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace optomech {

namespace {

using Eigen::MatrixXd;

lapack_logical select_open_left_half_plane(const double* re, const double* /*im*/) {
  return *re < 0.0;
}

// Solves N X + X N^T + S = 0 without checking stability of N.
MatrixXd lyapunov_unbalanced(const MatrixXd& n, const MatrixXd& s) {
  const Eigen::Index k = n.rows();
  MatrixXd op = MatrixXd::Zero(k * k, k * k);
  // Column-major vec: vec(N X) = (I (x) N) vec X, vec(X N^T) = (N (x) I) vec X.
  for (Eigen::Index j = 0; j < k; ++j) {
    op.block(j * k, j * k, k, k) += n;
    for (Eigen::Index i = 0; i < k; ++i) {
      op.block(i * k, j * k, k, k).diagonal().array() += n(i, j);
    }
  }
  // Partial pivoting: full pivoting would zero small pivots and drop the slow modes.
  const Eigen::PartialPivLU<MatrixXd> lu(op);
  MatrixXd x = Eigen::Map<const MatrixXd>(
      Eigen::VectorXd(lu.solve(-Eigen::Map<const Eigen::VectorXd>(s.data(), k * k))).data(), k, k);
  x = symmetrized(x);

  // Iterative refinement with the residual in extended precision. Stiff
  // operators (cavity decay against mechanical damping) otherwise lose
  // digits that the physicality margin of hot states needs.
  using Long = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const Long nl = n.cast<long double>();
  const Long sl = s.cast<long double>();
  double last = INFINITY;
  for (int iteration = 0; iteration < 3; ++iteration) {
    const Long xl = x.cast<long double>();
    const Long r = nl * xl + xl * nl.transpose() + sl;
    const MatrixXd rd = r.cast<double>();
    const double size = rd.norm();
    if (!(size < 0.5 * last) || size == 0.0) break;
    last = size;
    const Eigen::VectorXd dx = lu.solve(-Eigen::Map<const Eigen::VectorXd>(rd.data(), k * k));
    const Long corrected = xl + Eigen::Map<const MatrixXd>(dx.data(), k, k).cast<long double>();
    x = symmetrized(corrected.cast<double>());
  }
  return x;
}

// Same, in the coordinates x = T z where T balances N. Feedback gains of order
// sqrt(p/q) otherwise swamp the slow mechanical entries.
MatrixXd lyapunov_kronecker(const MatrixXd& n, const MatrixXd& s) {
  const lapack_int k = static_cast<lapack_int>(n.rows());
  if (k == 0) return MatrixXd(0, 0);
  MatrixXd balanced = n;
  lapack_int ilo = 0, ihi = 0;
  Eigen::VectorXd t(k);
  if (LAPACKE_dgebal(LAPACK_COL_MAJOR, 'S', k, balanced.data(), k, &ilo, &ihi, t.data()) != 0)
    return lyapunov_unbalanced(n, s);
  const Eigen::VectorXd inv = t.cwiseInverse();
  const MatrixXd z = lyapunov_unbalanced(balanced, inv.asDiagonal() * s * inv.asDiagonal());
  return symmetrized(t.asDiagonal() * z * t.asDiagonal());
}

struct CareResidual {
  double absolute;
  double relative;
};

// Residual of a^T Y + Y a + p - Y g Y.
CareResidual care_residual(const MatrixXd& a, const MatrixXd& g,
                           const MatrixXd& p, const MatrixXd& y) {
  const MatrixXd ay = a.transpose() * y;
  const MatrixXd ygy = y * g * y;
  const double absolute = (ay + ay.transpose() + p - ygy).norm();
  const double scale = 2.0 * ay.norm() + p.norm() + ygy.norm();
  return {absolute, scale > 0.0 ? absolute / scale : absolute};
}

std::string format_spectrum(const std::vector<std::complex<double>>& spectrum) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (i) out << ", ";
    out << spectrum[i].real() << (spectrum[i].imag() < 0 ? "" : "+")
        << spectrum[i].imag() << "i";
  }
  out << "]";
  return out.str();
}

// Schur solve of a^T Y + Y a + p - Y g Y = 0 plus Newton refinement, without
// the final acceptance checks.
RiccatiSolution care_attempt(const MatrixXd& a, const MatrixXd& g, const MatrixXd& p) {
  const Eigen::Index n = a.rows();
  const lapack_int n2 = static_cast<lapack_int>(2 * n);

  MatrixXd h(2 * n, 2 * n);
  h << a, -g, -p, -a.transpose();

  MatrixXd schur_vectors(2 * n, 2 * n);
  std::vector<double> wr(2 * n), wi(2 * n);
  lapack_int stable_count = 0;
  const lapack_int info = LAPACKE_dgees(
      LAPACK_COL_MAJOR, 'V', 'S', select_open_left_half_plane, n2, h.data(),
      n2, &stable_count, wr.data(), wi.data(), schur_vectors.data(), n2);

  std::vector<std::complex<double>> hamiltonian_spectrum;
  for (Eigen::Index i = 0; i < 2 * n; ++i) hamiltonian_spectrum.emplace_back(wr[i], wi[i]);

  if (info != 0 || stable_count != n) {
    throw SolverError(SolverErrorKind::NoStabilizingSolution,
                      "Hamiltonian matrix has " + std::to_string(stable_count) +
                          " stable eigenvalues, expected " + std::to_string(n) +
                          " (dgees info " + std::to_string(info) +
                          "); spectrum " + format_spectrum(hamiltonian_spectrum),
                      hamiltonian_spectrum);
  }

  const MatrixXd u1 = schur_vectors.topLeftCorner(n, n);
  const MatrixXd u2 = schur_vectors.bottomLeftCorner(n, n);
  const Eigen::FullPivLU<MatrixXd> lu(u1.transpose());
  if (lu.rank() < n || lu.rcond() < 1e-14) {
    throw SolverError(SolverErrorKind::SingularU1,
                      "stable invariant subspace basis is degenerate",
                      hamiltonian_spectrum);
  }

  RiccatiSolution out;
  out.y = symmetrized(lu.solve(u2.transpose()).transpose());
  out.report.method = SolveMethod::Schur;
  CareResidual best = care_residual(a, g, p, out.y);

  // Kleinman iteration: (a - g Y_k)^T Y + Y (a - g Y_k) + p + Y_k g Y_k = 0.
  for (int iteration = 0; iteration < 8 && best.relative > 1e-15; ++iteration) {
    const MatrixXd closed = a - g * out.y;
    if (!is_hurwitz(closed)) break;
    const MatrixXd candidate =
        lyapunov_kronecker(closed.transpose(), p + out.y * g * out.y);
    const CareResidual r = care_residual(a, g, p, candidate);
    if (!(r.relative < best.relative)) break;
    const bool converging = r.relative < 0.5 * best.relative;
    out.y = candidate;
    best = r;
    out.report.method = SolveMethod::NewtonRefined;
    out.report.iterations = iteration + 1;
    if (!converging) break;
  }

  out.report.residual = best.absolute;
  out.report.relative_residual = best.relative;
  return out;
}

// Stabilizing solution of a^T Y + Y a + p - Y g Y = 0 with g symmetric PSD.
// No sign condition on p: the solution is selected by closed-loop spectrum.
// Diagonal scaling x = T z that balances the Hamiltonian row and column norms,
// i.e. the similarity diag(T^-1, T). Entries of T are powers of two.
Eigen::VectorXd balance_hamiltonian(const MatrixXd& a, const MatrixXd& g, const MatrixXd& p) {
  const Eigen::Index n = a.rows();
  Eigen::VectorXd t = Eigen::VectorXd::Ones(n);
  for (int sweep = 0; sweep < 20; ++sweep) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      // Norms that shrink (r) and grow (c) with t_i, diagonal excluded.
      double r = 0.0, c = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) {
          r += 2.0 * std::abs(a(i, j)) * t(j) / t(i);
          c += 2.0 * std::abs(a(j, i)) * t(i) / t(j);
        }
        r += 2.0 * std::abs(g(i, j)) / (t(i) * t(j));
        c += 2.0 * std::abs(p(i, j)) * t(i) * t(j);
      }
      if (!(r > 0.0 && c > 0.0)) continue;
      const double target = std::exp2(std::round(0.5 * std::log2(r / c)));
      if (target != 1.0) {
        t(i) *= target;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return t;
}

// Solves in the coordinates x = T z and maps Y back.
RiccatiSolution care_scaled(const MatrixXd& a, const MatrixXd& g, const MatrixXd& p,
                            const Eigen::VectorXd& t) {
  const Eigen::VectorXd inv = t.cwiseInverse();
  RiccatiSolution out = care_attempt(inv.asDiagonal() * a * t.asDiagonal(),
                                     inv.asDiagonal() * g * inv.asDiagonal(),
                                     t.asDiagonal() * p * t.asDiagonal());
  out.y = symmetrized(inv.asDiagonal() * out.y * inv.asDiagonal());
  const CareResidual r = care_residual(a, g, p, out.y);
  out.report.residual = r.absolute;
  out.report.relative_residual = r.relative;
  return out;
}

RiccatiSolution care_kernel(const MatrixXd& a, const MatrixXd& g, const MatrixXd& p) {
  RiccatiSolution out = care_scaled(a, g, p, balance_hamiltonian(a, g, p));

  // Weakly coupled states give Y entries spread over many decades, which
  // limits the accuracy of the Schur basis. Retry in coordinates x = T z with
  // T = diag(|Y_ii|^-1/2), where Y~ = T Y T has a unit diagonal.
  if (out.report.relative_residual > kAreTolerance) {
    const Eigen::Index n = a.rows();
    const double largest = out.y.diagonal().cwiseAbs().maxCoeff();
    Eigen::VectorXd t(n);
    for (Eigen::Index i = 0; i < n; ++i)
      t(i) = 1.0 / std::sqrt(std::max(std::abs(out.y(i, i)), 1e-16 * largest));
    try {
      const RiccatiSolution rescaled = care_scaled(a, g, p, t);
      if (rescaled.report.relative_residual < out.report.relative_residual) out = rescaled;
    } catch (const SolverError&) {
      // keep the first attempt
    }
  }

  const MatrixXd closed = a - g * out.y;
  out.report.stabilizing = is_hurwitz(closed);
  if (!out.report.stabilizing) {
    const auto spectrum = closed_loop_spectrum(closed);
    throw SolverError(SolverErrorKind::NoStabilizingSolution,
                      "Riccati solution does not stabilize the closed loop; "
                      "spectrum " + format_spectrum(spectrum),
                      spectrum);
  }
  if (!(out.report.relative_residual <= kAreTolerance)) {
    throw SolverError(SolverErrorKind::NonConvergence,
                      "Riccati residual " + std::to_string(out.report.relative_residual) +
                          " above tolerance");
  }
  return out;
}

struct StandardFilter {
  MatrixXd a_bar;  // A - Gamma^T C
  MatrixXd d_bar;  // D - Gamma^T Gamma
  MatrixXd ctc;    // C^T C
};

StandardFilter standard_form(const ModelMatrices& n) {
  return {n.a - n.gamma_row.transpose() * n.c,
          n.d - n.gamma_row.transpose() * n.gamma_row,
          n.c.transpose() * n.c};
}

MatrixXd filter_rhs(const ModelMatrices& n, const MatrixXd& v) {
  const MatrixXd av = n.a * v;
  const MatrixXd f = n.c * v + n.gamma_row;
  return av + av.transpose() + n.d - f.transpose() * f;
}

double filter_residual_scale(const ModelMatrices& n, const MatrixXd& v) {
  const MatrixXd f = n.c * v + n.gamma_row;
  return 2.0 * (n.a * v).norm() + n.d.norm() + (f.transpose() * f).norm();
}

bool mechanics_light_uncorrelated(const MatrixXd& v, const ModelMatrices& m) {
  if (v.rows() != 4) return false;
  // V^c C^T restricted to Q is proportional to V_QX cos(theta) + V_QY sin(theta).
  const double qx_theta = (v.row(0) * m.c.transpose())(0, 0);
  const double scale = std::sqrt(v(0, 0) * (m.c * v * m.c.transpose())(0, 0));
  return !(std::abs(qx_theta) > 1e-14 * scale);
}

}  // namespace

std::string_view to_string(SolveMethod method) {
  switch (method) {
    case SolveMethod::Schur: return "schur";
    case SolveMethod::NewtonRefined: return "newton_refined";
    case SolveMethod::OdeIntegration: return "ode_integration";
    case SolveMethod::KroneckerDirect: return "kronecker_direct";
  }
  return "unknown";
}

std::string_view to_string(SolverErrorKind kind) {
  switch (kind) {
    case SolverErrorKind::NoStabilizingSolution: return "NoStabilizingSolution";
    case SolverErrorKind::SingularU1: return "SingularU1";
    case SolverErrorKind::UnstableN: return "UnstableN";
    case SolverErrorKind::NonConvergence: return "NonConvergence";
  }
  return "unknown";
}

std::vector<std::complex<double>> closed_loop_spectrum(const MatrixXd& n) {
  const Eigen::EigenSolver<MatrixXd> solver(n, false);
  std::vector<std::complex<double>> values(solver.eigenvalues().begin(),
                                           solver.eigenvalues().end());
  std::sort(values.begin(), values.end(), [](const auto& l, const auto& r) {
    if (l.real() != r.real()) return l.real() > r.real();
    return l.imag() < r.imag();
  });
  return values;
}

bool is_hurwitz(const MatrixXd& n) {
  const auto spectrum = closed_loop_spectrum(n);
  return spectrum.empty() || spectrum.front().real() < 0.0;
}

FilterSolution solve_filter_are(const ModelMatrices& m) {
  const ModelMatrices n = m.normalized();
  const StandardFilter s = standard_form(n);

  // Filter equation is the dual of the control equation: A -> A_bar^T, G = C^T C.
  const RiccatiSolution dual = care_kernel(s.a_bar.transpose(), s.ctc, s.d_bar);

  FilterSolution out;
  out.v = dual.y;
  out.report = dual.report;
  out.report.residual = filter_rhs(n, out.v).norm();
  const double scale = filter_residual_scale(n, out.v);
  out.report.relative_residual = scale > 0 ? out.report.residual / scale : out.report.residual;
  out.report.stabilizing = is_hurwitz(s.a_bar - out.v * s.ctc);
  out.uncorrelated_quadrature = mechanics_light_uncorrelated(out.v, m);
  return out;
}

double filter_stiffness(const ModelMatrices& m, const MatrixXd& v) {
  const StandardFilter s = standard_form(m);
  double rate = 0.0;
  for (const auto& z : closed_loop_spectrum(m.a)) rate = std::max(rate, std::abs(z));
  for (const auto& z : closed_loop_spectrum(s.a_bar - v * s.ctc))
    rate = std::max(rate, std::abs(z));
  return rate;
}

FilterSolution integrate_filter_ode(const ModelMatrices& m, const MatrixXd& v0,
                                    double dt, double tol, long max_steps) {
  if (v0.rows() != m.states() || v0.cols() != m.states())
    throw std::invalid_argument("initial covariance has the wrong shape");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double stiffness = filter_stiffness(m, v0);
  if (!(dt * stiffness < 0.1)) {
    throw std::invalid_argument("dt * stiffness = " + std::to_string(dt * stiffness) +
                                " violates the RK4 stability bound 0.1");
  }

  const ModelMatrices n = m.normalized();
  const double h = dt * m.rate_unit;
  constexpr int kWindow = 16;

  MatrixXd v = symmetrized(v0);
  int quiet_steps = 0;
  long step = 0;
  for (; step < max_steps && quiet_steps < kWindow; ++step) {
    const MatrixXd k1 = filter_rhs(n, v);
    const MatrixXd k2 = filter_rhs(n, v + 0.5 * h * k1);
    const MatrixXd k3 = filter_rhs(n, v + 0.5 * h * k2);
    const MatrixXd k4 = filter_rhs(n, v + h * k3);
    const MatrixXd update = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    v += update;
    v = symmetrized(v);
    if (!v.allFinite()) break;
    // The measurement term makes the stiffness state dependent.
    if (!(h * filter_stiffness(n, v) < 0.1)) {
      throw std::invalid_argument("dt * stiffness = " +
                                  std::to_string(h * filter_stiffness(n, v)) +
                                  " exceeds the RK4 stability bound 0.1 after " +
                                  std::to_string(step + 1) + " steps");
    }
    quiet_steps = update.norm() / h <= tol * v.norm() ? quiet_steps + 1 : 0;
  }
  if (quiet_steps < kWindow) {
    throw SolverError(SolverErrorKind::NonConvergence,
                      "filter ODE did not settle after " + std::to_string(step) +
                          " steps");
  }

  FilterSolution out;
  out.v = v;
  out.report.method = SolveMethod::OdeIntegration;
  out.report.iterations = static_cast<int>(std::min<long>(step, INT32_MAX));
  out.report.residual = filter_rhs(n, v).norm();
  const double scale = filter_residual_scale(n, v);
  out.report.relative_residual = scale > 0 ? out.report.residual / scale : out.report.residual;
  const StandardFilter s = standard_form(n);
  out.report.stabilizing = is_hurwitz(s.a_bar - v * s.ctc);
  out.uncorrelated_quadrature = mechanics_light_uncorrelated(v, m);
  return out;
}

RiccatiSolution solve_control_are(const MatrixXd& a, const MatrixXd& b,
                                  const MatrixXd& p, const MatrixXd& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || p.rows() != n || p.cols() != n ||
      q.rows() != b.cols() || q.cols() != b.cols()) {
    throw std::invalid_argument("control Riccati: inconsistent matrix shapes");
  }
  if ((p - p.transpose()).norm() > 1e-12 * std::max(1.0, p.norm()) ||
      (q - q.transpose()).norm() > 1e-12 * std::max(1.0, q.norm())) {
    throw std::invalid_argument("control Riccati: P and Q must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<MatrixXd> p_eig(p, Eigen::EigenvaluesOnly);
  if (p_eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, p.norm()))
    throw std::invalid_argument("control Riccati: P must be positive semi-definite");
  const Eigen::LLT<MatrixXd> q_chol(q);
  if (q_chol.info() != Eigen::Success)
    throw std::invalid_argument("control Riccati: Q must be positive definite");

  const MatrixXd g = symmetrized(b * q_chol.solve(b.transpose()));
  return care_kernel(a, g, p);
}

MatrixXd solve_lyapunov(const MatrixXd& n, const MatrixXd& s) {
  if (n.rows() != n.cols() || s.rows() != n.rows() || s.cols() != n.cols())
    throw std::invalid_argument("Lyapunov: inconsistent matrix shapes");
  const auto spectrum = closed_loop_spectrum(n);
  if (!spectrum.empty() && !(spectrum.front().real() < 0.0)) {
    throw SolverError(SolverErrorKind::UnstableN,
                      "Lyapunov operator is not Hurwitz; spectrum " +
                          format_spectrum(spectrum),
                      spectrum);
  }
  return lyapunov_kronecker(n, s);
}

}  // namespace optomech
