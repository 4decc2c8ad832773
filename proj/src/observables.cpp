#include "optomech/observables.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "extended.hpp"
#include "optomech/model.hpp"

namespace optomech {

double phonon_number(const MechanicalBlock& block) {
  return (block.vqq + block.vpp - 1.0) / 2.0;
}

double rotated_variance(const MechanicalBlock& block, double nu) {
  const double c = std::cos(nu);
  const double s = std::sin(nu);
  return c * c * block.vqq + 2.0 * c * s * block.vqp + s * s * block.vpp;
}

SqueezingResult min_quadrature_variance(const MechanicalBlock& block) {
  const double half_diff = 0.5 * (block.vqq - block.vpp);
  const double mean = 0.5 * (block.vqq + block.vpp);
  const double radius = std::hypot(half_diff, block.vqp);

  SqueezingResult out;
  out.v_min = mean - radius;
  if (radius == 0.0) {
    out.angle = 0.0;
  } else {
    // Major axis sits at alpha; the minimum is a quarter turn away.
    const double alpha = 0.5 * std::atan2(block.vqp, half_diff);
    double angle = alpha + kPi / 2.0;
    if (angle > kPi / 2.0) angle -= kPi;
    out.angle = angle;
  }
  out.squeezed = out.v_min < 0.5;
  return out;
}

Physicality check_physicality(const Eigen::MatrixXd& v) {
  if (v.rows() != v.cols() || v.rows() % 2 != 0)
    throw std::invalid_argument("covariance must be square with an even dimension");
  const Eigen::Index n = v.rows();
  Eigen::MatrixXcd h = v.cast<std::complex<double>>();
  for (Eigen::Index i = 0; i < n; i += 2) {
    h(i, i + 1) += std::complex<double>(0.0, 0.5);
    h(i + 1, i) -= std::complex<double>(0.0, 0.5);
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h, Eigen::EigenvaluesOnly);
  Physicality out;
  out.margin = eig.eigenvalues().minCoeff();

  // Hot states have |V| up to ~1e10, where the double eigensolver's absolute
  // error exceeds the tolerance. Redo borderline cases in quad precision.
  const double noise = 1e3 * std::numeric_limits<double>::epsilon() * h.norm();
  if (std::abs(out.margin) <= noise) out.margin = detail::quad_margin(v.cast<detail::Quad>());
  out.passes = out.margin >= -kPhysicalityTolerance;
  return out;
}

Physicality check_stationary_physicality(const Eigen::MatrixXd& n, const Eigen::MatrixXd& s) {
  if (n.rows() != n.cols() || s.rows() != n.rows() || s.cols() != n.cols() || n.rows() % 2 != 0)
    throw std::invalid_argument("stationary physicality: inconsistent matrix shapes");
  Physicality out;
  out.margin = detail::quad_margin(detail::quad_lyapunov(n.cast<detail::Quad>(), s.cast<detail::Quad>()));
  out.passes = out.margin >= -kPhysicalityTolerance;
  return out;
}

double purity(const MechanicalBlock& block) {
  return 1.0 / (2.0 * std::sqrt(block.determinant()));
}

}  // namespace optomech
