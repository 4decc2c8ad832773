#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "optomech/model.hpp"
#include "optomech/solvers.hpp"

namespace optomech::testing {

inline double relative_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Thermal mechanics and vacuum light, the g = 0 fixed point.
inline Eigen::MatrixXd thermal_state(const PhysicalParams& p) {
  const double s = thermal_occupation(p.omega_m, p.temperature) + 0.5;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 4);
  v.diagonal() << s, s, 0.5, 0.5;
  return v;
}

/// Integrates dX/dt = f(X) with RK4 until ||f|| <= tol ||X||; h in the units of f.
template <typename F>
Eigen::MatrixXd integrate_to_rest(F&& f, Eigen::MatrixXd x, double h, double tol,
                                  long max_steps = 50'000'000) {
  for (long i = 0; i < max_steps; ++i) {
    const Eigen::MatrixXd k1 = f(x);
    if (k1.norm() <= tol * x.norm()) return x;
    const Eigen::MatrixXd k2 = f(x + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = f(x + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    x = 0.5 * (x + x.transpose()).eval();
  }
  return x;
}

inline double max_modulus(const Eigen::MatrixXd& m) {
  double r = 0.0;
  for (const auto& z : closed_loop_spectrum(m)) r = std::max(r, std::abs(z));
  return r;
}

inline double min_decay(const Eigen::MatrixXd& m) {
  return -closed_loop_spectrum(m).front().real();
}

}  // namespace optomech::testing
