#pragma once

// Quad-precision helpers for margins that double cannot resolve.

#include <limits>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace optomech::detail {
using Quad = boost::multiprecision::cpp_bin_float_quad;
}  // namespace optomech::detail

namespace Eigen {
template <>
struct NumTraits<optomech::detail::Quad> : GenericNumTraits<optomech::detail::Quad> {
  using Quad = optomech::detail::Quad;
  enum { IsComplex = 0, IsInteger = 0, IsSigned = 1, RequireInitialization = 1,
         ReadCost = 1, AddCost = 4, MulCost = 8 };
  static Quad dummy_precision() { return Quad(1e-30); }
  static int digits10() { return std::numeric_limits<Quad>::digits10; }
};
}  // namespace Eigen

namespace optomech::detail {

using QuadMatrix = Eigen::Matrix<Quad, Eigen::Dynamic, Eigen::Dynamic>;

/// min eig(V + i Omega/2) through the real embedding [[V, -S], [S, V]].
double quad_margin(const QuadMatrix& v);

/// Solves N X + X N^T + S = 0 by the Kronecker form.
QuadMatrix quad_lyapunov(const QuadMatrix& n, const QuadMatrix& s);

/// Newton steps on A V + V A^T + D - f^T f = 0, f = C V + Gamma, from v0.
QuadMatrix quad_filter_newton(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                              const Eigen::MatrixXd& gamma_row, const Eigen::MatrixXd& d,
                              const Eigen::MatrixXd& v0, int steps = 2);

}  // namespace optomech::detail
