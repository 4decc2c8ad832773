#include "extended.hpp"

namespace optomech::detail {

double quad_margin(const QuadMatrix& v) {
  const Eigen::Index n = v.rows();
  QuadMatrix r = QuadMatrix::Zero(2 * n, 2 * n);
  r.topLeftCorner(n, n) = v;
  r.bottomRightCorner(n, n) = v;
  for (Eigen::Index i = 0; i < n; i += 2) {
    r(n + i, i + 1) = r(i + 1, n + i) = Quad(0.5);
    r(n + i + 1, i) = r(i, n + i + 1) = Quad(-0.5);
  }
  const Eigen::SelfAdjointEigenSolver<QuadMatrix> eig(r, Eigen::EigenvaluesOnly);
  return static_cast<double>(eig.eigenvalues().minCoeff());
}

QuadMatrix quad_lyapunov(const QuadMatrix& n, const QuadMatrix& s) {
  const Eigen::Index k = n.rows();
  QuadMatrix op = QuadMatrix::Zero(k * k, k * k);
  QuadMatrix rhs(k * k, 1);
  for (Eigen::Index j = 0; j < k; ++j) {
    op.block(j * k, j * k, k, k) += n;
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index d = 0; d < k; ++d) op(i * k + d, j * k + d) += n(i, j);
      rhs(j * k + i, 0) = -s(i, j);
    }
  }
  const QuadMatrix x = op.partialPivLu().solve(rhs);
  QuadMatrix out(k, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < k; ++i) out(i, j) = x(j * k + i, 0);
  return (out + out.transpose()) / Quad(2);
}

QuadMatrix quad_filter_newton(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                              const Eigen::MatrixXd& gamma_row, const Eigen::MatrixXd& d,
                              const Eigen::MatrixXd& v0, int steps) {
  const QuadMatrix aq = a.cast<Quad>();
  const QuadMatrix cq = c.cast<Quad>();
  const QuadMatrix gq = gamma_row.cast<Quad>();
  const QuadMatrix dq = d.cast<Quad>();
  QuadMatrix v = v0.cast<Quad>();
  for (int i = 0; i < steps; ++i) {
    const QuadMatrix f = cq * v + gq;
    const QuadMatrix av = aq * v;
    const QuadMatrix residual = av + av.transpose() + dq - f.transpose() * f;
    v += quad_lyapunov(aq - f.transpose() * cq, residual);
  }
  return v;
}

}  // namespace optomech::detail
