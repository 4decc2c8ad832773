#include "optomech/control.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "extended.hpp"
#include "optomech/observables.hpp"

namespace optomech {

using Eigen::MatrixXd;

std::string_view to_string(CostKind kind) {
  return kind == CostKind::Cooling ? "cooling" : "squeezing";
}

CostKind parse_cost_kind(std::string_view text) {
  if (text == "cooling") return CostKind::Cooling;
  if (text == "squeezing") return CostKind::Squeezing;
  throw std::invalid_argument("unknown cost kind: " + std::string(text));
}

void CostSpec::validate() const {
  if (!(p > 0.0) || !(q > 0.0) || !std::isfinite(p) || !std::isfinite(q))
    throw std::invalid_argument("cost weights p and q must be positive and finite");
  if (kind == CostKind::Squeezing && !std::isfinite(nu))
    throw std::invalid_argument("squeezing angle must be finite");
}

double wrap_half_period(double angle) {
  double wrapped = std::remainder(angle, kPi);  // [-pi/2, pi/2]
  if (wrapped <= -kPi / 2.0) wrapped += kPi;
  return wrapped;
}

CostMatrices cost_matrices(const CostSpec& spec, double omega_m) {
  spec.validate();
  CostMatrices out;
  out.p = MatrixXd::Zero(4, 4);
  if (spec.kind == CostKind::Cooling) {
    out.p(0, 0) = out.p(1, 1) = spec.p * omega_m;
  } else {
    const double c = std::cos(spec.nu);
    const double s = std::sin(spec.nu);
    out.p(0, 0) = c * c;
    out.p(0, 1) = out.p(1, 0) = c * s;
    out.p(1, 1) = s * s;
    out.p *= spec.p * omega_m;
  }
  out.q = spec.q * MatrixXd::Identity(2, 2);
  return out;
}

ControlLaw solve_control(const ModelMatrices& m, const CostSpec& spec) {
  const ModelMatrices n = m.normalized();
  // K depends on p/q only, so solve with p' q' = 1 to keep Y of order one.
  const double ratio = spec.p_over_q();
  const double root = std::sqrt(ratio);
  CostSpec balanced = spec;
  balanced.p = root;
  balanced.q = 1.0 / root;
  const CostMatrices w = cost_matrices(balanced, 1.0);

  ControlLaw out;
  out.riccati = solve_control_are(n.a, n.b, w.p, w.q);
  out.k_normalized = w.q.inverse() * n.b.transpose() * out.riccati.y;
  out.riccati.y *= std::sqrt(spec.p * spec.q);
  return out;
}

double feedback_strength(const MatrixXd& k, const MatrixXd& v_excess) {
  const MatrixXd vu = k * v_excess * k.transpose();
  return std::sqrt(std::max(vu(0, 0), 0.0));
}

LqgSolution synthesize(const ModelMatrices& matrices, const FilterSolution& filter,
                       const CostSpec& spec) {
  spec.validate();
  const ModelMatrices n = matrices.normalized();
  const ControlLaw law = solve_control(matrices, spec);

  const MatrixXd closed = n.a - n.b * law.k_normalized;
  auto spectrum = closed_loop_spectrum(closed);
  if (!spectrum.empty() && !(spectrum.front().real() < 0.0)) {
    for (auto& z : spectrum) z *= matrices.rate_unit;
    throw UnstableClosedLoop("A - BK is not Hurwitz", std::move(spectrum));
  }
  const MatrixXd f = n.c * filter.v + n.gamma_row;

  LqgSolution out;
  out.matrices = matrices;
  out.y = law.riccati.y;
  out.k = std::sqrt(matrices.rate_unit) * law.k_normalized;
  out.v_conditional = filter.v;
  out.v_excess = solve_lyapunov(closed, f.transpose() * f);
  out.v_total = out.v_conditional + out.v_excess;
  out.feedback_strength = feedback_strength(out.k, out.v_excess);
  out.filter_report = filter.report;
  out.control_report = law.riccati.report;
  out.uncorrelated_quadrature = filter.uncorrelated_quadrature;
  out.closed_loop = std::move(spectrum);
  for (auto& z : out.closed_loop) z *= matrices.rate_unit;
  return out;
}

namespace {

bool borderline(double margin, const MatrixXd& v) {
  return std::abs(margin) <= 1e3 * std::numeric_limits<double>::epsilon() * (v.norm() + 1.0);
}

}  // namespace

double conditional_margin(const ModelMatrices& matrices, const MatrixXd& v_c) {
  const double margin = check_physicality(v_c).margin;
  if (!borderline(margin, v_c)) return margin;
  const ModelMatrices n = matrices.normalized();
  return detail::quad_margin(detail::quad_filter_newton(n.a, n.c, n.gamma_row, n.d, v_c));
}

double unconditional_margin(const LqgSolution& s) {
  const double margin = check_physicality(s.v_total).margin;
  if (!borderline(margin, s.v_total)) return margin;
  const ModelMatrices n = s.matrices.normalized();
  const detail::QuadMatrix v_c =
      detail::quad_filter_newton(n.a, n.c, n.gamma_row, n.d, s.v_conditional);
  const MatrixXd k = s.k / std::sqrt(s.matrices.rate_unit);
  const detail::QuadMatrix closed = (n.a - n.b * k).cast<detail::Quad>();
  const detail::QuadMatrix f = n.c.cast<detail::Quad>() * v_c + n.gamma_row.cast<detail::Quad>();
  return detail::quad_margin(v_c + detail::quad_lyapunov(closed, f.transpose() * f));
}

LqgSolution synthesize(const PhysicalParams& params, const CostSpec& spec) {
  const ModelMatrices m = build_matrices(params);
  return synthesize(m, solve_filter_are(m), spec);
}

double position_light_covariance(const MatrixXd& v_c, double theta) {
  return std::cos(theta) * v_c(0, 2) + std::sin(theta) * v_c(0, 3);
}

double asymptotic_excess_scale(const PhysicalParams& params, const MatrixXd& v_c) {
  const double vq = position_light_covariance(v_c, params.theta);
  return params.eta * params.kappa / params.omega_m * vq * vq;
}

ExcessCooling asymptotic_excess_cooling(const PhysicalParams& params, const MatrixXd& v_c) {
  const double u = asymptotic_excess_scale(params, v_c);
  if (params.model == DissipationModel::NonRwa) return {u, u};
  const double inv_q = 1.0 / params.q_m;
  const double root = std::sqrt(4.0 + inv_q * inv_q);
  return {2.0 / root * u, (2.0 + inv_q * inv_q - inv_q * root) / root * u};
}

ExcessSqueezing asymptotic_excess_squeezing(const PhysicalParams& params,
                                            const MatrixXd& v_c, double nu) {
  if (params.model != DissipationModel::NonRwa)
    throw std::invalid_argument("squeezing asymptotics are derived for the nonRWA model");
  const double u = asymptotic_excess_scale(params, v_c);
  const double w = wrap_half_period(nu);
  if (w == 0.0) return {0.0, kDivergent, -u};
  if (w == kPi / 2.0) return {0.0, kDivergent, u};
  if (w > 0.0) return {0.0, 2.0 / std::sin(2.0 * w) * u, 0.0};
  return {-2.0 * std::sin(2.0 * w) * u,
          -(std::cos(4.0 * w) + 1.0) / std::sin(2.0 * w) * u,
          -2.0 * std::cos(2.0 * w) * u};
}

Eigen::Matrix2d rotate_mechanical(const MatrixXd& v, double nu) {
  Eigen::Matrix2d r;
  r << std::cos(nu), std::sin(nu), -std::sin(nu), std::cos(nu);
  const Eigen::Matrix2d block = v.topLeftCorner(2, 2);
  return r * block * r.transpose();
}

MatrixXd asymptotic_gain_rwa(const PhysicalParams& params, double p_over_q) {
  const double inv_q = 1.0 / params.q_m;
  const double root = std::sqrt(p_over_q);
  MatrixXd k = MatrixXd::Zero(2, 4);
  k(0, 0) = 0.5 * (inv_q - std::sqrt(4.0 + inv_q * inv_q)) * root;
  k(0, 1) = 0.5 * root;
  k(0, 2) = 2.0 * std::sqrt(params.g / std::sqrt(params.kappa * params.omega_m)) *
            std::pow(p_over_q, 0.25);
  return k;
}

Extrapolation extrapolate_quarter_power(const std::array<double, 3>& ratios,
                                        const std::array<double, 3>& values) {
  Eigen::Matrix3d vandermonde;
  Eigen::Vector3d rhs;
  for (int i = 0; i < 3; ++i) {
    const double x = std::pow(ratios[i], -0.25);
    vandermonde.row(i) << 1.0, x, x * x;
    rhs(i) = values[i];
  }
  Extrapolation out;
  out.ratios = ratios;
  out.values = values;
  out.limit = vandermonde.fullPivLu().solve(rhs)(0);
  return out;
}

}  // namespace optomech
