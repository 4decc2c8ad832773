#include "optomech/model.hpp"

#include <cmath>
#include <stdexcept>

namespace optomech {

namespace {

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace

std::string_view to_string(DissipationModel model) {
  return model == DissipationModel::Rwa ? "rwa" : "nonrwa";
}

DissipationModel parse_model(std::string_view text) {
  if (text == "rwa" || text == "RWA") return DissipationModel::Rwa;
  if (text == "nonrwa" || text == "nonRWA" || text == "NonRWA" ||
      text == "non-rwa")
    return DissipationModel::NonRwa;
  throw std::invalid_argument("unknown dissipation model: " +
                              std::string(text));
}

void PhysicalParams::validate() const {
  require(std::isfinite(omega_m) && std::isfinite(q_m) &&
              std::isfinite(kappa) && std::isfinite(g) &&
              std::isfinite(eta) && std::isfinite(theta) &&
              std::isfinite(temperature),
          "physical parameters must be finite");
  require(omega_m > 0.0, "omega_m must be positive");
  require(kappa > 0.0, "kappa must be positive");
  require(g >= 0.0, "g must be non-negative");
  require(temperature >= 0.0, "temperature must be non-negative");
  require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
  require(q_m > 0.5, "q_m must exceed 1/2 (underdamped oscillator)");
}

ModelMatrices ModelMatrices::normalized() const {
  ModelMatrices out = *this;
  const double root = std::sqrt(rate_unit);
  out.a /= rate_unit;
  out.d /= rate_unit;
  out.b /= root;
  out.c /= root;
  out.gamma_row /= root;
  out.rate_unit = 1.0;
  return out;
}

double thermal_occupation(double omega_m, double temperature) {
  if (temperature == 0.0) return 0.0;
  const double x = kHbar * omega_m / (kBoltzmann * temperature);
  return 1.0 / std::expm1(x);
}

DerivedQuantities derived_quantities(const PhysicalParams& params) {
  DerivedQuantities out;
  const double gamma_m = params.gamma_m();
  out.nbar = thermal_occupation(params.omega_m, params.temperature);
  out.cq = out.nbar > 0.0
               ? 4.0 * params.g * params.g / (params.kappa * gamma_m * out.nbar)
               : 0.0;
  out.gamma_th = gamma_m * (out.nbar + 0.5);
  out.gamma_th_norm = out.gamma_th / params.omega_m;
  return out;
}

ModelMatrices build_matrices(const PhysicalParams& params) {
  params.validate();
  const double w = params.omega_m;
  const double gm = params.gamma_m();
  const double k = params.kappa;
  const double g = params.g;
  const double s = thermal_occupation(w, params.temperature) + 0.5;

  ModelMatrices m;
  m.rate_unit = w;
  m.a = Eigen::MatrixXd::Zero(4, 4);
  m.d = Eigen::MatrixXd::Zero(4, 4);
  if (params.model == DissipationModel::Rwa) {
    m.a << -gm / 2, w, 0, 0,
           -w, -gm / 2, -2 * g, 0,
           0, 0, -k / 2, 0,
           -2 * g, 0, 0, -k / 2;
    m.d.diagonal() << gm * s, gm * s, k / 2, k / 2;
  } else {
    m.a << 0, w, 0, 0,
           -w, -gm, -2 * g, 0,
           0, 0, -k / 2, 0,
           -2 * g, 0, 0, -k / 2;
    m.d.diagonal() << 0, 2 * gm * s, k / 2, k / 2;
  }

  m.b = Eigen::MatrixXd::Zero(4, 2);
  m.b(2, 0) = std::sqrt(k);
  m.b(3, 1) = std::sqrt(k);

  const double ct = std::cos(params.theta);
  const double st = std::sin(params.theta);
  m.c = Eigen::MatrixXd::Zero(1, 4);
  m.c(0, 2) = ct;
  m.c(0, 3) = st;
  m.c *= std::sqrt(2.0 * params.eta * k);
  m.gamma_row = Eigen::MatrixXd::Zero(1, 4);
  m.gamma_row(0, 2) = -ct;
  m.gamma_row(0, 3) = -st;
  m.gamma_row *= std::sqrt(params.eta * k / 2.0);
  return m;
}

double probe_amplitude(double g, double g0, double kappa) {
  if (!(g0 > 0.0)) throw std::invalid_argument("g0 must be positive");
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  return g / g0 * std::sqrt(kappa) / 2.0;
}

ModelMatrices adiabatic_reduce(const ModelMatrices& matrices,
                               const PhysicalParams& params) {
  if (!(params.kappa > 0.0))
    throw std::invalid_argument("adiabatic reduction needs kappa > 0");
  if (matrices.states() != 4)
    throw std::invalid_argument("adiabatic reduction expects the 4-mode model");

  const double k = params.kappa;
  const double g = params.g;
  const double root = std::sqrt(2.0 * params.eta / k);

  ModelMatrices r;
  r.rate_unit = matrices.rate_unit;
  r.a = matrices.a.topLeftCorner(2, 2);
  r.d = matrices.d.topLeftCorner(2, 2);
  // The amplitude quadrature acts as white force noise of intensity 8g^2/kappa.
  r.d(1, 1) += 8.0 * g * g / k;

  r.b = Eigen::MatrixXd::Zero(2, 2);
  r.b(1, 0) = -4.0 * g / std::sqrt(k);

  r.c = Eigen::MatrixXd::Zero(1, 2);
  r.c(0, 0) = -4.0 * g * root * std::sin(params.theta);
  r.gamma_row = Eigen::MatrixXd::Zero(1, 2);
  r.gamma_row(0, 1) = -2.0 * g * root * std::cos(params.theta);
  return r;
}

}  // namespace optomech
