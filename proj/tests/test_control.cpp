#include <catch_amalgamated.hpp>

#include <cmath>

#include "optomech/control.hpp"
#include "optomech/observables.hpp"
#include "support.hpp"

using namespace optomech;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using Eigen::MatrixXd;

namespace {

PhysicalParams benchmark(DissipationModel model) {
  PhysicalParams p;
  p.omega_m = 2 * kPi * 1.139e6;
  p.q_m = 1.03e9;
  p.kappa = 2 * kPi * 15.9e6;
  p.eta = 0.77;
  p.temperature = 300;
  p.g = 3.1e5;
  p.theta = kPi / 2;
  p.model = model;
  return p;
}

PhysicalParams moderate(DissipationModel model, double q_m = 1e3) {
  PhysicalParams p;
  p.omega_m = 1e6;
  p.kappa = 1e8;
  p.g = 1e5;
  p.q_m = q_m;
  p.model = model;
  return p;
}

}  // namespace

TEST_CASE("cost matrices") {
  const CostMatrices cool = cost_matrices({CostKind::Cooling, 0.0, 2.0, 0.7}, 3.0);
  MatrixXd expected = MatrixXd::Zero(4, 4);
  expected.diagonal() << 6, 6, 0, 0;
  CHECK(cool.p == expected);
  CHECK(cool.q == 0.7 * MatrixXd::Identity(2, 2));

  const CostMatrices s0 = cost_matrices(CostSpec::squeezing(0.0, 1.0), 1.0);
  expected.setZero();
  expected(0, 0) = 1;
  CHECK(s0.p == expected);

  const CostMatrices s90 = cost_matrices(CostSpec::squeezing(kPi / 2, 1.0), 1.0);
  expected.setZero();
  expected(1, 1) = 1;
  CHECK((s90.p - expected).norm() <= 1e-15);

  for (double nu : {-1.3, -0.2, 0.4, 1.1}) {
    const MatrixXd a = cost_matrices(CostSpec::squeezing(nu, 5.0), 2.0).p;
    const MatrixXd b = cost_matrices(CostSpec::squeezing(nu + kPi, 5.0), 2.0).p;
    CHECK((a - b).norm() <= 1e-14 * a.norm());
  }

  CHECK_THROWS_AS(cost_matrices({CostKind::Cooling, 0.0, 0.0, 1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(cost_matrices({CostKind::Cooling, 0.0, 1.0, -1.0}, 1.0), std::invalid_argument);
}

TEST_CASE("angle wrapping") {
  CHECK_THAT(wrap_half_period(kPi / 2), WithinAbs(kPi / 2, 1e-15));
  CHECK_THAT(wrap_half_period(-kPi / 2), WithinAbs(kPi / 2, 1e-15));
  CHECK_THAT(wrap_half_period(0.3 + kPi), WithinAbs(0.3, 1e-14));
  CHECK_THAT(wrap_half_period(-0.3 - 3 * kPi), WithinAbs(-0.3, 1e-14));
}

TEST_CASE("synthesis invariants") {
  for (auto model : {DissipationModel::Rwa, DissipationModel::NonRwa}) {
    for (double ratio : {1e2, 1e6, 1e10, 1e12}) {
      for (const CostSpec& spec : {CostSpec::cooling(ratio), CostSpec::squeezing(0.4, ratio),
                                   CostSpec::squeezing(-0.7, ratio)}) {
        const LqgSolution s = synthesize(moderate(model), spec);
        CHECK((s.v_total - s.v_conditional - s.v_excess).norm() <= 1e-15 * s.v_total.norm());
        const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s.v_excess);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * s.v_excess.norm());
        const double scale = s.k.cwiseAbs().maxCoeff();
        CHECK(s.k.row(1).cwiseAbs().maxCoeff() <= 1e-9 * scale);
        CHECK(s.k.col(3).cwiseAbs().maxCoeff() <= 1e-9 * scale);
        CHECK(s.closed_loop.front().real() < 0.0);
        CHECK(s.control_report.relative_residual <= kAreTolerance);
        const auto total = MechanicalBlock::from(s.v_total);
        const auto cond = MechanicalBlock::from(s.v_conditional);
        CHECK(phonon_number(total) >= phonon_number(cond));
      }
    }
  }
}

TEST_CASE("physicality margins of hot states") {
  for (auto model : {DissipationModel::Rwa, DissipationModel::NonRwa}) {
    for (double ratio : {1e6, 1e12}) {
      const LqgSolution s = synthesize(benchmark(model), CostSpec::cooling(ratio));
      const double cond = conditional_margin(s.matrices, s.v_conditional);
      const double uncond = unconditional_margin(s);
      CHECK(cond >= -kPhysicalityTolerance);
      CHECK(uncond >= -kPhysicalityTolerance);
      const double slack = 1e3 * 2.3e-16 * (s.v_total.norm() + 1);
      CHECK_THAT(uncond, WithinAbs(check_physicality(s.v_total).margin, slack));
      CHECK_THAT(cond, WithinAbs(check_physicality(s.v_conditional).margin, slack));
    }
  }
  const LqgSolution s = synthesize(benchmark(DissipationModel::Rwa), CostSpec::cooling(1e6));
  const MatrixXd squeezed = 0.5 * s.v_conditional;
  CHECK(conditional_margin(s.matrices, squeezed) == check_physicality(squeezed).margin);
  CHECK(conditional_margin(s.matrices, squeezed) < 0.0);
}

TEST_CASE("no coupling means no excess noise") {
  PhysicalParams p = moderate(DissipationModel::NonRwa);
  p.g = 0.0;
  const LqgSolution s = synthesize(p, CostSpec::cooling(1e8));
  CHECK(s.v_excess.norm() <= 1e-12 * s.v_conditional.norm());
  CHECK((s.v_total - s.v_conditional).norm() <= 1e-12 * s.v_conditional.norm());
  CHECK(s.feedback_strength <= 1e-9);
}

TEST_CASE("cheaper feedback cools further and needs more drive") {
  for (auto model : {DissipationModel::Rwa, DissipationModel::NonRwa}) {
    double last_n = INFINITY, last_sigma = 0.0;
    for (double ratio : {1e2, 1e4, 1e6, 1e8, 1e10, 1e12}) {
      const LqgSolution s = synthesize(benchmark(model), CostSpec::cooling(ratio));
      const double n = phonon_number(MechanicalBlock::from(s.v_total));
      CHECK(n <= last_n * (1 + 1e-9));
      CHECK(s.feedback_strength >= last_sigma);
      last_n = n;
      last_sigma = s.feedback_strength;
    }
  }
}

TEST_CASE("benchmark cooling point") {
  for (auto model : {DissipationModel::Rwa, DissipationModel::NonRwa}) {
    const LqgSolution s = synthesize(benchmark(model), CostSpec::cooling(1e12));
    const double n = phonon_number(MechanicalBlock::from(s.v_total));
    CHECK_THAT(n, WithinAbs(1.38, 0.03));
  }
}

TEST_CASE("feedback strength") {
  const MatrixXd v = MatrixXd::Identity(4, 4);
  CHECK(feedback_strength(MatrixXd::Zero(2, 4), v) == 0.0);
  const LqgSolution s = synthesize(benchmark(DissipationModel::NonRwa), CostSpec::cooling(1e8));
  CHECK_THAT(feedback_strength(2 * s.k, s.v_excess), WithinRel(2 * s.feedback_strength, 1e-12));
  const MatrixXd vu = s.k * s.v_excess * s.k.transpose();
  CHECK(std::abs(vu(1, 1)) <= 1e-12 * vu(0, 0));
}

TEST_CASE("asymptotic closed forms: arithmetic") {
  PhysicalParams p = moderate(DissipationModel::NonRwa);
  p.eta = 1.0;
  p.kappa = 100 * p.omega_m;
  p.theta = kPi / 2;
  MatrixXd vc = MatrixXd::Identity(4, 4);
  vc(0, 3) = vc(3, 0) = 0.01;
  const ExcessCooling e = asymptotic_excess_cooling(p, vc);
  CHECK_THAT(e.qq, WithinRel(0.01, 1e-12));
  CHECK_THAT(e.pp, WithinRel(0.01, 1e-12));

  p.model = DissipationModel::Rwa;
  p.q_m = 1e12;
  const ExcessCooling r = asymptotic_excess_cooling(p, vc);
  CHECK_THAT(r.qq, WithinRel(0.01, 1e-9));
  CHECK_THAT(r.pp, WithinRel(0.01, 1e-9));

  p.model = DissipationModel::NonRwa;
  const double u = asymptotic_excess_scale(p, vc);
  const ExcessSqueezing plus = asymptotic_excess_squeezing(p, vc, kPi / 4);
  CHECK(plus.qq == 0.0);
  CHECK_THAT(plus.pp, WithinRel(2 * u, 1e-12));
  CHECK(plus.qp == 0.0);
  const ExcessSqueezing minus = asymptotic_excess_squeezing(p, vc, -kPi / 4);
  CHECK_THAT(minus.qq, WithinRel(2 * u, 1e-12));
  CHECK_THAT(minus.pp, WithinAbs(0.0, 1e-12 * u));
  CHECK_THAT(minus.qp, WithinAbs(0.0, 1e-12 * u));
  const ExcessSqueezing zero = asymptotic_excess_squeezing(p, vc, 0.0);
  CHECK(zero.qq == 0.0);
  CHECK(std::isinf(zero.pp));
  CHECK(zero.qp == -u);
  const ExcessSqueezing quarter = asymptotic_excess_squeezing(p, vc, kPi / 2);
  CHECK(std::isinf(quarter.pp));
  CHECK(quarter.qp == u);
  const ExcessSqueezing periodic = asymptotic_excess_squeezing(p, vc, kPi / 4 + kPi);
  CHECK_THAT(periodic.pp, WithinRel(plus.pp, 1e-12));

  p.model = DissipationModel::Rwa;
  CHECK_THROWS_AS(asymptotic_excess_squeezing(p, vc, 0.3), std::invalid_argument);
}

TEST_CASE("asymptotic gain formula") {
  PhysicalParams p = moderate(DissipationModel::Rwa);
  p.q_m = 1e15;
  const MatrixXd k = asymptotic_gain_rwa(p, 1e8);
  CHECK_THAT(k(0, 0), WithinRel(-1e4, 1e-12));
  CHECK_THAT(k(0, 1), WithinRel(0.5e4, 1e-12));
  CHECK(k(0, 3) == 0.0);
  CHECK(k.row(1).isZero(0));
}

TEST_CASE("numeric excess noise approaches the closed forms") {
  for (auto model : {DissipationModel::Rwa, DissipationModel::NonRwa}) {
    for (double q_m : {1.0, 10.0, 1e3}) {
      const PhysicalParams p = moderate(model, q_m);
      std::array<double, 3> qq{}, pp{};
      MatrixXd vc;
      for (int i = 0; i < 3; ++i) {
        const LqgSolution s = synthesize(p, CostSpec::cooling(kLimitRatios[i]));
        qq[i] = s.v_excess(0, 0);
        pp[i] = s.v_excess(1, 1);
        vc = s.v_conditional;
      }
      const ExcessCooling e = asymptotic_excess_cooling(p, vc);
      CHECK_THAT(extrapolate_quarter_power(kLimitRatios, qq).limit, WithinRel(e.qq, 1e-3));
      CHECK_THAT(extrapolate_quarter_power(kLimitRatios, pp).limit, WithinRel(e.pp, 1e-3));
    }
  }
}

TEST_CASE("extrapolation is exact for the model form") {
  const std::array<double, 3> r{1e10, 1e11, 1e12};
  std::array<double, 3> v{};
  for (int i = 0; i < 3; ++i) v[i] = 3.0 + 2.0 * std::pow(r[i], -0.25) - 5.0 * std::pow(r[i], -0.5);
  CHECK_THAT(extrapolate_quarter_power(r, v).limit, WithinRel(3.0, 1e-10));
}
