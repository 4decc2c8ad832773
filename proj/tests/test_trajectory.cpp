#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "optomech/control.hpp"
#include "optomech/trajectory.hpp"
#include "support.hpp"

using namespace optomech;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Fast, strongly damped system. Euler-Maruyama over-estimates the stationary
// variance of an oscillator by about Omega^2 dt / gamma, so Q must stay low.
PhysicalParams fast_params() {
  PhysicalParams p;
  p.omega_m = 1e6;
  p.q_m = 1;
  p.kappa = 2e6;
  p.g = 2e5;
  p.eta = 0.8;
  p.theta = 1.2;
  p.temperature = 1e-3;
  p.model = DissipationModel::NonRwa;
  return p;
}

TrajectoryConfig base_config(const LqgSolution& s, double rate_fraction, bool feedback) {
  TrajectoryConfig cfg;
  cfg.dt = rate_fraction / trajectory_stiffness(s.matrices, s.k, feedback);
  cfg.feedback_enabled = feedback;
  const double tau = relaxation_time(s.matrices, s.k, feedback);
  cfg.burn_in = static_cast<long>(std::ceil(6 * tau / cfg.dt));
  cfg.steps = static_cast<long>(std::ceil(60 * tau / cfg.dt));
  return cfg;
}

MatrixXd innovation_noise(const LqgSolution& s) {
  const MatrixXd gain = s.v_conditional * s.matrices.c.transpose() + s.matrices.gamma_row.transpose();
  return gain * gain.transpose();
}

MatrixXd drift(const LqgSolution& s, bool feedback) {
  return feedback ? MatrixXd(s.matrices.a - s.matrices.b * s.k) : s.matrices.a;
}

// Stationary covariance of the Euler-Maruyama recursion x' = (I + dt N) x + g dW,
// i.e. M = F M F^T + dt g g^T.
MatrixXd euler_stationary(const MatrixXd& n, const MatrixXd& noise, double dt) {
  const Eigen::Index d = n.rows();
  const MatrixXd f = MatrixXd::Identity(d, d) + dt * n;
  MatrixXd kron(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) kron.block(i * d, j * d, d, d) = f(i, j) * f;
  const VectorXd rhs = Eigen::Map<const VectorXd>(MatrixXd(dt * noise).data(), d * d);
  const VectorXd m = (MatrixXd::Identity(d * d, d * d) - kron).fullPivLu().solve(rhs);
  return Eigen::Map<const MatrixXd>(m.data(), d, d);
}

}  // namespace

TEST_CASE("philox known answers") {
  const std::uint64_t ff = ~0ULL;
  CHECK(Philox4x64::generate({0, 0, 0, 0}, {0, 0}) ==
        Philox4x64::Block{0x16554d9eca36314cULL, 0xdb20fe9d672d0fdcULL, 0xd7e772cee186176bULL,
                          0x7e68b68aec7ba23bULL});
  CHECK(Philox4x64::generate({0, 0, 0, 0}, {ff, ff}) ==
        Philox4x64::Block{0x44b7493d1acfc229ULL, 0x6636af8e997921ddULL, 0x3f73e132b5b3780eULL,
                          0x605644dde03b01b1ULL});
  // Engine output is the concatenation of blocks 0, 1, ...
  Philox4x64 engine(123, 7);
  const std::uint64_t expected[8] = {0xd98b2dc3440d1baeULL, 0xd717d019c063a3fbULL,
                                     0xeb100ec4ea324c1aULL, 0xc914b4826b629c8cULL,
                                     0x1a9e860091be87b3ULL, 0xfce44826d0b0e471ULL,
                                     0xfe35216afaa5ee73ULL, 0x94253a85000b3d26ULL};
  for (std::uint64_t e : expected) CHECK(engine() == e);
}

TEST_CASE("trajectories are reproducible per seed and stream") {
  const LqgSolution s = synthesize(fast_params(), CostSpec::cooling(1e4));
  TrajectoryConfig cfg = base_config(s, 0.01, true);
  cfg.burn_in = 100;
  cfg.steps = 2000;
  cfg.decimation = 7;
  cfg.seed = 42;
  const TrajectoryRecord a = simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg, 3);
  const TrajectoryRecord b = simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg, 3);
  const TrajectoryRecord c = simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg, 4);
  CHECK(a.times.size() == 2000 / 7);
  CHECK(a.means == b.means);
  CHECK(a.charge_increments == b.charge_increments);
  CHECK(a.means != c.means);
  CHECK_THAT(a.times.front(), WithinRel((100 + 7) * cfg.dt, 1e-12));
  CHECK((a.controls + s.k * a.means).norm() <= 1e-12 * (s.k * a.means).norm());

  cfg.ensemble = 3;
  const auto ensemble = simulate_ensemble(s.matrices, s.v_conditional, s.k, cfg);
  CHECK(ensemble[2].means == simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg, 2).means);
}

TEST_CASE("noise-free mean follows the deterministic flow") {
  const LqgSolution s = synthesize(fast_params(), CostSpec::cooling(1e4));
  VectorXd x0(4);
  x0 << 3.0, -1.0, 0.5, 0.2;
  auto error_at = [&](double fraction, bool feedback) {
    TrajectoryConfig cfg;
    cfg.dt = fraction / trajectory_stiffness(s.matrices, s.k, feedback);
    cfg.noise_enabled = false;
    cfg.feedback_enabled = feedback;
    cfg.initial_mean = x0;
    const double horizon = 3 * relaxation_time(s.matrices, s.k, feedback);
    cfg.steps = static_cast<long>(std::round(horizon / cfg.dt));
    cfg.decimation = cfg.steps;
    const TrajectoryRecord r = simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg);
    const MatrixXd n = drift(s, feedback);
    const VectorXd exact = (n * r.times.back()).exp() * x0;
    return (r.means.col(0) - exact).norm() / exact.norm();
  };
  for (bool feedback : {false, true}) {
    const double e1 = error_at(0.02, feedback);
    const double e2 = error_at(0.01, feedback);
    const double e3 = error_at(0.005, feedback);
    CHECK_THAT(e1 / e2, WithinAbs(2.0, 0.15));
    CHECK_THAT(e2 / e3, WithinAbs(2.0, 0.15));
  }
}

TEST_CASE("step size guard") {
  const LqgSolution s = synthesize(fast_params(), CostSpec::cooling(1e4));
  TrajectoryConfig cfg;
  cfg.steps = 10;
  cfg.dt = 0.06 / trajectory_stiffness(s.matrices, s.k, true);
  CHECK_THROWS_AS(simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg), StepSizeUnstable);
  cfg.dt = 0.04 / trajectory_stiffness(s.matrices, s.k, true);
  CHECK_NOTHROW(simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg));
  cfg.dt = -1;
  CHECK_THROWS_AS(simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg),
                  std::invalid_argument);
}

TEST_CASE("jackknife bookkeeping") {
  TrajectoryMoments one;
  one.samples = 10;
  one.sum_outer = MatrixXd::Identity(2, 2) * 20.0;
  one.sum = VectorXd::Constant(2, 1.0);
  one.sum_charge = 0.5;
  one.sum_window = 1.0;
  CHECK_THROWS_AS(jackknife_moments(std::vector<TrajectoryMoments>(99, one)), InsufficientSamples);

  const EnsembleEstimate same = jackknife_moments(std::vector<TrajectoryMoments>(100, one));
  CHECK(same.trajectories == 100);
  CHECK(same.samples == 1000);
  CHECK(same.second_moment.isApprox(2.0 * MatrixXd::Identity(2, 2)));
  CHECK(same.standard_error.norm() <= 1e-14);
  CHECK_THAT(same.mean_current, WithinRel(0.5, 1e-14));
  CHECK(same.mean_current_error <= 1e-14);

  // Standard error of the mean for independent equal-size blocks.
  std::vector<TrajectoryMoments> mixed(200, one);
  for (std::size_t i = 0; i < mixed.size(); i += 2) mixed[i].sum_outer *= 2.0;
  const EnsembleEstimate e = jackknife_moments(mixed);
  CHECK_THAT(e.second_moment(0, 0), WithinRel(3.0, 1e-14));
  CHECK_THAT(e.standard_error(0, 0), WithinRel(1.0 / std::sqrt(199.0), 1e-10));
  CHECK(e.standard_error(0, 1) == 0.0);
}

TEST_CASE("record dump round trip") {
  const LqgSolution s = synthesize(fast_params(), CostSpec::cooling(1e4));
  TrajectoryConfig cfg = base_config(s, 0.01, true);
  cfg.steps = 500;
  cfg.decimation = 3;
  const TrajectoryRecord r = simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg, 9);
  std::stringstream buffer;
  write_record(buffer, r);
  CHECK(buffer.str().size() == 4 + 4 + 8 + 4 + 4 + 8 + 8 + r.times.size() * (1 + 4 + 2 + 1) * 8);
  const TrajectoryRecord back = read_record(buffer);
  CHECK(back.dt == r.dt);
  CHECK(back.decimation == 3);
  CHECK(back.times == r.times);
  CHECK(back.means == r.means);
  CHECK(back.controls == r.controls);
  CHECK(back.charge_increments == r.charge_increments);

  std::stringstream bad("OMTX");
  CHECK_THROWS(read_record(bad));
  std::stringstream truncated(buffer.str().substr(0, 40));
  CHECK_THROWS(read_record(truncated));
}

TEST_CASE("ensemble second moment matches the stationary Lyapunov solution") {
  const LqgSolution s = synthesize(fast_params(), CostSpec::cooling(1e4));
  for (bool feedback : {false, true}) {
    TrajectoryConfig cfg = base_config(s, 0.01, feedback);
    cfg.ensemble = 200;
    cfg.decimation = 10;
    cfg.seed = 2024;
    const EnsembleEstimate est = simulate_excess_covariance(s.matrices, s.v_conditional, s.k, cfg);
    const MatrixXd reference = solve_lyapunov(drift(s, feedback), innovation_noise(s));
    if (feedback) CHECK(testing::relative_frobenius(reference, s.v_excess) <= 1e-8);
    for (int i = 0; i < 2; ++i) {
      INFO("feedback " << feedback << " entry " << i);
      const double diff = std::abs(est.second_moment(i, i) - reference(i, i));
      CHECK(diff <= 0.05 * reference(i, i));
      CHECK(diff <= 4 * est.standard_error(i, i) + 0.02 * reference(i, i));
    }
    CHECK(std::abs(est.mean_current) <= 4 * est.mean_current_error);
  }
}

TEST_CASE("halving dt moves the stationary covariance by less than the Monte Carlo error") {
  const LqgSolution s = synthesize(fast_params(), CostSpec::cooling(1e4));
  const MatrixXd n = drift(s, true);
  const MatrixXd noise = innovation_noise(s);
  TrajectoryConfig coarse = base_config(s, 0.01, true);
  coarse.ensemble = 200;
  coarse.decimation = 10;
  TrajectoryConfig fine = coarse;
  fine.dt /= 2;
  fine.burn_in *= 2;
  fine.steps *= 2;
  fine.decimation *= 2;
  const EnsembleEstimate a = simulate_excess_covariance(s.matrices, s.v_conditional, s.k, coarse);
  const EnsembleEstimate b = simulate_excess_covariance(s.matrices, s.v_conditional, s.k, fine);
  const MatrixXd shift = euler_stationary(n, noise, coarse.dt) - euler_stationary(n, noise, fine.dt);
  for (int i = 0; i < 2; ++i) {
    INFO("entry " << i);
    CHECK(std::abs(shift(i, i)) < a.standard_error(i, i));
    CHECK(std::abs(a.second_moment(i, i) - b.second_moment(i, i)) <=
          3 * std::hypot(a.standard_error(i, i), b.standard_error(i, i)));
  }
}

TEST_CASE("innovations are white with unit intensity") {
  const LqgSolution s = synthesize(fast_params(), CostSpec::cooling(1e4));
  TrajectoryConfig cfg = base_config(s, 0.01, true);
  cfg.steps = 200000;
  const TrajectoryRecord r = simulate_conditional_mean(s.matrices, s.v_conditional, s.k, cfg, 1);
  const long n = static_cast<long>(r.charge_increments.size());
  std::vector<double> w(n - 1);
  for (long j = 1; j < n; ++j) {
    const double predicted = (s.matrices.c * r.means.col(j - 1))(0) * cfg.dt;
    w[j - 1] = (r.charge_increments[j] - predicted) / std::sqrt(cfg.dt);
  }
  double var = 0.0;
  for (double x : w) var += x * x;
  var /= static_cast<double>(w.size());
  CHECK_THAT(var, WithinAbs(1.0, 4 * std::sqrt(2.0 / w.size())));
  for (int lag = 1; lag <= 5; ++lag) {
    double acc = 0.0;
    for (std::size_t j = lag; j < w.size(); ++j) acc += w[j] * w[j - lag];
    acc /= static_cast<double>(w.size() - lag);
    INFO("lag " << lag);
    CHECK(std::abs(acc) <= 4.5 / std::sqrt(static_cast<double>(w.size())));
  }
}

TEST_CASE("burn-in and ensemble preconditions") {
  const LqgSolution s = synthesize(fast_params(), CostSpec::cooling(1e4));
  TrajectoryConfig cfg = base_config(s, 0.01, true);
  cfg.steps = 10;
  cfg.ensemble = 100;
  cfg.burn_in = 1;
  CHECK_THROWS_AS(simulate_excess_covariance(s.matrices, s.v_conditional, s.k, cfg),
                  std::invalid_argument);
  cfg = base_config(s, 0.01, true);
  cfg.steps = 10;
  cfg.ensemble = 50;
  CHECK_THROWS_AS(simulate_excess_covariance(s.matrices, s.v_conditional, s.k, cfg),
                  InsufficientSamples);
}

TEST_CASE("photocurrent increment") {
  PhysicalParams p = fast_params();
  VectorXd x(4);
  x << 1, 2, 3, 4;
  const double expected = std::sqrt(2 * p.eta * p.kappa) * (3 * std::cos(p.theta) + 4 * std::sin(p.theta)) * 1e-9 + 0.25;
  CHECK_THAT(photocurrent_increment(x, p, 1e-9, 0.25), WithinRel(expected, 1e-14));
}
