#include "optomech/trajectory.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include <tbb/parallel_for.h>

#include "optomech/solvers.hpp"

namespace optomech {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kPhiloxW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kPhiloxW1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const unsigned __int128 product = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(product >> 64);
  lo = static_cast<std::uint64_t>(product);
}

void check_step(const ModelMatrices& m, const MatrixXd& k, const TrajectoryConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (cfg.steps < 1 || cfg.burn_in < 0 || cfg.decimation < 1 || cfg.ensemble < 1)
    throw std::invalid_argument("invalid trajectory counts");
  const double rate = trajectory_stiffness(m, k, cfg.feedback_enabled);
  if (!(cfg.dt * rate < kMaxStepRate)) {
    throw StepSizeUnstable("dt * max|eig| = " + std::to_string(cfg.dt * rate) +
                           " exceeds " + std::to_string(kMaxStepRate));
  }
}

void check_burn_in(const ModelMatrices& m, const MatrixXd& k, const TrajectoryConfig& cfg) {
  const double tau = relaxation_time(m, k, cfg.feedback_enabled);
  if (!(cfg.burn_in * cfg.dt >= 5.0 * tau)) {
    throw std::invalid_argument("burn-in of " + std::to_string(cfg.burn_in * cfg.dt) +
                                " s is shorter than five relaxation times (" +
                                std::to_string(5.0 * tau) + " s)");
  }
}

MatrixXd drift(const ModelMatrices& m, const MatrixXd& k, bool feedback) {
  return feedback ? MatrixXd(m.a - m.b * k) : m.a;
}

// Integrates one trajectory and hands every recorded sample to `sink`.
template <int S, typename Sink>
void integrate(const ModelMatrices& m, const MatrixXd& v_c, const MatrixXd& k,
               const TrajectoryConfig& cfg, std::uint64_t stream, Sink&& sink) {
  using Mat = Eigen::Matrix<double, S, S>;
  using Vec = Eigen::Matrix<double, S, 1>;
  using Row = Eigen::Matrix<double, 1, S>;
  const Eigen::Index n = m.states();

  const Mat step_matrix = Mat::Identity(n, n) + cfg.dt * drift(m, k, cfg.feedback_enabled);
  const Vec gain = (v_c * m.c.transpose() + m.gamma_row.transpose());
  const Row c_dt = m.c * cfg.dt;
  const double sqrt_dt = std::sqrt(cfg.dt);

  Vec x = cfg.initial_mean.size() ? Vec(cfg.initial_mean) : Vec(Vec::Zero(n));
  if (x.size() != n) throw std::invalid_argument("initial mean has the wrong size");

  Philox4x64 engine(cfg.seed, stream);
  std::normal_distribution<double> normal(0.0, 1.0);

  double charge = 0.0;
  const long total = cfg.burn_in + cfg.steps;
  for (long step = 0; step < total; ++step) {
    const double dw = cfg.noise_enabled ? sqrt_dt * normal(engine) : 0.0;
    charge += c_dt.dot(x) + dw;
    x = step_matrix * x + gain * dw;
    const long recorded = step + 1 - cfg.burn_in;
    if (recorded <= 0) {
      charge = 0.0;
      continue;
    }
    if (recorded % cfg.decimation == 0) {
      sink(static_cast<double>(step + 1) * cfg.dt, x, charge);
      charge = 0.0;
    }
  }
}

template <typename Sink>
void dispatch(const ModelMatrices& m, const MatrixXd& v_c, const MatrixXd& k,
              const TrajectoryConfig& cfg, std::uint64_t stream, Sink&& sink) {
  switch (m.states()) {
    case 4: integrate<4>(m, v_c, k, cfg, stream, sink); break;
    case 2: integrate<2>(m, v_c, k, cfg, stream, sink); break;
    default: integrate<Eigen::Dynamic>(m, v_c, k, cfg, stream, sink); break;
  }
}

TrajectoryMoments empty_moments(Eigen::Index n) {
  TrajectoryMoments out;
  out.sum_outer = MatrixXd::Zero(n, n);
  out.sum = VectorXd::Zero(n);
  return out;
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated trajectory record");
  return value;
}

}  // namespace

Philox4x64::Block Philox4x64::generate(Block counter, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, counter[0], hi0, lo0);
    mulhilo(kPhiloxM1, counter[2], hi1, lo1);
    counter = {hi1 ^ counter[1] ^ key[0], lo1, hi0 ^ counter[3] ^ key[1], lo0};
  }
  return counter;
}

double photocurrent_increment(const VectorXd& mean, const PhysicalParams& params, double dt,
                              double dw) {
  const double quadrature =
      mean(2) * std::cos(params.theta) + mean(3) * std::sin(params.theta);
  return std::sqrt(2.0 * params.eta * params.kappa) * quadrature * dt + dw;
}

double trajectory_stiffness(const ModelMatrices& m, const MatrixXd& k, bool feedback) {
  double rate = 0.0;
  for (const auto& z : closed_loop_spectrum(m.a)) rate = std::max(rate, std::abs(z));
  if (feedback)
    for (const auto& z : closed_loop_spectrum(m.a - m.b * k)) rate = std::max(rate, std::abs(z));
  return rate;
}

double relaxation_time(const ModelMatrices& m, const MatrixXd& k, bool feedback) {
  const auto spectrum = closed_loop_spectrum(drift(m, k, feedback));
  const double slowest = -spectrum.front().real();
  return slowest > 0.0 ? 1.0 / slowest : std::numeric_limits<double>::infinity();
}

TrajectoryRecord simulate_conditional_mean(const ModelMatrices& m, const MatrixXd& v_c,
                                           const MatrixXd& k, const TrajectoryConfig& cfg,
                                           std::uint64_t stream) {
  check_step(m, k, cfg);
  const long samples = cfg.steps / cfg.decimation;
  TrajectoryRecord out;
  out.dt = cfg.dt;
  out.decimation = cfg.decimation;
  out.times.reserve(samples);
  out.charge_increments.reserve(samples);
  out.means.resize(m.states(), samples);
  out.controls.resize(m.b.cols(), samples);
  long j = 0;
  dispatch(m, v_c, k, cfg, stream, [&](double t, const auto& x, double charge) {
    out.times.push_back(t);
    out.means.col(j) = x;
    out.controls.col(j) = cfg.feedback_enabled ? VectorXd(-k * x) : VectorXd::Zero(m.b.cols());
    out.charge_increments.push_back(charge);
    ++j;
  });
  return out;
}

std::vector<TrajectoryRecord> simulate_ensemble(const ModelMatrices& m, const MatrixXd& v_c,
                                                const MatrixXd& k, const TrajectoryConfig& cfg) {
  check_step(m, k, cfg);
  std::vector<TrajectoryRecord> records(cfg.ensemble);
  tbb::parallel_for(0L, cfg.ensemble, [&](long i) {
    records[i] = simulate_conditional_mean(m, v_c, k, cfg, static_cast<std::uint64_t>(i));
  });
  return records;
}

EnsembleEstimate jackknife_moments(const std::vector<TrajectoryMoments>& moments) {
  const long count = static_cast<long>(moments.size());
  if (count < kMinTrajectories) {
    throw InsufficientSamples("need at least " + std::to_string(kMinTrajectories) +
                              " trajectories, got " + std::to_string(count));
  }
  const Eigen::Index n = moments.front().sum.size();
  TrajectoryMoments total = empty_moments(n);
  for (const auto& mo : moments) {
    total.samples += mo.samples;
    total.sum_outer += mo.sum_outer;
    total.sum += mo.sum;
    total.sum_charge += mo.sum_charge;
    total.sum_window += mo.sum_window;
  }
  if (total.samples == 0 || !(total.sum_window > 0.0))
    throw InsufficientSamples("no recorded samples");

  EnsembleEstimate out;
  out.trajectories = count;
  out.samples = total.samples;
  out.second_moment = symmetrized(total.sum_outer / static_cast<double>(total.samples));
  out.mean = total.sum / static_cast<double>(total.samples);
  out.mean_current = total.sum_charge / total.sum_window;

  // Leave-one-out replicates.
  MatrixXd mean_rep = MatrixXd::Zero(n, n);
  double mean_current_rep = 0.0;
  std::vector<MatrixXd> reps(count);
  std::vector<double> current_reps(count);
  for (long i = 0; i < count; ++i) {
    const double rest = static_cast<double>(total.samples - moments[i].samples);
    reps[i] = (total.sum_outer - moments[i].sum_outer) / rest;
    current_reps[i] = (total.sum_charge - moments[i].sum_charge) /
                      (total.sum_window - moments[i].sum_window);
    mean_rep += reps[i];
    mean_current_rep += current_reps[i];
  }
  mean_rep /= static_cast<double>(count);
  mean_current_rep /= static_cast<double>(count);
  MatrixXd spread = MatrixXd::Zero(n, n);
  double current_spread = 0.0;
  for (long i = 0; i < count; ++i) {
    spread.array() += (reps[i] - mean_rep).array().square();
    current_spread += std::pow(current_reps[i] - mean_current_rep, 2);
  }
  const double factor = static_cast<double>(count - 1) / static_cast<double>(count);
  out.standard_error = symmetrized((factor * spread).cwiseSqrt());
  out.mean_current_error = std::sqrt(factor * current_spread);
  return out;
}

EnsembleEstimate ensemble_excess_covariance(const std::vector<TrajectoryRecord>& records) {
  std::vector<TrajectoryMoments> moments;
  moments.reserve(records.size());
  for (const auto& r : records) {
    TrajectoryMoments mo = empty_moments(r.means.rows());
    mo.samples = r.means.cols();
    mo.sum_outer = r.means * r.means.transpose();
    mo.sum = r.means.rowwise().sum();
    for (double q : r.charge_increments) mo.sum_charge += q;
    mo.sum_window = static_cast<double>(mo.samples * r.decimation) * r.dt;
    moments.push_back(std::move(mo));
  }
  if (moments.empty()) throw InsufficientSamples("no trajectories");
  return jackknife_moments(moments);
}

EnsembleEstimate simulate_excess_covariance(const ModelMatrices& m, const MatrixXd& v_c,
                                            const MatrixXd& k, const TrajectoryConfig& cfg) {
  check_step(m, k, cfg);
  check_burn_in(m, k, cfg);
  if (cfg.ensemble < kMinTrajectories)
    throw InsufficientSamples("ensemble smaller than " + std::to_string(kMinTrajectories));
  std::vector<TrajectoryMoments> moments(cfg.ensemble);
  tbb::parallel_for(0L, cfg.ensemble, [&](long i) {
    TrajectoryMoments mo = empty_moments(m.states());
    dispatch(m, v_c, k, cfg, static_cast<std::uint64_t>(i),
             [&](double, const auto& x, double charge) {
               ++mo.samples;
               mo.sum_outer.noalias() += x * x.transpose();
               mo.sum += x;
               mo.sum_charge += charge;
             });
    mo.sum_window = static_cast<double>(mo.samples * cfg.decimation) * cfg.dt;
    moments[i] = std::move(mo);
  });
  return jackknife_moments(moments);
}

void write_record(std::ostream& out, const TrajectoryRecord& record) {
  static_assert(std::endian::native == std::endian::little, "dump assumes a little-endian host");
  const auto samples = static_cast<std::uint64_t>(record.times.size());
  out.write("OMTR", 4);
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint64_t>(out, samples);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(record.means.rows()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(record.controls.rows()));
  write_pod<double>(out, record.dt);
  write_pod<std::int64_t>(out, record.decimation);
  out.write(reinterpret_cast<const char*>(record.times.data()), samples * sizeof(double));
  // Column-major states x samples is the same memory as row-major samples x states.
  out.write(reinterpret_cast<const char*>(record.means.data()),
            record.means.size() * sizeof(double));
  out.write(reinterpret_cast<const char*>(record.controls.data()),
            record.controls.size() * sizeof(double));
  out.write(reinterpret_cast<const char*>(record.charge_increments.data()),
            samples * sizeof(double));
}

TrajectoryRecord read_record(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "OMTR", 4) != 0)
    throw std::runtime_error("not a trajectory record");
  if (read_pod<std::uint32_t>(in) != 1) throw std::runtime_error("unsupported record version");
  const auto samples = read_pod<std::uint64_t>(in);
  const auto states = read_pod<std::uint32_t>(in);
  const auto inputs = read_pod<std::uint32_t>(in);
  TrajectoryRecord r;
  r.dt = read_pod<double>(in);
  r.decimation = read_pod<std::int64_t>(in);
  r.times.resize(samples);
  r.means.resize(states, static_cast<Eigen::Index>(samples));
  r.controls.resize(inputs, static_cast<Eigen::Index>(samples));
  r.charge_increments.resize(samples);
  in.read(reinterpret_cast<char*>(r.times.data()), samples * sizeof(double));
  in.read(reinterpret_cast<char*>(r.means.data()), r.means.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(r.controls.data()), r.controls.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(r.charge_increments.data()), samples * sizeof(double));
  if (!in) throw std::runtime_error("truncated trajectory record");
  return r;
}

}  // namespace optomech
