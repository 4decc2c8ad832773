#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "optomech/model.hpp"

namespace optomech {

/// Philox4x64-10 counter-based generator (Salmon et al. 2011). The key is
/// (seed, stream); successive 256-bit blocks come from incrementing the counter.
class Philox4x64 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  Philox4x64(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

  static Block generate(Block counter, Key key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (index_ == 4) {
      buffer_ = generate({block_++, 0, 0, 0}, key_);
      index_ = 0;
    }
    return buffer_[index_++];
  }

 private:
  Key key_;
  Block buffer_{};
  std::uint64_t block_ = 0;
  int index_ = 4;
};

class StepSizeUnstable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientSamples : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrajectoryConfig {
  double dt = 1e-9;      ///< s
  long steps = 1000;     ///< integration steps after burn-in
  long burn_in = 0;      ///< steps discarded before recording
  long ensemble = 1;
  std::uint64_t seed = 0;
  bool feedback_enabled = true;
  bool noise_enabled = true;
  long decimation = 1;   ///< record every n-th step
  Eigen::VectorXd initial_mean;  ///< empty means zero
};

/// Largest dt * |eigenvalue| accepted by the explicit scheme.
inline constexpr double kMaxStepRate = 0.05;

/// One recorded sample every `decimation` steps. `charge_increments[j]` is the
/// detected charge accumulated over the window ending at `times[j]`.
struct TrajectoryRecord {
  double dt = 0.0;       ///< integration step, s
  long decimation = 1;
  std::vector<double> times;
  Eigen::MatrixXd means;     ///< states x samples
  Eigen::MatrixXd controls;  ///< inputs x samples
  std::vector<double> charge_increments;
};

/// Homodyne charge increment sqrt(2 eta kappa)(<X> cos(theta) + <Y> sin(theta)) dt + dW.
double photocurrent_increment(const Eigen::VectorXd& mean, const PhysicalParams& params,
                              double dt, double dw);

/// Euler-Maruyama integration of the conditional mean with the innovation
/// gain frozen at V^c C^T + Gamma^T. `stream` selects the RNG stream.
TrajectoryRecord simulate_conditional_mean(const ModelMatrices& m, const Eigen::MatrixXd& v_c,
                                           const Eigen::MatrixXd& k,
                                           const TrajectoryConfig& cfg,
                                           std::uint64_t stream = 0);

/// Runs cfg.ensemble trajectories (streams 0 .. ensemble-1) in parallel.
std::vector<TrajectoryRecord> simulate_ensemble(const ModelMatrices& m, const Eigen::MatrixXd& v_c,
                                                const Eigen::MatrixXd& k,
                                                const TrajectoryConfig& cfg);

/// Per-trajectory sums of the recorded means.
struct TrajectoryMoments {
  long samples = 0;
  Eigen::MatrixXd sum_outer;
  Eigen::VectorXd sum;
  double sum_charge = 0.0;
  double sum_window = 0.0;  ///< total recorded time, s
};

struct EnsembleEstimate {
  Eigen::MatrixXd second_moment;   ///< E[<X>_c <X>_c^T]
  Eigen::MatrixXd standard_error;  ///< jackknife, per entry
  Eigen::VectorXd mean;
  double mean_current = 0.0;         ///< average dq/dt
  double mean_current_error = 0.0;
  long trajectories = 0;
  long samples = 0;
};

inline constexpr long kMinTrajectories = 100;

EnsembleEstimate ensemble_excess_covariance(const std::vector<TrajectoryRecord>& records);

/// Delete-one-trajectory jackknife over accumulated moments.
EnsembleEstimate jackknife_moments(const std::vector<TrajectoryMoments>& moments);

/// Streams trajectories without storing records and returns the jackknife
/// estimate. Requires burn-in of at least five closed-loop relaxation times.
EnsembleEstimate simulate_excess_covariance(const ModelMatrices& m, const Eigen::MatrixXd& v_c,
                                            const Eigen::MatrixXd& k,
                                            const TrajectoryConfig& cfg);

/// Largest |eigenvalue| (rad/s) of A and, when feedback is on, of A - BK.
double trajectory_stiffness(const ModelMatrices& m, const Eigen::MatrixXd& k, bool feedback);

/// Slowest decay time 1/min|Re(lambda)| (s) of the simulated drift.
double relaxation_time(const ModelMatrices& m, const Eigen::MatrixXd& k, bool feedback);

/// Little-endian dump: "OMTR", u32 version, u64 samples, u32 states, u32
/// inputs, f64 dt, i64 decimation, then f64 arrays times[samples],
/// means[samples][states], controls[samples][inputs], charge[samples].
void write_record(std::ostream& out, const TrajectoryRecord& record);
TrajectoryRecord read_record(std::istream& in);

}  // namespace optomech
