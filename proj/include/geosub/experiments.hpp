#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "geosub/feature_space.hpp"
#include "geosub/riemannian_opt.hpp"

namespace geosub {

/// Linear advection s(x, t) = s0(x - c t) of a Gaussian pulse on x in [0, 1].
struct TransportConfig {
  double wave_speed = 10.0;     // c
  double pulse_center = 0.1;    // mu
  double pulse_width = 0.01;    // sigma
  Eigen::Index grid_points = 1024;
  Eigen::Index snapshot_count = 500;
  // t_j = time_scale * (j - 1) / snapshot_count, j = 1..K.
  double time_scale = 0.2;

  void validate() const;
};

/// Snapshots of the analytic transport solution; q_ref = 0.
SnapshotSet gen_transport(const TransportConfig& config = {});

/// Gaussian initial condition s0 evaluated at x.
double gaussian_pulse(double x, double center, double width);

/// q(t) = [t, t^2 / 2] at 25 uniform times on [-1.25, 0.75]; q_ref = 0.
SnapshotSet gen_parabola();

/// Several Gaussian blobs advected across a 2D grid plus a travelling
/// wave train, flattened to N = nx * ny. Stand-in for large wake datasets.
struct SyntheticWakeConfig {
  Eigen::Index nx = 250;
  Eigen::Index ny = 200;
  Eigen::Index snapshot_count = 400;
  int blobs = 32;
  std::uint64_t seed = 2024;

  void validate() const;
};

SnapshotSet gen_synthetic_wake(const SyntheticWakeConfig& config = {});

/// Odd-numbered snapshots (1-based) train, even-numbered test. Both keep q_ref.
/// Throws InvalidInput for odd K.
std::pair<SnapshotSet, SnapshotSet> split_train_test(const SnapshotSet& snapshots);

struct SweepRow {
  Eigen::Index r = 0;
  double pod_error_r = 0.0;
  double pod_error_2r = 0.0;
  double dynamic_error_mean = 0.0;  // over restarts
  double dynamic_error_best = 0.0;  // restart with the lowest training objective
  double mean_iterations = 0.0;
};

/// Solver seed used for rank r when the experiment seed is `base`.
std::uint64_t rank_seed(std::uint64_t base, Eigen::Index r);

/// Test-set errors of one fitted model: dynamic error of every restart plus
/// the POD errors at ranks r and 2r.
SweepRow evaluate_fit(const FeatureModel& feature, const SnapshotSet& test, Eigen::Index r,
                      const FitResult& fit);

using SweepRowCallback = std::function<void(const SweepRow&, const FitResult&)>;

/// POD vs. dynamic test errors for each rank. The feature model is built once
/// from `train`; each rank is solved with seed rank_seed(config.rng_seed, r).
std::vector<SweepRow> rank_sweep(const SnapshotSet& train, const SnapshotSet& test,
                                 const std::vector<Eigen::Index>& ranks, Eigen::Index n_features,
                                 const SolverConfig& config,
                                 const FeatureOptions& feature_options = {},
                                 const SweepRowCallback& on_row = {});

inline constexpr const char* kSweepCsvHeader = "r,pod_r,pod_2r,dyn_mean,dyn_best,iters_mean";

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace geosub
