#include "geosub/experiments.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

#include "geosub/errors.hpp"

namespace geosub {

void TransportConfig::validate() const {
  if (!(pulse_width > 0.0)) throw InvalidInput("transport: pulse width must be > 0");
  if (grid_points < 2) throw InvalidInput("transport: need at least 2 grid points");
  if (snapshot_count < 4 || snapshot_count % 2 != 0) {
    throw InvalidInput("transport: snapshot count must be even and >= 4");
  }
  if (!(time_scale > 0.0)) throw InvalidInput("transport: time scale must be > 0");
  if (!std::isfinite(wave_speed) || !std::isfinite(pulse_center)) {
    throw InvalidInput("transport: non-finite parameters");
  }
}

double gaussian_pulse(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z) / (width * std::sqrt(2.0 * std::numbers::pi));
}

SnapshotSet gen_transport(const TransportConfig& config) {
  config.validate();
  const Eigen::Index n = config.grid_points;
  const Eigen::Index k = config.snapshot_count;
  SnapshotSet out;
  out.Q.resize(n, k);
  out.times.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const double t = config.time_scale * static_cast<double>(j) / static_cast<double>(k);
    out.times[static_cast<std::size_t>(j)] = t;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(n - 1);
      out.Q(i, j) = gaussian_pulse(x - config.wave_speed * t, config.pulse_center,
                                   config.pulse_width);
    }
  }
  out.q_ref = Vector::Zero(n);
  return out;
}

SnapshotSet gen_parabola() {
  constexpr Eigen::Index k = 25;
  SnapshotSet out;
  out.Q.resize(2, k);
  out.times.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double t = j == k - 1 ? 0.75 : -1.25 + 2.0 * static_cast<double>(j) / (k - 1);
    out.times[static_cast<std::size_t>(j)] = t;
    out.Q(0, j) = t;
    out.Q(1, j) = 0.5 * t * t;
  }
  out.q_ref = Vector::Zero(2);
  return out;
}

void SyntheticWakeConfig::validate() const {
  if (nx < 2 || ny < 2) throw InvalidInput("synthetic wake: grid must be at least 2x2");
  if (snapshot_count < 4 || snapshot_count % 2 != 0) {
    throw InvalidInput("synthetic wake: snapshot count must be even and >= 4");
  }
  if (blobs < 1) throw InvalidInput("synthetic wake: need at least one blob");
}

SnapshotSet gen_synthetic_wake(const SyntheticWakeConfig& config) {
  config.validate();
  struct Blob {
    double x0, y0, u, v, width, amplitude;
  };
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Blob> blobs;
  for (int b = 0; b < config.blobs; ++b) {
    Blob blob;
    blob.x0 = 0.05 + 0.25 * unit(rng);
    blob.y0 = 0.2 + 0.6 * unit(rng);
    blob.u = 0.4 + 0.4 * unit(rng);
    blob.v = 0.2 * (unit(rng) - 0.5);
    blob.width = 0.015 + 0.02 * unit(rng);
    blob.amplitude = (b % 2 == 0 ? 1.0 : -1.0) * (0.5 + unit(rng));
    blobs.push_back(blob);
  }
  const double wave_number = 6.0 + 4.0 * unit(rng);
  const double wave_speed = 0.5 + 0.3 * unit(rng);

  const Eigen::Index n = config.nx * config.ny;
  const Eigen::Index k = config.snapshot_count;
  SnapshotSet out;
  out.Q.resize(n, k);
  out.times.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(k);
    out.times[static_cast<std::size_t>(j)] = t;
    for (Eigen::Index iy = 0; iy < config.ny; ++iy) {
      const double y = static_cast<double>(iy) / static_cast<double>(config.ny - 1);
      const double envelope = std::exp(-std::pow((y - 0.5) / 0.15, 2));
      for (Eigen::Index ix = 0; ix < config.nx; ++ix) {
        const double x = static_cast<double>(ix) / static_cast<double>(config.nx - 1);
        double value = 0.3 * envelope *
                       std::sin(2.0 * std::numbers::pi * wave_number * (x - wave_speed * t));
        for (const Blob& blob : blobs) {
          const double dx = x - blob.x0 - blob.u * t;
          const double dy = y - blob.y0 - blob.v * t;
          value += blob.amplitude *
                   std::exp(-(dx * dx + dy * dy) / (2.0 * blob.width * blob.width));
        }
        out.Q(ix + iy * config.nx, j) = value;
      }
    }
  }
  out.q_ref = Vector::Zero(n);
  return out;
}

std::pair<SnapshotSet, SnapshotSet> split_train_test(const SnapshotSet& snapshots) {
  snapshots.validate();
  const Eigen::Index k = snapshots.count();
  if (k % 2 != 0) {
    throw InvalidInput("split_train_test: snapshot count " + std::to_string(k) + " is odd");
  }
  SnapshotSet train, test;
  train.Q.resize(snapshots.state_dim(), k / 2);
  test.Q.resize(snapshots.state_dim(), k / 2);
  for (Eigen::Index j = 0; j < k / 2; ++j) {
    train.Q.col(j) = snapshots.Q.col(2 * j);
    test.Q.col(j) = snapshots.Q.col(2 * j + 1);
    train.times.push_back(snapshots.times[static_cast<std::size_t>(2 * j)]);
    test.times.push_back(snapshots.times[static_cast<std::size_t>(2 * j + 1)]);
  }
  train.q_ref = snapshots.q_ref;
  test.q_ref = snapshots.q_ref;
  return {std::move(train), std::move(test)};
}

std::uint64_t rank_seed(std::uint64_t base, Eigen::Index r) {
  return derive_seed(base, 0x5EEDULL * 0x10000ULL + static_cast<std::uint64_t>(r));
}

SweepRow evaluate_fit(const FeatureModel& feature, const SnapshotSet& test, Eigen::Index r,
                      const FitResult& fit) {
  if (2 * r > feature.features()) {
    throw InvalidInput("evaluate_fit: 2r = " + std::to_string(2 * r) + " exceeds n_f = " +
                       std::to_string(feature.features()));
  }
  SnapshotSet centered_test = test;
  centered_test.q_ref = feature.q_ref;

  SweepRow row;
  row.r = r;
  row.pod_error_r = pod_projection_error(feature.basis.leftCols(r), centered_test);
  row.pod_error_2r = pod_projection_error(feature.basis.leftCols(2 * r), centered_test);

  const Matrix y_test = feature.project(test.Q);
  const std::vector<double> tau_test = feature.normalize(test.times);
  const FeatureObjective held_out(y_test, tau_test);
  double sum = 0.0;
  for (const auto& params : fit.restart_params) sum += held_out.relative_error(params);
  row.dynamic_error_mean = sum / static_cast<double>(fit.restart_params.size());
  row.dynamic_error_best = held_out.relative_error(fit.params);
  row.mean_iterations = fit.report.mean_iterations;
  return row;
}

std::vector<SweepRow> rank_sweep(const SnapshotSet& train, const SnapshotSet& test,
                                 const std::vector<Eigen::Index>& ranks, Eigen::Index n_features,
                                 const SolverConfig& config,
                                 const FeatureOptions& feature_options,
                                 const SweepRowCallback& on_row) {
  config.validate();
  if (ranks.empty()) throw InvalidInput("rank_sweep: no ranks given");
  for (Eigen::Index r : ranks) {
    if (r < 1 || 2 * r > n_features) {
      throw InvalidInput("rank_sweep: rank " + std::to_string(r) +
                         " violates 1 <= r and 2r <= n_f = " + std::to_string(n_features));
    }
  }
  test.validate();
  if (test.state_dim() != train.state_dim()) {
    throw InvalidInput("rank_sweep: train and test state dimensions differ");
  }

  const FeatureModel feature = build_feature_model(train, n_features, feature_options);
  std::vector<SweepRow> rows;
  for (Eigen::Index r : ranks) {
    SolverConfig row_config = config;
    row_config.rng_seed = rank_seed(config.rng_seed, r);
    const FitResult fit = solve(feature, r, row_config);
    rows.push_back(evaluate_fit(feature, test, r, fit));
    if (on_row) on_row(rows.back(), fit);
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << '\n';
  out << std::setprecision(17);
  for (const auto& row : rows) {
    out << row.r << ',' << row.pod_error_r << ',' << row.pod_error_2r << ','
        << row.dynamic_error_mean << ',' << row.dynamic_error_best << ','
        << row.mean_iterations << '\n';
  }
}

}  // namespace geosub
