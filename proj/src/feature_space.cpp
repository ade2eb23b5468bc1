#include "geosub/feature_space.hpp"

#include <cmath>
#include <string>

#include "geosub/errors.hpp"

namespace geosub {

void SnapshotSet::validate() const {
  if (Q.cols() < 2) {
    throw InvalidInput("snapshot set needs at least 2 snapshots, got " +
                       std::to_string(Q.cols()));
  }
  if (Q.rows() < 1) throw InvalidInput("snapshot set has zero state dimension");
  if (static_cast<Eigen::Index>(times.size()) != Q.cols()) {
    throw InvalidInput("snapshot set: " + std::to_string(times.size()) +
                       " times for " + std::to_string(Q.cols()) + " snapshots");
  }
  if (q_ref.size() != Q.rows()) {
    throw InvalidInput("snapshot set: reference state has length " +
                       std::to_string(q_ref.size()) + ", expected " +
                       std::to_string(Q.rows()));
  }
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!std::isfinite(times[j])) throw InvalidInput("snapshot set: non-finite time");
    if (j > 0 && !(times[j] > times[j - 1])) {
      throw InvalidInput("snapshot set: times not strictly increasing at index " +
                         std::to_string(j));
    }
  }
  if (!Q.allFinite()) throw InvalidInput("snapshot set: Q contains NaN or Inf");
  if (!q_ref.allFinite()) throw InvalidInput("snapshot set: q_ref contains NaN or Inf");
}

Matrix SnapshotSet::centered() const { return Q.colwise() - q_ref; }

Vector reference_state(const Matrix& q, ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::kZero:
      return Vector::Zero(q.rows());
    case ReferenceKind::kMean:
      return q.rowwise().mean();
  }
  return Vector::Zero(q.rows());
}

TimeNormalization TimeNormalization::fit(std::span<const double> times) {
  if (times.size() < 2) throw InvalidInput("time normalization needs at least 2 times");
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (!(times[j] > times[j - 1])) {
      throw InvalidInput("time normalization: times not strictly increasing at index " +
                         std::to_string(j));
    }
  }
  return {times.front(), times.back()};
}

std::vector<double> TimeNormalization::apply(std::span<const double> times) const {
  std::vector<double> out(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) out[j] = (*this)(times[j]);
  return out;
}

std::vector<double> normalize_times(std::span<const double> times) {
  auto tau = TimeNormalization::fit(times).apply(times);
  // Pin the endpoints against rounding in (tf - t0) / (tf - t0).
  tau.front() = 0.0;
  tau.back() = 1.0;
  return tau;
}

Matrix FeatureModel::project(const Matrix& q) const {
  if (q.rows() != basis.rows()) {
    throw InvalidInput("project: snapshots have N = " + std::to_string(q.rows()) +
                       ", feature basis has N = " + std::to_string(basis.rows()));
  }
  return basis.transpose() * (q.colwise() - q_ref);
}

FeatureModel build_feature_model(const SnapshotSet& snapshots, Eigen::Index n_features,
                                 const FeatureOptions& options) {
  snapshots.validate();
  const Eigen::Index max_features = std::min(snapshots.state_dim(), snapshots.count());
  if (n_features < 1 || n_features > max_features) {
    throw InvalidInput("build_feature_model: n_f = " + std::to_string(n_features) +
                       " outside [1, min(N, K) = " + std::to_string(max_features) + "]");
  }

  const Matrix centered = snapshots.centered();
  ThinSvdResult svd = thin_svd(centered);

  const Vector& s = svd.singular_values;
  Eigen::Index rank = 0;
  if (s(0) > 0.0) {
    while (rank < s.size() && s(rank) >= options.rank_tolerance * s(0)) ++rank;
  }
  if (rank == 0) {
    throw NumericalError("build_feature_model: centered data has rank 0",
                         {{"usable_rank", 0}, {"requested_features", n_features}});
  }
  if (n_features > rank && options.rank_policy == RankPolicy::kStrict) {
    throw NumericalError(
        "build_feature_model: n_f = " + std::to_string(n_features) +
            " exceeds the numerical rank " + std::to_string(rank) + " of the centered data",
        {{"usable_rank", rank}, {"requested_features", n_features}});
  }

  FeatureModel model;
  model.basis = svd.U.leftCols(n_features);
  model.coords = model.basis.transpose() * centered;
  model.time_map = TimeNormalization::fit(snapshots.times);
  model.tau = normalize_times(snapshots.times);
  model.q_ref = snapshots.q_ref;
  model.pod_singular_values = s;
  model.numerical_rank = rank;
  return model;
}

double pod_projection_error(const Matrix& basis, const SnapshotSet& snapshots,
                            ErrorNorm norm) {
  snapshots.validate();
  if (basis.rows() != snapshots.state_dim()) {
    throw InvalidInput("pod_projection_error: basis has " + std::to_string(basis.rows()) +
                       " rows, snapshots have N = " +
                       std::to_string(snapshots.state_dim()));
  }
  if (orthonormality_defect(basis) > 1e-8) {
    throw InvalidInput("pod_projection_error: basis is not orthonormal");
  }
  const Matrix centered = snapshots.centered();
  const double total = centered.norm();
  if (total == 0.0) {
    throw NumericalError("pod_projection_error: centered data is zero; relative error undefined");
  }
  const Matrix residual = centered - basis * (basis.transpose() * centered);
  if (norm == ErrorNorm::kMeanSquared) {
    return residual.squaredNorm() / static_cast<double>(snapshots.count());
  }
  return residual.norm() / total;
}

Eigen::Index select_feature_count(const SnapshotSet& snapshots, double threshold) {
  snapshots.validate();
  if (!(threshold >= 0.0)) throw InvalidInput("select_feature_count: threshold must be >= 0");
  const Vector s = thin_svd(snapshots.centered()).singular_values;
  const double k = static_cast<double>(snapshots.count());
  // tail[n] = (1/K) sum_{i >= n} s_i^2, the mean-squared error of the rank-n basis.
  std::vector<double> tail(static_cast<std::size_t>(s.size()) + 1, 0.0);
  for (Eigen::Index i = s.size() - 1; i >= 0; --i) {
    tail[i] = tail[i + 1] + s(i) * s(i) / k;
  }
  for (Eigen::Index n = 1; n <= s.size(); ++n) {
    if (tail[n] <= threshold) return n;
  }
  return s.size();
}

}  // namespace geosub
