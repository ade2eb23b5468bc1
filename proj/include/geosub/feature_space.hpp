#pragma once

#include <span>
#include <vector>

#include "geosub/linear_kernels.hpp"

namespace geosub {

/// Raw snapshot data: column j of Q is the state at times[j].
struct SnapshotSet {
  Matrix Q;                   // N x K
  std::vector<double> times;  // K, strictly increasing
  Vector q_ref;               // N, the reference state

  Eigen::Index state_dim() const { return Q.rows(); }
  Eigen::Index count() const { return Q.cols(); }

  /// Throws InvalidInput unless K >= 2, times strictly increasing,
  /// q_ref has length N and every value is finite.
  void validate() const;

  /// Q - q_ref 1^T.
  Matrix centered() const;
};

enum class ReferenceKind { kZero, kMean };

/// Reference state of the given kind for snapshot matrix q (N x K).
Vector reference_state(const Matrix& q, ReferenceKind kind);

/// Affine map t -> (t - t0) / (tf - t0) fitted on a training time grid.
struct TimeNormalization {
  double t0 = 0.0;
  double tf = 1.0;

  /// Fits the map to the first and last entry. Throws InvalidInput if the
  /// grid has fewer than two points or is not strictly increasing.
  static TimeNormalization fit(std::span<const double> times);

  double operator()(double t) const { return (t - t0) / (tf - t0); }
  std::vector<double> apply(std::span<const double> times) const;
};

/// Maps strictly increasing times onto [0, 1] (first -> 0, last -> 1).
std::vector<double> normalize_times(std::span<const double> times);

enum class RankPolicy {
  kStrict,  // n_f above the numerical rank is an error
  kPad,     // keep n_f; trailing feature directions carry no data
};

struct FeatureOptions {
  RankPolicy rank_policy = RankPolicy::kStrict;
  // A singular value counts toward the numerical rank when s_i / s_0 >= this.
  double rank_tolerance = 1e-13;
};

/// POD feature space of a snapshot set.
struct FeatureModel {
  Matrix basis;    // N x n_f, orthonormal columns (leading left singular vectors)
  Matrix coords;   // n_f x K, basis^T (Q - q_ref 1^T)
  std::vector<double> tau;  // K normalized training times
  Vector q_ref;
  Vector pod_singular_values;  // all min(N, K) singular values of the centered data
  TimeNormalization time_map;
  Eigen::Index numerical_rank = 0;

  Eigen::Index features() const { return basis.cols(); }
  Eigen::Index state_dim() const { return basis.rows(); }

  /// Feature coordinates basis^T (Q - q_ref 1^T) of arbitrary snapshots.
  Matrix project(const Matrix& q) const;
  /// Normalized times of arbitrary snapshots under the training time map.
  std::vector<double> normalize(std::span<const double> times) const {
    return time_map.apply(times);
  }
};

/// Center, decompose and project. Throws NumericalError when the centered
/// data has rank 0, or when n_f exceeds its numerical rank under
/// RankPolicy::kStrict (the error carries the usable rank).
FeatureModel build_feature_model(const SnapshotSet& snapshots, Eigen::Index n_features,
                                 const FeatureOptions& options = {});

enum class ErrorNorm {
  kRelativeFrobenius,  // ||X - Z Z^T X||_F / ||X||_F
  kMeanSquared,        // (1/K) sum_j ||(I - Z Z^T) x_j||^2
};

/// Projection error of the centered snapshots onto span(basis).
double pod_projection_error(const Matrix& basis, const SnapshotSet& snapshots,
                            ErrorNorm norm = ErrorNorm::kRelativeFrobenius);

/// Smallest n_f whose mean-squared POD projection error is <= threshold,
/// computed from the singular values of the centered data.
Eigen::Index select_feature_count(const SnapshotSet& snapshots, double threshold);

}  // namespace geosub
