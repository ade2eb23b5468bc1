#pragma once

#include <span>
#include <vector>

#include "geosub/feature_space.hpp"
#include "geosub/linear_kernels.hpp"

namespace geosub {

/// Decision variables of the feature-space geodesic
///   V(tau) = basis * (T1 cos(tau Theta) + T2 sin(tau Theta)),
/// with T = [T1 T2] (n_f x 2r, orthonormal columns) and Theta = diag(theta).
struct GeodesicParams {
  Matrix T;
  Vector theta;

  Eigen::Index rank() const { return theta.size(); }
  Eigen::Index features() const { return T.rows(); }
  auto left() const { return T.leftCols(rank()); }
  auto right() const { return T.rightCols(rank()); }

  /// Shape checks (T is n_f x 2r with 2r <= n_f), finiteness, and
  /// orthonormality_defect(T) <= tol. Throws InvalidInput.
  void validate(double tol = 1e-8) const;
};

/// cos / sin of tau_j * theta_i, stored K x r (row j belongs to tau_j).
struct TrigTables {
  Matrix C;
  Matrix S;
};

TrigTables trig_tables(const Vector& theta, std::span<const double> tau);

/// Vectorized coefficient block R(T, Theta, Y) (2r x K):
///   top    = (C^T o C^T) o (T1^T Y) + (C^T o S^T) o (T2^T Y)
///   bottom = (S^T o C^T) o (T1^T Y) + (S^T o S^T) o (T2^T Y)
/// so that T R is the projection of every column of Y onto its own V(tau_j).
Matrix build_R(const GeodesicParams& params, const Matrix& Y, std::span<const double> tau);

struct ObjectiveGradient {
  double value = 0.0;  // squared objective f = ||Y - T R||_F^2 / ||Y||_F^2
  Matrix grad_T;       // n_f x 2r, Euclidean
  Vector grad_theta;   // r
};

/// Feature-space fitting problem (Y, tau) with its squared objective
///   f(T, theta) = ||Y - T R(T, theta, Y)||_F^2 / ||Y||_F^2
/// and the analytic Euclidean gradient of f. The gradient is exact for any T,
/// not only for orthonormal T.
class FeatureObjective {
 public:
  /// Throws InvalidInput on shape mismatch and NumericalError if ||Y||_F = 0.
  FeatureObjective(Matrix Y, std::vector<double> tau);

  const Matrix& data() const { return Y_; }
  const std::vector<double>& tau() const { return tau_; }

  /// Squared objective f.
  double squared(const GeodesicParams& params) const;
  /// Normalized error sqrt(f) = ||Y - T R||_F / ||Y||_F.
  double relative_error(const GeodesicParams& params) const;
  ObjectiveGradient evaluate(const GeodesicParams& params) const;

 private:
  void check(const GeodesicParams& params) const;

  Matrix Y_;
  std::vector<double> tau_;
  Eigen::RowVectorXd tau_row_;
  double y_norm_sq_ = 0.0;
};

/// ||Y - T R||_F / ||Y||_F.
double objective(const GeodesicParams& params, const Matrix& Y, std::span<const double> tau);

/// Euclidean gradient of the squared objective f.
ObjectiveGradient euclidean_gradient(const GeodesicParams& params, const Matrix& Y,
                                     std::span<const double> tau);

struct GeodesicBasisSample {
  double tau = 0.0;
  Matrix V;  // N x r
  bool extrapolated = false;  // tau outside the training window [0, 1]
};

GeodesicBasisSample assemble_basis(const FeatureModel& feature, const GeodesicParams& params,
                                   double tau);

/// Grassmann exponential map from V0 (N x r, orthonormal) along the tangent
/// Gamma (V0^T Gamma = 0):  V(tau) = V0 Phi cos(tau Sigma) + Psi sin(tau Sigma)
/// with Gamma = Psi Sigma Phi^T. Throws NumericalError reporting ||V0^T Gamma||_F
/// when Gamma is not tangent.
Matrix exp_map(const Matrix& V0, const Matrix& Gamma, double tau);

/// q_ref + V(tau) V(tau)^T (q - q_ref).
Vector reconstruct(const FeatureModel& feature, const GeodesicParams& params, const Vector& q,
                   double tau);

/// Reconstruction of every column of Q at its own tau (N x K).
Matrix reconstruct_all(const FeatureModel& feature, const GeodesicParams& params,
                       const Matrix& Q, std::span<const double> tau);

/// ||Y_test - T R(T, Theta, Y_test)||_F / ||Y_test||_F for held-out feature
/// coordinates (projected with the training basis).
double dynamic_test_error(const FeatureModel& feature, const GeodesicParams& params,
                          const Matrix& Y_test, std::span<const double> tau_test);

}  // namespace geosub
