#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <vector>

#include "geosub/feature_space.hpp"
#include "geosub/geodesic_model.hpp"

namespace geosub {

/// Tangent vector of St(n_f, 2r) x R^r.
struct ProductTangent {
  Matrix xi_T;
  Vector xi_theta;

  double inner(const ProductTangent& other) const {
    return xi_T.cwiseProduct(other.xi_T).sum() + xi_theta.dot(other.xi_theta);
  }
  double norm() const { return std::sqrt(inner(*this)); }
};

/// Projection onto the tangent space at base_T under the embedded metric:
/// ambient - base_T sym(base_T^T ambient).
Matrix stiefel_project(const Matrix& base_T, const Matrix& ambient);

/// QR retraction qr_orthonormalize(base_T + xi).
Matrix stiefel_retract(const Matrix& base_T, const Matrix& xi);

/// Projection vector transport onto the tangent space at new_base_T.
Matrix transport(const Matrix& new_base_T, const Matrix& xi);
ProductTangent transport(const Matrix& new_base_T, const ProductTangent& xi);

/// T = qf(Gaussian n_f x 2r), theta_i ~ U[0, pi]; deterministic in seed.
GeodesicParams random_point(Eigen::Index n_features, Eigen::Index rank, std::uint64_t seed);

/// Seed of restart `index` derived from a base seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct LineSearchConfig {
  double sufficient_decrease = 1e-4;  // Armijo c1
  double contraction = 0.5;
  int max_backtracks = 60;
  // First trial step is min(max_initial_step, 1 / ||gradient||) at iteration
  // 0; later line searches start from expansion * (last accepted step).
  double max_initial_step = 1.0;
  double expansion = 2.0;
};

struct SolverConfig {
  double grad_tol = 1e-4;
  int max_iters = 5000;
  int restarts = 5;
  std::uint64_t rng_seed = 0;
  LineSearchConfig line_search;

  void validate() const;
};

struct RestartSummary {
  std::uint64_t seed = 0;
  double final_objective = 0.0;  // sqrt(f), the normalized error
  int iterations = 0;
  bool converged = false;
  double final_grad_norm = 0.0;
  bool line_search_failed = false;
  std::vector<double> objective_trace;
  std::vector<double> grad_norm_trace;
};

/// Convergence record. Top-level traces belong to the best restart;
/// per_restart holds every run in restart order.
struct FitReport {
  std::vector<double> objective_trace;  // sqrt(f) per iterate, starting with the initial point
  std::vector<double> grad_norm_trace;  // Riemannian gradient norm of f per iterate
  int iterations = 0;
  bool converged = false;
  std::size_t best_restart = 0;
  std::vector<RestartSummary> per_restart;
  double mean_objective = 0.0;
  double mean_iterations = 0.0;
  double wall_time = 0.0;  // seconds
};

struct FitResult {
  GeodesicParams params;                      // best restart
  FitReport report;
  std::vector<GeodesicParams> restart_params;  // final point of every restart
};

/// Called at every accepted iterate (including the starting point).
using IterateObserver =
    std::function<void(std::size_t restart, int iteration, const GeodesicParams& point,
                       double objective)>;

/// Single Riemannian CG run from `start`.
RestartSummary minimize(const FeatureObjective& problem, GeodesicParams& point,
                        const SolverConfig& config, const IterateObserver& observer = {},
                        std::size_t restart_index = 0);

/// Multi-restart Riemannian conjugate gradient on St(n_f, 2r) x R^r for the
/// feature-space problem of `feature`. Throws NumericalError if every restart
/// fails its first line search or the objective becomes non-finite.
FitResult solve(const FeatureModel& feature, Eigen::Index rank, const SolverConfig& config,
                const IterateObserver& observer = {});

}  // namespace geosub
