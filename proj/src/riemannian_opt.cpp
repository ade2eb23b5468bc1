#include "geosub/riemannian_opt.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "geosub/errors.hpp"

namespace geosub {

Matrix stiefel_project(const Matrix& base_T, const Matrix& ambient) {
  const Matrix inner = base_T.transpose() * ambient;
  return ambient - base_T * (0.5 * (inner + inner.transpose()));
}

Matrix stiefel_retract(const Matrix& base_T, const Matrix& xi) {
  if (xi.isZero(0.0)) return base_T;
  return qr_orthonormalize(base_T + xi);
}

Matrix transport(const Matrix& new_base_T, const Matrix& xi) {
  return stiefel_project(new_base_T, xi);
}

ProductTangent transport(const Matrix& new_base_T, const ProductTangent& xi) {
  return {stiefel_project(new_base_T, xi.xi_T), xi.xi_theta};
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GeodesicParams random_point(Eigen::Index n_features, Eigen::Index rank, std::uint64_t seed) {
  if (rank < 1) throw InvalidInput("random_point: rank must be >= 1");
  if (2 * rank > n_features) {
    throw InvalidInput("random_point: 2r = " + std::to_string(2 * rank) +
                       " exceeds n_f = " + std::to_string(n_features));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);

  Matrix g(n_features, 2 * rank);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = gauss(rng);
  Vector theta(rank);
  for (Eigen::Index i = 0; i < rank; ++i) theta(i) = angle(rng);
  return {qr_orthonormalize(g), theta};
}

void SolverConfig::validate() const {
  if (!(grad_tol > 0.0)) throw InvalidInput("solver: grad_tol must be > 0");
  if (max_iters < 0) throw InvalidInput("solver: max_iters must be >= 0");
  if (restarts < 1) throw InvalidInput("solver: restarts must be >= 1");
  const auto& ls = line_search;
  if (!(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 1.0)) {
    throw InvalidInput("solver: Armijo constant must lie in (0, 1)");
  }
  if (!(ls.contraction > 0.0 && ls.contraction < 1.0)) {
    throw InvalidInput("solver: backtracking factor must lie in (0, 1)");
  }
  if (ls.max_backtracks < 1) throw InvalidInput("solver: max_backtracks must be >= 1");
  if (!(ls.max_initial_step > 0.0)) throw InvalidInput("solver: initial step must be > 0");
  if (!(ls.expansion >= 1.0)) throw InvalidInput("solver: step expansion must be >= 1");
}

namespace {

struct Iterate {
  GeodesicParams point;
  ObjectiveGradient eval;
  ProductTangent grad;  // Riemannian gradient
};

Iterate make_iterate(const FeatureObjective& problem, GeodesicParams point) {
  ObjectiveGradient eval = problem.evaluate(point);
  if (!std::isfinite(eval.value) || !eval.grad_T.allFinite() || !eval.grad_theta.allFinite()) {
    throw NumericalError("solve: non-finite objective or gradient",
                         {{"objective", eval.value}});
  }
  ProductTangent grad{stiefel_project(point.T, eval.grad_T), eval.grad_theta};
  return {std::move(point), std::move(eval), std::move(grad)};
}

GeodesicParams step(const GeodesicParams& x, const ProductTangent& dir, double alpha) {
  return {stiefel_retract(x.T, alpha * dir.xi_T), x.theta + alpha * dir.xi_theta};
}

}  // namespace

RestartSummary minimize(const FeatureObjective& problem, GeodesicParams& point,
                        const SolverConfig& config, const IterateObserver& observer,
                        std::size_t restart_index) {
  config.validate();
  const LineSearchConfig& ls = config.line_search;

  Iterate cur = make_iterate(problem, point);
  RestartSummary out;
  auto record = [&](int k) {
    const double err = std::sqrt(cur.eval.value);
    out.objective_trace.push_back(err);
    out.grad_norm_trace.push_back(cur.grad.norm());
    if (observer) observer(restart_index, k, cur.point, err);
  };
  record(0);

  ProductTangent dir{-cur.grad.xi_T, -cur.grad.xi_theta};
  double last_step = 0.0;
  bool restart_step = true;  // dir is steepest descent
  int k = 0;
  for (;; ++k) {
    const double gnorm = cur.grad.norm();
    if (gnorm < config.grad_tol) {
      out.converged = true;
      break;
    }
    if (k >= config.max_iters) break;

    double slope = cur.grad.inner(dir);
    if (!(slope < 0.0)) {
      dir = {-cur.grad.xi_T, -cur.grad.xi_theta};
      slope = -gnorm * gnorm;
      restart_step = true;
    }

    double alpha = last_step > 0.0 ? ls.expansion * last_step
                                   : std::min(ls.max_initial_step, 1.0 / gnorm);

    bool accepted = false;
    std::optional<Iterate> next;
    for (int b = 0; b < ls.max_backtracks && !accepted; ++b, alpha *= ls.contraction) {
      GeodesicParams trial = step(cur.point, dir, alpha);
      const double bound = cur.eval.value + ls.sufficient_decrease * alpha * slope;
      if (b == 0) {
        ObjectiveGradient eval = problem.evaluate(trial);
        if (std::isfinite(eval.value) && eval.value <= bound) {
          ProductTangent grad{stiefel_project(trial.T, eval.grad_T), eval.grad_theta};
          next = Iterate{std::move(trial), std::move(eval), std::move(grad)};
          accepted = true;
          last_step = alpha;
        }
      } else {
        const double value = problem.squared(trial);
        if (std::isfinite(value) && value <= bound) {
          next = make_iterate(problem, std::move(trial));
          accepted = true;
          last_step = alpha;
        }
      }
    }

    if (!accepted) {
      if (!restart_step) {
        // Conjugate direction failed; retry the same iterate along -grad.
        dir = {-cur.grad.xi_T, -cur.grad.xi_theta};
        restart_step = true;
        --k;
        continue;
      }
      out.line_search_failed = true;
      break;
    }

    // Polak-Ribiere+ with projection transport.
    const ProductTangent old_grad = transport(next->point.T, cur.grad);
    const ProductTangent old_dir = transport(next->point.T, dir);
    const double old_norm_sq = cur.grad.inner(cur.grad);
    const ProductTangent& g = next->grad;
    double beta = (g.inner(g) - g.inner(old_grad)) / old_norm_sq;
    if (!std::isfinite(beta) || beta < 0.0) beta = 0.0;

    dir = {-g.xi_T + beta * old_dir.xi_T, -g.xi_theta + beta * old_dir.xi_theta};
    restart_step = beta == 0.0;
    cur = std::move(*next);
    record(k + 1);
  }

  out.iterations = k;
  out.final_objective = std::sqrt(cur.eval.value);
  out.final_grad_norm = cur.grad.norm();
  point = std::move(cur.point);
  return out;
}

FitResult solve(const FeatureModel& feature, Eigen::Index rank, const SolverConfig& config,
                const IterateObserver& observer) {
  config.validate();
  if (rank < 1) throw InvalidInput("solve: rank must be >= 1");
  if (2 * rank > feature.features()) {
    throw InvalidInput("solve: 2r = " + std::to_string(2 * rank) + " exceeds n_f = " +
                       std::to_string(feature.features()));
  }
  const auto start = std::chrono::steady_clock::now();
  const FeatureObjective problem(feature.coords, feature.tau);

  FitResult result;
  auto& report = result.report;
  for (int i = 0; i < config.restarts; ++i) {
    const std::uint64_t seed = derive_seed(config.rng_seed, static_cast<std::uint64_t>(i));
    GeodesicParams point = random_point(feature.features(), rank, seed);
    RestartSummary run = minimize(problem, point, config, observer, static_cast<std::size_t>(i));
    run.seed = seed;
    report.per_restart.push_back(std::move(run));
    result.restart_params.push_back(std::move(point));
  }

  bool any_progress = false;
  for (const auto& run : report.per_restart) {
    any_progress = any_progress || run.iterations > 0 || run.converged;
  }
  if (!any_progress) {
    nlohmann::json diag = nlohmann::json::array();
    for (const auto& run : report.per_restart) {
      diag.push_back({{"seed", run.seed},
                      {"objective", run.final_objective},
                      {"grad_norm", run.final_grad_norm}});
    }
    throw NumericalError("solve: every restart failed its first line search",
                         {{"restarts", diag}});
  }

  std::size_t best = 0;
  double sum_obj = 0.0, sum_iters = 0.0;
  for (std::size_t i = 0; i < report.per_restart.size(); ++i) {
    const auto& run = report.per_restart[i];
    if (run.final_objective < report.per_restart[best].final_objective) best = i;
    sum_obj += run.final_objective;
    sum_iters += run.iterations;
  }
  const double n = static_cast<double>(report.per_restart.size());
  const auto& winner = report.per_restart[best];
  report.best_restart = best;
  report.objective_trace = winner.objective_trace;
  report.grad_norm_trace = winner.grad_norm_trace;
  report.iterations = winner.iterations;
  report.converged = winner.converged;
  report.mean_objective = sum_obj / n;
  report.mean_iterations = sum_iters / n;
  result.params = result.restart_params[best];
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace geosub
