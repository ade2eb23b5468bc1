#include "geosub/geodesic_model.hpp"

#include <cmath>
#include <string>

#include "geosub/errors.hpp"

namespace geosub {
namespace {

std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// r x K tables c(i, j) = cos(tau_j theta_i), s(i, j) = sin(tau_j theta_i).
void trig_rows(const Vector& theta, const Eigen::RowVectorXd& tau, Matrix& c, Matrix& s) {
  const Matrix angles = theta * tau;
  c = angles.array().cos().matrix();
  s = angles.array().sin().matrix();
}

Eigen::RowVectorXd as_row(std::span<const double> tau) {
  return Eigen::Map<const Eigen::RowVectorXd>(tau.data(), static_cast<Eigen::Index>(tau.size()));
}

void check_problem(const GeodesicParams& params, const Matrix& Y, std::size_t k) {
  if (params.T.cols() != 2 * params.rank()) {
    throw InvalidInput("T has " + std::to_string(params.T.cols()) +
                       " columns, expected 2r = " + std::to_string(2 * params.rank()));
  }
  if (Y.rows() != params.features()) {
    throw InvalidInput("Y has " + std::to_string(Y.rows()) + " rows (n_f), T has " +
                       std::to_string(params.features()));
  }
  if (static_cast<Eigen::Index>(k) != Y.cols()) {
    throw InvalidInput("tau has " + std::to_string(k) + " entries, Y has K = " +
                       std::to_string(Y.cols()) + " columns");
  }
}

}  // namespace

void GeodesicParams::validate(double tol) const {
  const Eigen::Index r = rank();
  if (r < 1) throw InvalidInput("geodesic params: rank must be >= 1");
  if (T.cols() != 2 * r) {
    throw InvalidInput("geodesic params: T is " + dims(T.rows(), T.cols()) +
                       ", expected n_f x " + std::to_string(2 * r));
  }
  if (2 * r > T.rows()) {
    throw InvalidInput("geodesic params: 2r = " + std::to_string(2 * r) +
                       " exceeds n_f = " + std::to_string(T.rows()));
  }
  if (!T.allFinite() || !theta.allFinite()) {
    throw InvalidInput("geodesic params: non-finite entries");
  }
  const double defect = orthonormality_defect(T);
  if (defect > tol) {
    throw InvalidInput("geodesic params: T is not orthonormal (defect " +
                       std::to_string(defect) + ")");
  }
}

TrigTables trig_tables(const Vector& theta, std::span<const double> tau) {
  Matrix c, s;
  trig_rows(theta, as_row(tau), c, s);
  return {c.transpose(), s.transpose()};
}

Matrix build_R(const GeodesicParams& params, const Matrix& Y, std::span<const double> tau) {
  check_problem(params, Y, tau.size());
  const Eigen::Index r = params.rank();
  Matrix c, s;
  trig_rows(params.theta, as_row(tau), c, s);

  const Matrix proj = params.T.transpose() * Y;  // [T1^T Y; T2^T Y]
  // Reduced coordinates W(tau_j)^T T^T y_j, one column per snapshot.
  const Matrix coeff = (c.array() * proj.topRows(r).array() +
                        s.array() * proj.bottomRows(r).array()).matrix();
  Matrix R(2 * r, Y.cols());
  R.topRows(r) = (c.array() * coeff.array()).matrix();
  R.bottomRows(r) = (s.array() * coeff.array()).matrix();
  return R;
}

FeatureObjective::FeatureObjective(Matrix Y, std::vector<double> tau)
    : Y_(std::move(Y)), tau_(std::move(tau)) {
  if (static_cast<Eigen::Index>(tau_.size()) != Y_.cols()) {
    throw InvalidInput("feature objective: tau has " + std::to_string(tau_.size()) +
                       " entries, Y has K = " + std::to_string(Y_.cols()));
  }
  if (!Y_.allFinite()) throw InvalidInput("feature objective: Y contains NaN or Inf");
  tau_row_ = as_row(tau_);
  y_norm_sq_ = Y_.squaredNorm();
  if (!(y_norm_sq_ > 0.0)) {
    throw NumericalError("feature objective: ||Y||_F = 0, normalized error undefined");
  }
}

void FeatureObjective::check(const GeodesicParams& params) const {
  check_problem(params, Y_, tau_.size());
}

double FeatureObjective::squared(const GeodesicParams& params) const {
  return (Y_ - params.T * build_R(params, Y_, tau_)).squaredNorm() / y_norm_sq_;
}

double FeatureObjective::relative_error(const GeodesicParams& params) const {
  return std::sqrt(squared(params));
}

// Gradient of g = ||E||^2 with E = Y - T R, R = [c o P; s o P],
// P = c o (T1^T Y) + s o (T2^T Y). With G = T^T E and M = c o G1 + s o G2:
//   dg/dT1 = -2 (E (c o P)^T + Y (c o M)^T)
//   dg/dT2 = -2 (E (s o P)^T + Y (s o M)^T)
//   dg/dtheta_i = -2 sum_j tau_j (c_ij (G2 o P + M o B)_ij - s_ij (G1 o P + M o A)_ij)
// where A = T1^T Y and B = T2^T Y. M vanishes when T is orthonormal.
ObjectiveGradient FeatureObjective::evaluate(const GeodesicParams& params) const {
  check(params);
  const Eigen::Index r = params.rank();
  Matrix c, s;
  trig_rows(params.theta, tau_row_, c, s);

  const Matrix proj = params.T.transpose() * Y_;
  const auto a = proj.topRows(r).array();
  const auto b = proj.bottomRows(r).array();
  const Eigen::ArrayXXd p = c.array() * a + s.array() * b;

  Matrix R(2 * r, Y_.cols());
  R.topRows(r) = (c.array() * p).matrix();
  R.bottomRows(r) = (s.array() * p).matrix();
  const Matrix E = Y_ - params.T * R;

  const Matrix G = params.T.transpose() * E;
  const auto g1 = G.topRows(r).array();
  const auto g2 = G.bottomRows(r).array();
  const Eigen::ArrayXXd m = c.array() * g1 + s.array() * g2;

  Matrix N(2 * r, Y_.cols());
  N.topRows(r) = (c.array() * m).matrix();
  N.bottomRows(r) = (s.array() * m).matrix();

  const double scale = -2.0 / y_norm_sq_;
  ObjectiveGradient out;
  out.value = E.squaredNorm() / y_norm_sq_;
  out.grad_T = scale * (E * R.transpose() + Y_ * N.transpose());

  const Eigen::ArrayXXd dcos = g1 * p + m * a;
  const Eigen::ArrayXXd dsin = g2 * p + m * b;
  const Eigen::ArrayXXd per_entry = c.array() * dsin - s.array() * dcos;
  out.grad_theta = scale * (per_entry.matrix() * tau_row_.transpose());
  return out;
}

double objective(const GeodesicParams& params, const Matrix& Y, std::span<const double> tau) {
  return FeatureObjective(Y, {tau.begin(), tau.end()}).relative_error(params);
}

ObjectiveGradient euclidean_gradient(const GeodesicParams& params, const Matrix& Y,
                                     std::span<const double> tau) {
  return FeatureObjective(Y, {tau.begin(), tau.end()}).evaluate(params);
}

GeodesicBasisSample assemble_basis(const FeatureModel& feature, const GeodesicParams& params,
                                   double tau) {
  if (params.features() != feature.features()) {
    throw InvalidInput("assemble_basis: T has n_f = " + std::to_string(params.features()) +
                       ", feature model has n_f = " + std::to_string(feature.features()));
  }
  const Eigen::ArrayXd angle = params.theta.array() * tau;
  const Matrix rotated = params.left() * angle.cos().matrix().asDiagonal() +
                         params.right() * angle.sin().matrix().asDiagonal();
  return {tau, feature.basis * rotated, tau < 0.0 || tau > 1.0};
}

Matrix exp_map(const Matrix& V0, const Matrix& Gamma, double tau) {
  if (V0.rows() != Gamma.rows() || V0.cols() != Gamma.cols()) {
    throw InvalidInput("exp_map: V0 is " + dims(V0.rows(), V0.cols()) + ", Gamma is " +
                       dims(Gamma.rows(), Gamma.cols()));
  }
  if (V0.rows() < V0.cols()) throw InvalidInput("exp_map: V0 must have rows >= cols");
  const double tangency = (V0.transpose() * Gamma).norm();
  if (tangency > 1e-10 * std::max(1.0, Gamma.norm())) {
    throw NumericalError("exp_map: Gamma is not tangent at V0",
                         {{"tangency_defect", tangency}});
  }
  if (Gamma.isZero(0.0)) return V0;

  const ThinSvdResult svd = thin_svd(Gamma);
  const Eigen::ArrayXd angle = svd.singular_values.array() * tau;
  return V0 * svd.Vt.transpose() * angle.cos().matrix().asDiagonal() +
         svd.U * angle.sin().matrix().asDiagonal();
}

Vector reconstruct(const FeatureModel& feature, const GeodesicParams& params, const Vector& q,
                   double tau) {
  if (q.size() != feature.state_dim()) {
    throw InvalidInput("reconstruct: q has length " + std::to_string(q.size()) +
                       ", expected N = " + std::to_string(feature.state_dim()));
  }
  const Matrix V = assemble_basis(feature, params, tau).V;
  return feature.q_ref + V * (V.transpose() * (q - feature.q_ref));
}

Matrix reconstruct_all(const FeatureModel& feature, const GeodesicParams& params,
                       const Matrix& Q, std::span<const double> tau) {
  const Matrix Y = feature.project(Q);
  const Matrix TR = params.T * build_R(params, Y, tau);
  return (feature.basis * TR).colwise() + feature.q_ref;
}

double dynamic_test_error(const FeatureModel& feature, const GeodesicParams& params,
                          const Matrix& Y_test, std::span<const double> tau_test) {
  if (Y_test.rows() != feature.features()) {
    throw InvalidInput("dynamic_test_error: Y_test has " + std::to_string(Y_test.rows()) +
                       " rows, feature model has n_f = " + std::to_string(feature.features()));
  }
  return objective(params, Y_test, tau_test);
}

}  // namespace geosub
