#include "geosub/linear_kernels.hpp"

#include <cmath>
#include <string>

#include "geosub/errors.hpp"

namespace geosub {

bool all_finite(const Matrix& a) { return a.allFinite(); }

ThinSvdResult thin_svd(const Matrix& a) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw InvalidInput("thin_svd: empty matrix");
  }
  if (!a.allFinite()) {
    throw InvalidInput("thin_svd: input contains NaN or Inf");
  }

  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("thin_svd: SVD iteration did not converge",
                         {{"rows", a.rows()}, {"cols", a.cols()},
                          {"eigen_info", static_cast<int>(svd.info())}});
  }

  ThinSvdResult out{svd.matrixU(), svd.singularValues(),
                    svd.matrixV().transpose()};
  if (!out.U.allFinite() || !out.singular_values.allFinite() ||
      !out.Vt.allFinite()) {
    throw NumericalError("thin_svd: non-finite factors",
                         {{"rows", a.rows()}, {"cols", a.cols()}});
  }

  for (Eigen::Index j = 0; j < out.U.cols(); ++j) {
    Eigen::Index imax = 0;
    out.U.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.U(imax, j) < 0.0) {
      out.U.col(j) *= -1.0;
      out.Vt.row(j) *= -1.0;
    }
  }
  return out;
}

Matrix qr_orthonormalize(const Matrix& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (n < 1 || m < n) {
    throw InvalidInput("qr_orthonormalize: need rows >= cols >= 1, got " +
                       std::to_string(m) + "x" + std::to_string(n));
  }
  if (!a.allFinite()) {
    throw InvalidInput("qr_orthonormalize: input contains NaN or Inf");
  }

  Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix& packed = qr.matrixQR();
  const double lead = packed.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(std::abs(packed(j, j)) >= 1e-13 * lead) || lead == 0.0) {
      throw NumericalError(
          "qr_orthonormalize: rank-deficient input at column " +
              std::to_string(j),
          {{"column", j}, {"r_jj", packed(j, j)}, {"r_max", lead}});
    }
  }

  Matrix q = qr.householderQ() * Matrix::Identity(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (packed(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

double orthonormality_defect(const Matrix& a) {
  const Matrix gram = a.transpose() * a;
  return (gram - Matrix::Identity(a.cols(), a.cols())).norm();
}

}  // namespace geosub
