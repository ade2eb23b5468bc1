#pragma once

#include <Eigen/Dense>

namespace geosub {

// All matrices are Eigen's default column-major storage: entry (i, j) lives at
// offset i + j * rows. Binary file formats use the same order.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ThinSvdResult {
  Matrix U;                // m x k, orthonormal columns
  Vector singular_values;  // length k, nonincreasing, >= 0
  Matrix Vt;               // k x n, orthonormal rows
};

/// Thin SVD A = U diag(s) Vt with k = min(m, n).
///
/// Sign convention: the largest-magnitude entry of every left singular vector
/// is positive (the matching row of Vt is flipped along with it), so the
/// factors are reproducible across runs.
///
/// Throws InvalidInput for empty or non-finite input and NumericalError when
/// the bidiagonal iteration fails to converge.
ThinSvdResult thin_svd(const Matrix& a);

/// Orthonormal factor Q of A = QR with diag(R) > 0.
/// Requires rows >= cols. Throws NumericalError naming the first column whose
/// |R_jj| falls below 1e-13 * max_i |R_ii|.
Matrix qr_orthonormalize(const Matrix& a);

/// ||A^T A - I||_F.
double orthonormality_defect(const Matrix& a);

/// True when every entry is finite.
bool all_finite(const Matrix& a);

}  // namespace geosub
