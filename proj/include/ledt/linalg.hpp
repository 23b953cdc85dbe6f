#pragma once

#include <vector>

#include "ledt/mat.hpp"

namespace ledt {

// Cholesky factor (lower triangular) of a symmetric positive definite matrix.
// Throws std::runtime_error if the matrix is not positive definite.
Mat cholesky(const Mat& spd);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations:
// a = V diag(w) V^T with orthonormal columns in V. Eigenvalues ascending.
// Deterministic; suitable for the small matrices used here.
void jacobi_eigh(const Mat& sym, std::vector<double>& eigvals, Mat& eigvecs);

// Symmetric PSD square root via eigendecomposition. Eigenvalues below
// -neg_tol raise; tiny negatives are clipped to zero.
Mat sqrt_psd(const Mat& sym, double neg_tol);

// Factor F with F F^T = sym for a PSD matrix (possibly singular), built as
// V diag(sqrt(max(w,0))). Used for sampling from a fitted covariance.
Mat psd_factor(const Mat& sym, double neg_tol);

// Solve spd * x = b via Cholesky (b may have multiple columns).
Mat solve_spd(const Mat& spd, const Mat& b);

// Left pseudoinverse (G^T G)^-1 G^T of a full-column-rank matrix.
Mat pinv_full_col_rank(const Mat& g);

// Orthonormalize the rows of a (modified Gram-Schmidt, run twice).
// Throws if the rows are numerically rank deficient.
Mat orthonormal_rows(const Mat& a);

}  // namespace ledt
