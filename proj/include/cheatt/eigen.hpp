#pragma once

#include <vector>

#include "cheatt/matrix.hpp"

namespace cheatt {

// Eigendecomposition of a symmetric matrix S = U * diag(values) * U^T.
// Eigenvalues are sorted descending; eigenvector columns are orthonormal.
struct EigenDecomposition {
  std::vector<double> eigenvalues;
  DenseMatrix eigenvectors;  // n x n, column k pairs with eigenvalues[k]
};

struct SvdResult {
  DenseMatrix u;              // rows x k
  std::vector<double> sigma;  // k = min(rows, cols), descending, nonnegative
  DenseMatrix vt;             // k x cols
};

// Cyclic Jacobi rotations on a symmetric matrix. Sweeps run in a fixed
// (p,q) order so results are reproducible bit-for-bit. Stops when the
// off-diagonal Frobenius mass drops to tol; throws ContractError if the
// input is not symmetric within 1e-10 entrywise, ConvergenceError if the
// sweep budget is exhausted.
EigenDecomposition sym_eigen(const DenseMatrix& s, double tol = 1e-12, int max_sweeps = 100);

// Thin SVD via one-sided Jacobi on columns (the wider side is transposed
// first). Reconstruction satisfies |m - U*diag(sigma)*Vt|_F <= tol * max(1, |m|_F).
SvdResult svd(const DenseMatrix& m, double tol = 1e-12, int max_sweeps = 100);

}  // namespace cheatt
