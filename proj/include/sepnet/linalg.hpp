#pragma once

// Spectral tools for the small factor matrices: a one-sided Jacobi SVD and
// the quantities derived from it.

#include <cstddef>
#include <vector>

#include "sepnet/tensor.hpp"

namespace sepnet {

struct SvdResult {
  std::vector<double> singular_values;  // non-increasing, length min(rows, cols)
  Matrix u;                             // rows x k, orthonormal columns
  Matrix v;                             // cols x k, orthonormal columns
};

/// Thin SVD by one-sided Jacobi rotations. Throws DomainError on NaN/Inf.
SvdResult svd(const Matrix& a);

inline std::vector<double> singular_values(const Matrix& a) { return svd(a).singular_values; }

/// Threshold below which a singular value counts as zero:
/// 1e-12 * sigma_max * max(rows, cols).
double rank_tolerance(const Matrix& a, double sigma_max);

/// sigma_max / sigma_min; throws RankDeficientError when sigma_min is at or
/// below rank_tolerance().
double condition_number(const Matrix& a);

/// log det(A^T A) evaluated as 2 * sum(log sigma_i). Returns -infinity when
/// the Gram matrix is singular, including every wide matrix.
double gram_logdet(const Matrix& a);

std::size_t numeric_rank(const Matrix& a);

}  // namespace sepnet
