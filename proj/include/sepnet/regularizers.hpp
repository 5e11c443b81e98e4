#pragma once

// Penalties on a collection of factor matrices and their exact gradients.
//
//   rho(A) = 1/(2 T k^2) sum_t ||A_t||_F^2                        (spectral size)
//   tau(A) = 1/(4 T k log k) sum_t log(nu + det(G_t)/k)^2          (log-det)
//   g(A)   = 1/(2 k1) sum_i (sum_j (a_ij^2 + varpi)^(p/2))^2       (smooth l_p)
//
// k = min(rows, cols) is taken per factor and T is the number of factors in
// the collection. G_t is the k x k Gram matrix of A_t, i.e. A^T A for tall
// or square factors, so det(G_t) is the product of the squared singular
// values.

#include <span>
#include <vector>

#include "sepnet/tensor.hpp"

namespace sepnet {

struct RegularizerConfig {
  double mu1 = 0.0;  // rho weight
  double mu2 = 0.0;  // tau weight
  double mu3 = 0.0;  // g weight
  double nu = 1e-4;
  double varpi = 1e-6;
  double p = 1.0;

  /// Throws DomainError on out-of-range weights or smoothing constants.
  void validate() const;
};

double rho_value(std::span<const Matrix> factors);
std::vector<Matrix> rho_grad(std::span<const Matrix> factors);

/// Throws DomainError if any factor has min(rows, cols) < 2.
double tau_value(std::span<const Matrix> factors, double nu = 1e-4);
std::vector<Matrix> tau_grad(std::span<const Matrix> factors, double nu = 1e-4);

double g_value(const Matrix& a, double p = 1.0, double varpi = 1e-6);
Matrix g_grad(const Matrix& a, double p = 1.0, double varpi = 1e-6);
/// Sum of g over the factors.
double g_value(std::span<const Matrix> factors, double p = 1.0, double varpi = 1e-6);
std::vector<Matrix> g_grad(std::span<const Matrix> factors, double p = 1.0, double varpi = 1e-6);

/// True when tau is defined for every factor (min extent >= 2).
bool tau_applicable(std::span<const Matrix> factors);

}  // namespace sepnet
