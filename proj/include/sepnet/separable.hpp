#pragma once

// Separable (Kronecker-factored) linear transformations.
//
// A transform holds T factors A_t of size K_t x I_t. It maps a tensor of
// shape (I_1, ..., I_T) to one of shape (K_1, ..., K_T) by applying A_t along
// mode t. Under the column-major vec convention the equivalent dense matrix is
//
//     W = A_T (x) A_{T-1} (x) ... (x) A_1
//
// i.e. the Kronecker chain runs over the factors in reverse order, and
// vec(Y) = W vec(X) + b.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sepnet/tensor.hpp"

namespace sepnet {

class SeparableTransform {
 public:
  SeparableTransform() = default;
  /// Throws ShapeError for an empty factor list, an empty factor, or a bias
  /// whose length differs from prod(K_t).
  explicit SeparableTransform(std::vector<Matrix> factors,
                              std::optional<std::vector<double>> bias = std::nullopt);

  std::size_t order() const noexcept { return factors_.size(); }
  const std::vector<Matrix>& factors() const noexcept { return factors_; }
  std::vector<Matrix>& factors() noexcept { return factors_; }
  const Matrix& factor(std::size_t t) const { return factors_.at(t); }
  Matrix& factor(std::size_t t) { return factors_.at(t); }

  bool has_bias() const noexcept { return bias_.has_value(); }
  const std::optional<std::vector<double>>& bias() const noexcept { return bias_; }
  std::optional<std::vector<double>>& bias() noexcept { return bias_; }

  Shape input_shape() const;
  Shape output_shape() const;
  std::size_t input_size() const { return shape_size(input_shape()); }
  std::size_t output_size() const { return shape_size(output_shape()); }

  friend bool operator==(const SeparableTransform&, const SeparableTransform&) = default;

 private:
  std::vector<Matrix> factors_;
  std::optional<std::vector<double>> bias_;
};

/// Y = X x_1 A_1 x_2 A_2 ... x_T A_T (+ unvec(b)).
Tensor forward_md(const SeparableTransform& t, const Tensor& x);

/// W v + b, evaluating every entry of W on the fly as a product of factor
/// entries. Independent of both nmode_product and kron; meant for small
/// transforms and cross-checks.
std::vector<double> forward_vec(const SeparableTransform& t, std::span<const double> v);

/// Dense W of size prod(K_t) x prod(I_t) (bias excluded).
Matrix materialize(const SeparableTransform& t);

struct ParamCount {
  std::size_t separable = 0;
  std::size_t dense = 0;
};

ParamCount param_count(const SeparableTransform& t);

/// regular / light; throws DomainError when light_params == 0.
double compression_ratio(std::size_t regular_params, std::size_t light_params);

struct SparsityReport {
  std::vector<std::size_t> factor_nonzeros;
  std::vector<std::size_t> factor_zeros;
  std::size_t materialized_nonzeros = 0;
  std::size_t materialized_zeros = 0;
  // Two-factor closed forms. The zero-count reading
  //   z_A K_2 I_2 + z_B K_1 I_1 - z_A z_B
  // is exact; the nonzero-count reading s_A K_1 K_2 + s_B I_1 I_2 - s_A s_B
  // is reported alongside it and disagrees in general.
  std::optional<std::size_t> predicted_zeros;
  std::optional<long long> nonzero_reading;
};

SparsityReport sparsity_report(const SeparableTransform& t);

/// Filters of an asymmetric convolution over c input channels:
/// vertical is k1 x c, horizontal is k2 x c (column ch is that channel's
/// filter), mixing is n x c (row o mixes channels into output o).
struct AsymConvFilters {
  Matrix vertical;
  Matrix horizontal;
  Matrix mixing;
};

/// Valid-mode, stride-1 cross-correlation of a p x q x c input with a k1 x 1
/// filter per channel, then a 1 x k2 filter per channel, then a 1 x 1 x c
/// bank of n filters. Output shape (p-k1+1, q-k2+1, n).
Tensor asym_conv_forward(const Tensor& x, const AsymConvFilters& f);

struct ConvRatios {
  double params = 0.0;   // eta_1
  double compute = 0.0;  // eta_2
};

/// Both equal (k1 + k2 + n) / (k1 k2 + n). Throws DomainError for zero inputs.
ConvRatios conv_ratios(std::size_t k1, std::size_t k2, std::size_t n);

}  // namespace sepnet
