#pragma once

// Dense real tensors and matrices, the n-mode product and Kronecker algebra.
//
// Storage is column-major throughout: for a tensor of shape (I_1, ..., I_N)
// mode 0 varies fastest, so vec() of a matrix stacks its columns. Mode
// indices in this API are zero-based.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sepnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of column-major data; throws ShapeError on length mismatch.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Row-major literal, convenient for fixtures: {{1, 2}, {3, 4}}.
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i + rows_ * j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i + rows_ * j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  /// Throws ShapeError if an extent is zero, the shape is empty, or the
  /// data length disagrees with the shape.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor from_matrix(const Matrix& m);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  Matrix to_matrix() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::vector<double> vec(const Tensor& x);
Tensor unvec(std::span<const double> v, const Shape& shape);

/// X x_mode A: contracts extent shape[mode] against the columns of `a`.
Tensor nmode_product(const Tensor& x, const Matrix& a, std::size_t mode);

/// Contraction over every mode except `mode`:
///   out(k, i) = sum over the other indices of a[.., k, ..] * b[.., i, ..].
/// This is the mode-`mode` unfolding product a_(mode) b_(mode)^T.
Matrix mode_contract(const Tensor& a, const Tensor& b, std::size_t mode);

Matrix kron(const Matrix& a, const Matrix& b);
/// Left fold: ((F0 (x) F1) (x) F2) ...
Matrix kron_chain(std::span<const Matrix> factors);

Matrix matmul(const Matrix& a, const Matrix& b);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
Matrix transpose(const Matrix& a);
double frobenius_norm(const Matrix& a);
std::size_t count_nonzero(std::span<const double> values);

}  // namespace sepnet
