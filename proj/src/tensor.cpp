#include "sepnet/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "sepnet/error.hpp"

namespace sepnet {

namespace {

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one mode");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols)
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
}

Tensor Tensor::from_matrix(const Matrix& m) {
  return Tensor({m.rows(), m.cols()}, m.storage());
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Matrix Tensor::to_matrix() const {
  if (shape_.size() == 1) return Matrix(shape_[0], 1, data_);
  if (shape_.size() != 2) throw ShapeError("to_matrix needs an order-1 or order-2 tensor");
  return Matrix(shape_[0], shape_[1], data_);
}

std::vector<double> vec(const Tensor& x) {
  return {x.data().begin(), x.data().end()};
}

Tensor unvec(std::span<const double> v, const Shape& shape) {
  check_shape(shape);
  if (v.size() != shape_size(shape))
    throw ShapeError("unvec: length " + std::to_string(v.size()) + " does not match shape " +
                     shape_string(shape));
  return Tensor(shape, std::vector<double>(v.begin(), v.end()));
}

Tensor nmode_product(const Tensor& x, const Matrix& a, std::size_t mode) {
  const Shape& in = x.shape();
  if (mode >= in.size())
    throw DomainError("mode " + std::to_string(mode) + " out of range for order-" +
                      std::to_string(in.size()) + " tensor");
  if (a.cols() != in[mode])
    throw ShapeError("nmode_product: matrix has " + std::to_string(a.cols()) +
                     " columns but mode " + std::to_string(mode) + " has extent " +
                     std::to_string(in[mode]));

  std::size_t left = 1;
  for (std::size_t m = 0; m < mode; ++m) left *= in[m];
  std::size_t right = 1;
  for (std::size_t m = mode + 1; m < in.size(); ++m) right *= in[m];
  const std::size_t extent = in[mode];
  const std::size_t k_out = a.rows();

  Shape out_shape = in;
  out_shape[mode] = k_out;
  Tensor y(std::move(out_shape));
  const auto xd = x.data();
  auto yd = y.data();
  for (std::size_t r = 0; r < right; ++r) {
    for (std::size_t k = 0; k < k_out; ++k) {
      for (std::size_t l = 0; l < left; ++l) {
        double acc = 0.0;
        for (std::size_t i = 0; i < extent; ++i)
          acc += xd[l + left * (i + extent * r)] * a(k, i);
        yd[l + left * (k + k_out * r)] = acc;
      }
    }
  }
  return y;
}

Matrix mode_contract(const Tensor& a, const Tensor& b, std::size_t mode) {
  if (mode >= a.order() || a.order() != b.order())
    throw DomainError("mode_contract: mode or order mismatch");
  std::size_t left = 1;
  std::size_t right = 1;
  for (std::size_t m = 0; m < a.order(); ++m) {
    if (m == mode) continue;
    if (a.shape()[m] != b.shape()[m]) throw ShapeError("mode_contract: extents differ");
    (m < mode ? left : right) *= a.shape()[m];
  }
  const std::size_t ka = a.shape()[mode];
  const std::size_t kb = b.shape()[mode];
  Matrix out(ka, kb);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t r = 0; r < right; ++r)
    for (std::size_t i = 0; i < kb; ++i)
      for (std::size_t k = 0; k < ka; ++k) {
        double acc = 0.0;
        for (std::size_t l = 0; l < left; ++l)
          acc += ad[l + left * (k + ka * r)] * bd[l + left * (i + kb * r)];
        out(k, i) += acc;
      }
  return out;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t ja = 0; ja < a.cols(); ++ja)
    for (std::size_t ia = 0; ia < a.rows(); ++ia) {
      const double s = a(ia, ja);
      for (std::size_t jb = 0; jb < b.cols(); ++jb)
        for (std::size_t ib = 0; ib < b.rows(); ++ib)
          out(ia * b.rows() + ib, ja * b.cols() + jb) = s * b(ib, jb);
    }
  return out;
}

Matrix kron_chain(std::span<const Matrix> factors) {
  if (factors.empty()) throw DomainError("kron_chain of an empty factor list");
  Matrix acc = factors[0];
  for (std::size_t t = 1; t < factors.size(); ++t) acc = kron(acc, factors[t]);
  return acc;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  Matrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = b(k, j);
      for (std::size_t i = 0; i < a.rows(); ++i) c(i, j) += a(i, k) * s;
    }
  return c;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size())
    throw ShapeError("matvec: " + std::to_string(a.cols()) + " columns, vector length " +
                     std::to_string(x.size()));
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] += a(i, j) * x[j];
  return y;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
  return t;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

std::size_t count_nonzero(std::span<const double> values) {
  std::size_t n = 0;
  for (double v : values)
    if (v != 0.0) ++n;
  return n;
}

}  // namespace sepnet
