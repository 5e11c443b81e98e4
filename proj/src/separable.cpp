#include "sepnet/separable.hpp"

#include <string>

#include "sepnet/error.hpp"

namespace sepnet {

SeparableTransform::SeparableTransform(std::vector<Matrix> factors,
                                       std::optional<std::vector<double>> bias)
    : factors_(std::move(factors)), bias_(std::move(bias)) {
  if (factors_.empty()) throw ShapeError("separable transform needs at least one factor");
  for (const auto& f : factors_)
    if (f.rows() == 0 || f.cols() == 0) throw ShapeError("separable factor with a zero extent");
  if (bias_ && bias_->size() != output_size())
    throw ShapeError("bias length " + std::to_string(bias_->size()) + " != output size " +
                     std::to_string(output_size()));
}

Shape SeparableTransform::input_shape() const {
  Shape s;
  s.reserve(factors_.size());
  for (const auto& f : factors_) s.push_back(f.cols());
  return s;
}

Shape SeparableTransform::output_shape() const {
  Shape s;
  s.reserve(factors_.size());
  for (const auto& f : factors_) s.push_back(f.rows());
  return s;
}

Tensor forward_md(const SeparableTransform& t, const Tensor& x) {
  if (x.shape() != t.input_shape()) throw ShapeError("forward_md: input shape mismatch");
  Tensor y = x;
  for (std::size_t m = 0; m < t.order(); ++m) y = nmode_product(y, t.factor(m), m);
  if (t.bias()) {
    auto yd = y.data();
    const auto& b = *t.bias();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += b[i];
  }
  return y;
}

std::vector<double> forward_vec(const SeparableTransform& t, std::span<const double> v) {
  const Shape in = t.input_shape();
  const Shape out = t.output_shape();
  const std::size_t n_in = shape_size(in);
  const std::size_t n_out = shape_size(out);
  if (v.size() != n_in)
    throw ShapeError("forward_vec: vector length " + std::to_string(v.size()) + " != " +
                     std::to_string(n_in));
  const std::size_t order = t.order();

  // Column-major multi-indices of every output row and input column.
  std::vector<std::size_t> row_idx(n_out * order);
  for (std::size_t r = 0; r < n_out; ++r) {
    std::size_t rem = r;
    for (std::size_t m = 0; m < order; ++m) {
      row_idx[r * order + m] = rem % out[m];
      rem /= out[m];
    }
  }
  std::vector<std::size_t> col_idx(n_in * order);
  for (std::size_t c = 0; c < n_in; ++c) {
    std::size_t rem = c;
    for (std::size_t m = 0; m < order; ++m) {
      col_idx[c * order + m] = rem % in[m];
      rem /= in[m];
    }
  }

  std::vector<double> y(n_out, 0.0);
  for (std::size_t r = 0; r < n_out; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n_in; ++c) {
      double w = 1.0;
      for (std::size_t m = 0; m < order; ++m)
        w *= t.factor(m)(row_idx[r * order + m], col_idx[c * order + m]);
      acc += w * v[c];
    }
    y[r] = acc;
  }
  if (t.bias())
    for (std::size_t r = 0; r < n_out; ++r) y[r] += (*t.bias())[r];
  return y;
}

Matrix materialize(const SeparableTransform& t) {
  std::vector<Matrix> reversed(t.factors().rbegin(), t.factors().rend());
  return kron_chain(reversed);
}

ParamCount param_count(const SeparableTransform& t) {
  ParamCount pc;
  std::size_t rows = 1;
  std::size_t cols = 1;
  for (const auto& f : t.factors()) {
    pc.separable += f.size();
    rows *= f.rows();
    cols *= f.cols();
  }
  pc.dense = rows * cols;
  if (t.bias()) {
    pc.separable += t.bias()->size();
    pc.dense += t.bias()->size();
  }
  return pc;
}

double compression_ratio(std::size_t regular_params, std::size_t light_params) {
  if (light_params == 0) throw DomainError("compression_ratio: lightweight parameter count is zero");
  return static_cast<double>(regular_params) / static_cast<double>(light_params);
}

SparsityReport sparsity_report(const SeparableTransform& t) {
  SparsityReport r;
  for (const auto& f : t.factors()) {
    const std::size_t nz = count_nonzero(f.data());
    r.factor_nonzeros.push_back(nz);
    r.factor_zeros.push_back(f.size() - nz);
  }
  const Matrix w = materialize(t);
  r.materialized_nonzeros = count_nonzero(w.data());
  r.materialized_zeros = w.size() - r.materialized_nonzeros;

  if (t.order() == 2) {
    const Matrix& a = t.factor(0);
    const Matrix& b = t.factor(1);
    const std::size_t za = r.factor_zeros[0];
    const std::size_t zb = r.factor_zeros[1];
    r.predicted_zeros = za * b.rows() * b.cols() + zb * a.rows() * a.cols() - za * zb;
    const auto sa = static_cast<long long>(r.factor_nonzeros[0]);
    const auto sb = static_cast<long long>(r.factor_nonzeros[1]);
    r.nonzero_reading = sa * static_cast<long long>(a.rows() * b.rows()) +
                        sb * static_cast<long long>(a.cols() * b.cols()) - sa * sb;
  }
  return r;
}

Tensor asym_conv_forward(const Tensor& x, const AsymConvFilters& f) {
  if (x.order() != 3) throw ShapeError("asym_conv_forward expects a p x q x c tensor");
  const std::size_t p = x.shape()[0];
  const std::size_t q = x.shape()[1];
  const std::size_t c = x.shape()[2];
  const std::size_t k1 = f.vertical.rows();
  const std::size_t k2 = f.horizontal.rows();
  const std::size_t n = f.mixing.rows();
  if (f.vertical.cols() != c || f.horizontal.cols() != c || f.mixing.cols() != c)
    throw ShapeError("asym_conv_forward: filter channel count does not match input");
  if (k1 == 0 || k2 == 0 || n == 0) throw ShapeError("asym_conv_forward: empty filter");
  if (p < k1 || q < k2) throw ShapeError("asym_conv_forward: input smaller than kernel");

  const std::size_t p1 = p - k1 + 1;
  const std::size_t q1 = q - k2 + 1;
  auto at = [](const Tensor& t, std::size_t i, std::size_t j, std::size_t ch) {
    return t[i + t.shape()[0] * (j + t.shape()[1] * ch)];
  };

  Tensor vert({p1, q, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t j = 0; j < q; ++j)
      for (std::size_t i = 0; i < p1; ++i) {
        double acc = 0.0;
        for (std::size_t a = 0; a < k1; ++a) acc += f.vertical(a, ch) * at(x, i + a, j, ch);
        vert[i + p1 * (j + q * ch)] = acc;
      }

  Tensor horiz({p1, q1, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t j = 0; j < q1; ++j)
      for (std::size_t i = 0; i < p1; ++i) {
        double acc = 0.0;
        for (std::size_t b = 0; b < k2; ++b) acc += f.horizontal(b, ch) * at(vert, i, j + b, ch);
        horiz[i + p1 * (j + q1 * ch)] = acc;
      }

  // Channel mixing is the mode-3 product with the n x c bank.
  return nmode_product(horiz, f.mixing, 2);
}

ConvRatios conv_ratios(std::size_t k1, std::size_t k2, std::size_t n) {
  if (k1 == 0 || k2 == 0 || n == 0) throw DomainError("conv_ratios: arguments must be positive");
  const double r = static_cast<double>(k1 + k2 + n) / static_cast<double>(k1 * k2 + n);
  return {r, r};
}

}  // namespace sepnet
