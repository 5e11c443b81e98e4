#include "sepnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sepnet/error.hpp"

namespace sepnet {

namespace {

constexpr double kJacobiTol = 1e-15;
constexpr int kMaxSweeps = 80;

double column_dot(const Matrix& m, std::size_t p, std::size_t q) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, p) * m(i, q);
  return s;
}

// Fill zero columns of `q` (marked in `filled`) with unit vectors orthogonal
// to every other column, by Gram-Schmidt over the canonical basis.
void complete_orthonormal(Matrix& q, std::vector<bool>& filled) {
  const std::size_t n = q.rows();
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    if (filled[j]) continue;
    while (candidate < n) {
      std::vector<double> e(n, 0.0);
      e[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t k = 0; k < q.cols(); ++k) {
          if (!filled[k]) continue;
          double d = 0.0;
          for (std::size_t i = 0; i < n; ++i) d += q(i, k) * e[i];
          for (std::size_t i = 0; i < n; ++i) e[i] -= d * q(i, k);
        }
      double norm = 0.0;
      for (double v : e) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (std::size_t i = 0; i < n; ++i) q(i, j) = e[i] / norm;
        filled[j] = true;
        break;
      }
    }
  }
}

// Requires rows >= cols.
SvdResult jacobi_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix u = a;
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = column_dot(u, p, p);
        const double beta = column_dot(u, q, q);
        const double gamma = column_dot(u, p, q);
        if (gamma == 0.0 || std::abs(gamma) <= kJacobiTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p);
          const double uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p);
          const double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(column_dot(u, j, j));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out;
  out.singular_values.resize(n);
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  std::vector<bool> filled(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    const double s = sigma[j];
    out.singular_values[k] = s;
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
    if (s > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, k) = u(i, j) / s;
      filled[k] = true;
    }
  }
  complete_orthonormal(out.u, filled);
  return out;
}

}  // namespace

SvdResult svd(const Matrix& a) {
  for (double x : a.data())
    if (!std::isfinite(x)) throw DomainError("svd: matrix has non-finite entries");
  if (a.rows() >= a.cols()) return jacobi_tall(a);
  SvdResult t = jacobi_tall(transpose(a));
  std::swap(t.u, t.v);
  return t;
}

double rank_tolerance(const Matrix& a, double sigma_max) {
  return 1e-12 * sigma_max * static_cast<double>(std::max(a.rows(), a.cols()));
}

double condition_number(const Matrix& a) {
  const auto s = singular_values(a);
  if (s.empty()) throw ShapeError("condition_number of an empty matrix");
  const double smax = s.front();
  const double smin = s.back();
  if (smin <= rank_tolerance(a, smax))
    throw RankDeficientError("condition_number: matrix is numerically rank deficient");
  return smax / smin;
}

double gram_logdet(const Matrix& a) {
  if (a.cols() > a.rows()) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (double s : singular_values(a)) {
    if (s == 0.0) return -std::numeric_limits<double>::infinity();
    acc += 2.0 * std::log(s);
  }
  return acc;
}

std::size_t numeric_rank(const Matrix& a) {
  const auto s = singular_values(a);
  if (s.empty()) return 0;
  const double tol = rank_tolerance(a, s.front());
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [tol](double x) { return x > tol; }));
}

}  // namespace sepnet
