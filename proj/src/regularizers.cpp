#include "sepnet/regularizers.hpp"

#include <algorithm>
#include <cmath>

#include "sepnet/error.hpp"
#include "sepnet/linalg.hpp"

namespace sepnet {

namespace {

double min_extent(const Matrix& a) { return static_cast<double>(std::min(a.rows(), a.cols())); }

void check_g_params(double p, double varpi) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("sparsity exponent p must lie in (0, 1]");
  if (!(varpi > 0.0 && varpi < 1.0)) throw DomainError("smoothing varpi must lie in (0, 1)");
}

void check_tau_factor(const Matrix& a) {
  if (min_extent(a) < 2.0)
    throw DomainError("tau needs min(rows, cols) >= 2 so that log k > 0");
}

}  // namespace

void RegularizerConfig::validate() const {
  if (mu1 < 0.0 || mu2 < 0.0 || mu3 < 0.0) throw DomainError("regularizer weights must be >= 0");
  if (!(nu > 0.0 && nu < 1.0)) throw DomainError("smoothing nu must lie in (0, 1)");
  check_g_params(p, varpi);
}

double rho_value(std::span<const Matrix> factors) {
  if (factors.empty()) return 0.0;
  const double t = static_cast<double>(factors.size());
  double acc = 0.0;
  for (const auto& a : factors) {
    const double k = min_extent(a);
    const double norm = frobenius_norm(a);
    acc += norm * norm / (2.0 * t * k * k);
  }
  return acc;
}

std::vector<Matrix> rho_grad(std::span<const Matrix> factors) {
  const double t = static_cast<double>(factors.size());
  std::vector<Matrix> out;
  out.reserve(factors.size());
  for (const auto& a : factors) {
    const double k = min_extent(a);
    Matrix g = a;
    for (double& v : g.data()) v /= t * k * k;
    out.push_back(std::move(g));
  }
  return out;
}

bool tau_applicable(std::span<const Matrix> factors) {
  return std::all_of(factors.begin(), factors.end(),
                     [](const Matrix& a) { return min_extent(a) >= 2.0; });
}

double tau_value(std::span<const Matrix> factors, double nu) {
  if (factors.empty()) return 0.0;
  const double t = static_cast<double>(factors.size());
  double acc = 0.0;
  for (const auto& a : factors) {
    check_tau_factor(a);
    const double k = min_extent(a);
    const double logdet = a.rows() >= a.cols() ? gram_logdet(a) : gram_logdet(transpose(a));
    const double det = std::exp(logdet);  // exp(-inf) == 0
    const double l = std::log(nu + det / k);
    acc += l * l / (4.0 * t * k * std::log(k));
  }
  return acc;
}

std::vector<Matrix> tau_grad(std::span<const Matrix> factors, double nu) {
  const double t = static_cast<double>(factors.size());
  std::vector<Matrix> out;
  out.reserve(factors.size());
  for (const auto& a : factors) {
    check_tau_factor(a);
    const double k = min_extent(a);
    const SvdResult s = svd(a);
    Matrix g(a.rows(), a.cols());
    double logdet = 0.0;
    bool singular = false;
    for (double sv : s.singular_values) {
      if (sv == 0.0) singular = true;
      else logdet += 2.0 * std::log(sv);
    }
    const double det = singular ? 0.0 : std::exp(logdet);
    if (det > 0.0) {
      // d/dA log det(G) = 2 U diag(1/sigma) V^T, which is 2 A (A^T A)^{-1} for tall A.
      const double inner = nu + det / k;
      const double coeff = std::log(inner) / (2.0 * t * k * std::log(k)) * (det / k) / inner;
      for (std::size_t r = 0; r < s.singular_values.size(); ++r) {
        const double w = 2.0 * coeff / s.singular_values[r];
        for (std::size_t j = 0; j < a.cols(); ++j)
          for (std::size_t i = 0; i < a.rows(); ++i) g(i, j) += w * s.u(i, r) * s.v(j, r);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

double g_value(const Matrix& a, double p, double varpi) {
  check_g_params(p, varpi);
  const double k1 = static_cast<double>(a.rows());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) row += std::pow(a(i, j) * a(i, j) + varpi, p / 2.0);
    acc += row * row;
  }
  return acc / (2.0 * k1);
}

Matrix g_grad(const Matrix& a, double p, double varpi) {
  check_g_params(p, varpi);
  const double k1 = static_cast<double>(a.rows());
  Matrix g(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) row += std::pow(a(i, j) * a(i, j) + varpi, p / 2.0);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double x = a(i, j);
      g(i, j) = row * p * x * std::pow(x * x + varpi, p / 2.0 - 1.0) / k1;
    }
  }
  return g;
}

double g_value(std::span<const Matrix> factors, double p, double varpi) {
  double acc = 0.0;
  for (const auto& a : factors) acc += g_value(a, p, varpi);
  return acc;
}

std::vector<Matrix> g_grad(std::span<const Matrix> factors, double p, double varpi) {
  std::vector<Matrix> out;
  out.reserve(factors.size());
  for (const auto& a : factors) out.push_back(g_grad(a, p, varpi));
  return out;
}

}  // namespace sepnet
