#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sepnet/error.hpp"
#include "sepnet/regularizers.hpp"

using namespace sepnet;

namespace {

// Independent re-codings of the three penalties.
double rho_ref(const std::vector<Matrix>& fs) {
  double s = 0.0;
  for (const auto& a : fs) {
    const double k = static_cast<double>(std::min(a.rows(), a.cols()));
    s += oracle::frobenius_sq(a) / (2.0 * static_cast<double>(fs.size()) * k * k);
  }
  return s;
}

double g_ref(const Matrix& a, double p, double varpi) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) row += std::pow(a(i, j) * a(i, j) + varpi, p / 2.0);
    total += row * row;
  }
  return total / (2.0 * static_cast<double>(a.rows()));
}

// tau for a single tall 4x3 factor through the 3x3 cofactor determinant.
double tau_ref_tall(const Matrix& a, double nu) {
  const double k = 3.0;
  const double det = oracle::det3(oracle::matmul(oracle::transpose(a), a));
  const double l = std::log(nu + det / k);
  return l * l / (4.0 * k * std::log(k));
}

template <typename Value, typename Grad>
double fd_error(std::vector<Matrix> fs, Value value, Grad grad) {
  const auto analytic = grad(fs);
  double worst = 0.0;
  for (std::size_t t = 0; t < fs.size(); ++t) {
    const auto fd = oracle::central_diff(fs[t].data(), [&] { return value(fs); });
    worst = std::max(worst, oracle::rel_error(analytic[t].data(), fd));
  }
  return worst;
}

}  // namespace

TEST_CASE("rho") {
  CHECK(rho_value(std::vector<Matrix>{Matrix(3, 3), Matrix(2, 4)}) == 0.0);
  for (std::size_t k : {2, 3, 5})
    CHECK(rho_value(std::vector<Matrix>{Matrix::identity(k)}) == doctest::Approx(1.0 / (2.0 * k)).epsilon(1e-15));

  Rng rng(201);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Matrix> fs{oracle::random_matrix(rng, 3, 4), oracle::random_matrix(rng, 2, 2),
                                 oracle::random_matrix(rng, 5, 1)};
    CHECK(oracle::rel_diff(rho_value(fs), rho_ref(fs)) <= 1e-14);
    // rho(cA) = c^2 rho(A)
    std::vector<Matrix> scaled = fs;
    for (auto& m : scaled)
      for (double& v : m.data()) v *= 4.0;
    CHECK(rho_value(scaled) == 16.0 * rho_value(fs));
  }
}

TEST_CASE("rho gradient") {
  const auto z = rho_grad(std::vector<Matrix>{Matrix(2, 3)});
  CHECK(count_nonzero(z[0].data()) == 0);
  const auto gi = rho_grad(std::vector<Matrix>{Matrix::identity(2)});
  CHECK(gi[0](0, 0) == 0.25);
  CHECK(gi[0](1, 1) == 0.25);
  CHECK(gi[0](0, 1) == 0.0);

  Rng rng(203);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Matrix> fs{oracle::random_matrix(rng, 3, 2), oracle::random_matrix(rng, 4, 4)};
    CHECK(fd_error(fs, [](auto& f) { return rho_value(f); }, [](auto& f) { return rho_grad(f); }) <= 1e-6);
  }
}

TEST_CASE("tau") {
  const double nu = 1e-4;
  CHECK(tau_value(std::vector<Matrix>{Matrix(2, 2)}, nu) ==
        doctest::Approx(std::pow(std::log(nu), 2) / (8.0 * std::log(2.0))).epsilon(1e-14));
  CHECK(tau_value(std::vector<Matrix>{Matrix::identity(2)}, nu) ==
        doctest::Approx(std::pow(std::log(nu + 0.5), 2) / (8.0 * std::log(2.0))).epsilon(1e-14));
  CHECK_THROWS_AS(tau_value(std::vector<Matrix>{Matrix(1, 4)}, nu), DomainError);
  CHECK_FALSE(tau_applicable(std::vector<Matrix>{Matrix(3, 3), Matrix(1, 4)}));
  CHECK(tau_applicable(std::vector<Matrix>{Matrix(3, 3), Matrix(2, 4)}));

  Rng rng(205);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix a = oracle::random_matrix(rng, 4, 3);
    CHECK(oracle::rel_diff(tau_value(std::vector<Matrix>{a}, nu), tau_ref_tall(a, nu)) <= 1e-10);
    // Wide factors use the k x k Gram matrix A A^T.
    const Matrix at = oracle::transpose(a);
    CHECK(oracle::rel_diff(tau_value(std::vector<Matrix>{at}, nu), tau_ref_tall(a, nu)) <= 1e-10);
  }
  // tau averages over factors.
  const Matrix a = oracle::random_matrix(rng, 4, 3);
  const Matrix b = oracle::random_matrix(rng, 4, 3);
  CHECK(oracle::rel_diff(tau_value(std::vector<Matrix>{a, b}, nu),
                         (tau_ref_tall(a, nu) + tau_ref_tall(b, nu)) / 2.0) <= 1e-10);
}

TEST_CASE("tau gradient") {
  const double nu = 1e-4;
  SUBCASE("stationary when the outer log vanishes") {
    // det(c^2 I_2) / 2 = 1 - nu  <=>  c^4 = 2 (1 - nu)
    const double c = std::pow(2.0 * (1.0 - nu), 0.25);
    Matrix a = Matrix::identity(2);
    for (double& v : a.data()) v *= c;
    const auto g = tau_grad(std::vector<Matrix>{a}, nu);
    for (double v : g[0].data()) CHECK(std::abs(v) < 1e-14);
  }
  SUBCASE("zero factor has zero gradient") {
    const auto g = tau_grad(std::vector<Matrix>{Matrix(3, 3)}, nu);
    CHECK(count_nonzero(g[0].data()) == 0);
  }
  SUBCASE("scaled identities") {
    for (double c : {0.5, 1.0, 2.0}) {
      Matrix a = Matrix::identity(2);
      for (double& v : a.data()) v *= c;
      CHECK(fd_error({a}, [nu](auto& f) { return tau_value(f, nu); }, [nu](auto& f) { return tau_grad(f, nu); }) <=
            1e-5);
    }
  }
  SUBCASE("random factors, square, tall and wide") {
    Rng rng(207);
    for (int trial = 0; trial < 20; ++trial) {
      const std::vector<Matrix> fs{oracle::random_matrix(rng, 3, 3), oracle::random_matrix(rng, 4, 2),
                                   oracle::random_matrix(rng, 2, 5)};
      CHECK(fd_error(fs, [nu](auto& f) { return tau_value(f, nu); }, [nu](auto& f) { return tau_grad(f, nu); }) <=
            1e-5);
    }
  }
}

TEST_CASE("g") {
  const double varpi = 1e-6;
  // Zero matrix, p = 1: each row sums to k2 sqrt(varpi).
  const Matrix z(3, 4);
  CHECK(g_value(z, 1.0, varpi) == doctest::Approx(16.0 * varpi / 2.0).epsilon(1e-12));
  // Scalar: g -> v^2 / 2 as varpi -> 0.
  const Matrix v = Matrix::from_rows({{-3.0}});
  CHECK(g_value(v, 1.0, 1e-12) == doctest::Approx(4.5).epsilon(1e-10));

  Rng rng(209);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_matrix(rng, 3, 4);
    CHECK(oracle::rel_diff(g_value(a, 0.5, varpi), g_ref(a, 0.5, varpi)) <= 1e-14);
    CHECK(oracle::rel_diff(g_value(a, 1.0, varpi), g_ref(a, 1.0, varpi)) <= 1e-14);
    CHECK(g_value(a, 1.0, varpi) >= 0.0);
    // Monotone in each |a_ij| for p = 1.
    Matrix bigger = a;
    const std::size_t i = rng.below(3);
    const std::size_t j = rng.below(4);
    bigger(i, j) *= 1.5;
    CHECK(g_value(bigger, 1.0, varpi) >= g_value(a, 1.0, varpi));
  }
  const std::vector<Matrix> fs{oracle::random_matrix(rng, 2, 3), oracle::random_matrix(rng, 4, 2)};
  CHECK(g_value(fs, 1.0, varpi) == doctest::Approx(g_ref(fs[0], 1.0, varpi) + g_ref(fs[1], 1.0, varpi)));
  CHECK_THROWS_AS(g_value(z, 1.5, varpi), DomainError);
  CHECK_THROWS_AS(g_value(z, 1.0, 0.0), DomainError);
}

TEST_CASE("g gradient") {
  const double varpi = 1e-6;
  CHECK(count_nonzero(g_grad(Matrix(2, 3), 1.0, varpi).data()) == 0);
  const Matrix v = Matrix::from_rows({{0.7}});
  CHECK(g_grad(v, 1.0, 1e-14)(0, 0) == doctest::Approx(0.7).epsilon(1e-10));

  Rng rng(211);
  for (double p : {0.5, 1.0})
    for (int trial = 0; trial < 20; ++trial) {
      const std::vector<Matrix> fs{oracle::random_matrix(rng, 3, 4)};
      CHECK(fd_error(fs, [p, varpi](auto& f) { return g_value(f, p, varpi); },
                     [p, varpi](auto& f) { return g_grad(f, p, varpi); }) <= 1e-5);
    }
}

TEST_CASE("penalties are non-negative") {
  Rng rng(213);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<Matrix> fs{oracle::random_matrix(rng, 3, 3, -3, 3), oracle::random_matrix(rng, 2, 4, -3, 3)};
    CHECK(rho_value(fs) >= 0.0);
    CHECK(tau_value(fs) >= 0.0);
    CHECK(g_value(fs) >= 0.0);
  }
}

TEST_CASE("config validation") {
  RegularizerConfig c;
  CHECK_NOTHROW(c.validate());
  c.mu2 = -1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = {};
  c.nu = 1.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = {};
  c.p = 0.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
}
