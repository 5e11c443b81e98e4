#include "sepnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "sepnet/adversarial.hpp"
#include "sepnet/linalg.hpp"
#include "sepnet/nn.hpp"
#include "sepnet/regularizers.hpp"
#include "sepnet/rng.hpp"
#include "sepnet/separable.hpp"

namespace sepnet {

namespace {

using KronFn = std::function<Matrix(const Matrix&, const Matrix&)>;

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

Matrix random_int_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.data()) v = static_cast<double>(static_cast<int>(rng.below(7)) - 3);
  return m;
}

double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

double max_entry_rel(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_diff(a[i], b[i]));
  return worst;
}

double norm_rel(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// Central differences of f over every entry of `x`, step 1e-6 scaled by magnitude.
std::vector<double> central_differences(std::span<double> x, const std::function<double()>& f) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    const double h = 1e-6 * std::max(1.0, std::abs(orig));
    x[i] = orig + h;
    const double fp = f();
    x[i] = orig - h;
    const double fm = f();
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

class Suite {
 public:
  Suite(const VerifyOptions& opts) : opts_(opts), rng_(opts.seed) {
    kron_ = [fault = opts.inject_kron_fault](const Matrix& a, const Matrix& b) {
      Matrix k = sepnet::kron(a, b);
      if (fault && k.size() > 0) k(0, 0) = -k(0, 0);
      return k;
    };
  }

  std::vector<PropertyResult> run() {
    check("kron-associativity", [this] { return kron_associativity(); });
    check("kron-norm-multiplicativity", [this] { return kron_norm(); });
    check("kron-rank-multiplicativity", [this] { return kron_rank(); });
    check("kron-condition-multiplicativity", [this] { return kron_condition(); });
    check("md-vec-equivalence-integer", [this] { return md_vec_integer(); });
    check("md-vec-equivalence-random", [this] { return md_vec_random(); });
    check("materialize-equivalence", [this] { return materialize_equivalence(); });
    check("sparsity-counting", [this] { return sparsity_counting(); });
    check("gradient-rho", [this] { return grad_rho(); });
    check("gradient-tau", [this] { return grad_tau(); });
    check("gradient-g", [this] { return grad_g(); });
    check("gradient-network", [this] { return grad_network(); });
    check("attack-contracts", [this] { return attack_contracts(); });
    return std::move(results_);
  }

 private:
  // Returns an empty string on success, otherwise a failure description.
  void check(const std::string& name, const std::function<std::string()>& body) {
    PropertyResult r{name, false, {}};
    ran_ = opts_.trials;
    try {
      r.detail = body();
      r.passed = r.detail.empty();
      if (r.passed) r.detail = std::to_string(ran_) + " trials";
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    results_.push_back(std::move(r));
  }

  Matrix chain(const std::vector<Matrix>& fs) {
    Matrix acc = fs[0];
    for (std::size_t i = 1; i < fs.size(); ++i) acc = kron_(acc, fs[i]);
    return acc;
  }

  std::string fail(const std::string& what, std::size_t trial, double value) {
    std::ostringstream os;
    os << what << " at trial " << trial << " (" << value << ")";
    return os.str();
  }

  std::string kron_associativity() {
    for (std::size_t t = 0; t < opts_.trials; ++t) {
      const Matrix a = random_matrix(rng_, 2, 2);
      const Matrix b = random_matrix(rng_, 2, 3);
      const Matrix c = random_matrix(rng_, 3, 2);
      const Matrix left = kron_(kron_(a, b), c);
      const Matrix right = kron_(a, kron_(b, c));
      const double err = max_entry_rel(left.data(), right.data());
      if (err > 1e-14) return fail("associativity violated", t, err);
    }
    return {};
  }

  std::string kron_norm() {
    for (std::size_t t = 0; t < opts_.trials; ++t) {
      const Matrix a = random_matrix(rng_, 2, 3);
      const Matrix b = random_matrix(rng_, 3, 2);
      const Matrix c = random_matrix(rng_, 2, 2);
      const double lhs = frobenius_norm(chain({a, b, c}));
      const double rhs = frobenius_norm(a) * frobenius_norm(b) * frobenius_norm(c);
      if (rel_diff(lhs, rhs) > 1e-12) return fail("norm not multiplicative", t, rel_diff(lhs, rhs));
    }
    return {};
  }

  Matrix random_rank(std::size_t n, std::size_t rank) {
    return matmul(random_matrix(rng_, n, rank), random_matrix(rng_, rank, n));
  }

  std::string kron_rank() {
    for (std::size_t t = 0; t < opts_.trials; ++t) {
      const std::size_t ra = 1 + rng_.below(3);
      const std::size_t rb = 1 + rng_.below(3);
      const Matrix a = random_rank(3, ra);
      const Matrix b = random_rank(3, rb);
      if (numeric_rank(a) != ra || numeric_rank(b) != rb) return fail("constructed rank not recovered", t, 0);
      const std::size_t rk = numeric_rank(kron_(a, b));
      if (rk != ra * rb) return fail("rank not multiplicative", t, static_cast<double>(rk));
    }
    return {};
  }

  std::string kron_condition() {
    std::size_t done = 0;
    while (done < opts_.trials) {
      const Matrix a = random_matrix(rng_, 3, 3);
      const Matrix b = random_matrix(rng_, 3, 3);
      const double ka = condition_number(a);
      const double kb = condition_number(b);
      if (ka > 1e3 || kb > 1e3) continue;
      const double kw = condition_number(kron_(a, b));
      if (rel_diff(kw, ka * kb) > 1e-8) return fail("condition number not multiplicative", done, rel_diff(kw, ka * kb));
      ++done;
    }
    return {};
  }

  SeparableTransform random_transform(std::size_t order, bool integer) {
    std::vector<Matrix> fs;
    for (std::size_t m = 0; m < order; ++m) {
      const std::size_t k = 1 + rng_.below(3);
      const std::size_t i = 1 + rng_.below(3);
      fs.push_back(integer ? random_int_matrix(rng_, k, i) : random_matrix(rng_, k, i));
    }
    return SeparableTransform(std::move(fs));
  }

  Tensor random_input(const Shape& shape, bool integer) {
    Tensor x(shape);
    for (double& v : x.data())
      v = integer ? static_cast<double>(static_cast<int>(rng_.below(9)) - 4) : rng_.uniform(-1, 1);
    return x;
  }

  std::string md_vec_integer() {
    for (std::size_t t = 0; t < opts_.trials; ++t) {
      const auto tr = random_transform(1 + t % 3, true);
      const Tensor x = random_input(tr.input_shape(), true);
      if (forward_vec(tr, vec(x)) != vec(forward_md(tr, x))) return fail("MD and vec paths differ", t, 0);
    }
    return {};
  }

  std::string md_vec_random() {
    for (std::size_t t = 0; t < opts_.trials; ++t) {
      const auto tr = random_transform(1 + t % 3, false);
      const Tensor x = random_input(tr.input_shape(), false);
      const double err = norm_rel(forward_vec(tr, vec(x)), vec(forward_md(tr, x)));
      if (err > 1e-12) return fail("MD and vec paths differ", t, err);
    }
    return {};
  }

  std::string materialize_equivalence() {
    for (std::size_t t = 0; t < opts_.trials; ++t) {
      const auto tr = random_transform(1 + t % 3, true);
      std::vector<Matrix> reversed(tr.factors().rbegin(), tr.factors().rend());
      const Matrix w = chain(reversed);
      const Tensor x = random_input(tr.input_shape(), true);
      if (matvec(w, vec(x)) != vec(forward_md(tr, x))) return fail("Kronecker matrix disagrees with forward pass", t, 0);
    }
    return {};
  }

  std::string sparsity_counting() {
    for (std::size_t t = 0; t < opts_.trials; ++t) {
      Matrix a = random_matrix(rng_, 2 + rng_.below(2), 2 + rng_.below(2), 0.5, 2.0);
      Matrix b = random_matrix(rng_, 2 + rng_.below(2), 2 + rng_.below(2), 0.5, 2.0);
      for (double& v : a.data())
        if (rng_.uniform() < 0.4) v = 0.0;
      for (double& v : b.data())
        if (rng_.uniform() < 0.4) v = 0.0;
      const Matrix w = kron_(a, b);
      const std::size_t nnz_a = count_nonzero(a.data());
      const std::size_t nnz_b = count_nonzero(b.data());
      const std::size_t nnz_w = count_nonzero(w.data());
      if (nnz_w != nnz_a * nnz_b) return fail("nnz(A (x) B) != nnz(A) nnz(B)", t, static_cast<double>(nnz_w));
      const std::size_t za = a.size() - nnz_a;
      const std::size_t zb = b.size() - nnz_b;
      const std::size_t predicted = za * b.size() + zb * a.size() - za * zb;
      if (w.size() - nnz_w != predicted) return fail("zero-count formula mismatch", t, static_cast<double>(predicted));
    }
    return {};
  }

  std::vector<Matrix> random_factor_list(bool square_ish) {
    std::vector<Matrix> fs;
    const std::size_t n = 1 + rng_.below(3);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = 2 + rng_.below(2);
      const std::size_t r = square_ish ? c + rng_.below(2) : 1 + rng_.below(4);
      fs.push_back(random_matrix(rng_, r, c));
    }
    return fs;
  }

  std::string grad_list_check(const std::vector<Matrix>& start,
                              const std::function<double(std::span<const Matrix>)>& value,
                              const std::function<std::vector<Matrix>(std::span<const Matrix>)>& grad,
                              double tol, std::size_t trial) {
    std::vector<Matrix> fs = start;
    const auto analytic = grad(fs);
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const auto fd = central_differences(fs[k].data(), [&] { return value(fs); });
      const double err = norm_rel(analytic[k].data(), fd);
      if (err > tol) return fail("gradient disagrees with finite differences", trial, err);
    }
    return {};
  }

  std::string grad_rho() {
    ran_ = std::min<std::size_t>(opts_.trials, 20 + opts_.trials / 5);
    for (std::size_t t = 0; t < ran_; ++t) {
      auto msg = grad_list_check(random_factor_list(false), [](auto f) { return rho_value(f); },
                                 [](auto f) { return rho_grad(f); }, 1e-5, t);
      if (!msg.empty()) return msg;
    }
    return {};
  }

  std::string grad_tau() {
    ran_ = std::min<std::size_t>(opts_.trials, 20 + opts_.trials / 5);
    for (std::size_t t = 0; t < ran_; ++t) {
      auto msg = grad_list_check(random_factor_list(true), [](auto f) { return tau_value(f); },
                                 [](auto f) { return tau_grad(f); }, 1e-5, t);
      if (!msg.empty()) return msg;
    }
    return {};
  }

  std::string grad_g() {
    ran_ = std::min<std::size_t>(opts_.trials, 20 + opts_.trials / 5);
    for (std::size_t t = 0; t < ran_; ++t) {
      const double p = t % 2 ? 1.0 : 0.5;
      auto msg = grad_list_check(random_factor_list(false), [p](auto f) { return g_value(f, p); },
                                 [p](auto f) { return g_grad(f, p); }, 1e-5, t);
      if (!msg.empty()) return msg;
    }
    return {};
  }

  SepMlp random_model() {
    const std::size_t order = 1 + rng_.below(3);
    LayerSpec l1{{}, Activation::Relu, true};
    LayerSpec l2{{}, Activation::None, true};
    std::size_t hidden = 1;
    for (std::size_t m = 0; m < order; ++m) {
      const std::size_t k = 2 + rng_.below(2);
      l1.factors.push_back({k, 2 + rng_.below(2)});
      hidden *= k;
    }
    const std::size_t classes = 2 + rng_.below(3);
    l2.factors.push_back({classes, hidden});
    SepMlp model = init_model({{l1, l2}, classes}, rng_);
    for (auto& layer : model.layers())
      if (layer.transform.bias())
        for (double& v : *layer.transform.bias()) v = rng_.uniform(-0.5, 0.5);
    return model;
  }

  std::string grad_network() {
    const std::size_t trials = std::min<std::size_t>(opts_.trials, 20 + opts_.trials / 10);
    ran_ = 0;
    for (std::size_t t = 0; ran_ < trials && t < 20 * trials; ++t) {
      SepMlp model = random_model();
      Tensor x(model.input_shape());
      for (double& v : x.data()) v = rng_.uniform(0, 1);
      const std::size_t label = rng_.below(model.classes());
      const auto fwd = forward(model, x);
      bool near_kink = false;
      for (const auto& pre : fwd.cache.pre_activations)
        for (double v : pre.data()) near_kink |= std::abs(v) < 1e-4;
      if (near_kink) continue;
      const auto bw = backward(model, fwd.cache, label);
      const auto analytic = gradient_views(bw.params);
      auto params = parameter_views(model);
      for (std::size_t k = 0; k < params.size(); ++k) {
        const auto fd = central_differences(
            params[k], [&] { return cross_entropy(predict_logits(model, x), label); });
        const double err = norm_rel(analytic[k], fd);
        if (err > 1e-4) return fail("backprop disagrees with finite differences", t, err);
      }
      const auto fdx = central_differences(
          x.data(), [&] { return cross_entropy(predict_logits(model, x), label); });
      const double err = norm_rel(bw.input.data(), fdx);
      if (err > 1e-4) return fail("input gradient disagrees with finite differences", t, err);
      ++ran_;
    }
    if (ran_ < trials) return fail("too few points away from ReLU kinks", ran_, 0);
    return {};
  }

  std::string attack_contracts() {
    const std::size_t trials = std::min<std::size_t>(opts_.trials, 50);
    ran_ = trials;
    for (std::size_t t = 0; t < trials; ++t) {
      const SepMlp model = random_model();
      Tensor x(model.input_shape());
      for (double& v : x.data()) v = rng_.uniform(0, 1);
      const std::size_t label = rng_.below(model.classes());
      const double eps = rng_.uniform(0.0, 0.2);
      const Tensor xf = fgsm(model, x, label, AttackConfig::fgsm(eps));
      const Tensor xp = pgd(model, x, label, AttackConfig::pgd(eps, 5, eps / 3.0));
      for (const Tensor* adv : {&xf, &xp}) {
        if (linf_distance(*adv, x) > eps + 1e-12) return fail("attack left the eps-ball", t, linf_distance(*adv, x));
        for (double v : adv->data())
          if (v < 0.0 || v > 1.0) return fail("attack left the input range", t, v);
      }
      if (pgd(model, x, label, AttackConfig::pgd(eps, 1, eps)) != xf)
        return fail("single-step PGD differs from FGSM", t, eps);
    }
    return {};
  }

  VerifyOptions opts_;
  Rng rng_;
  KronFn kron_;
  std::vector<PropertyResult> results_;
  std::size_t ran_ = 0;  // trials actually evaluated by the current check
};

}  // namespace

std::vector<PropertyResult> run_verification(const VerifyOptions& opts) { return Suite(opts).run(); }

}  // namespace sepnet
