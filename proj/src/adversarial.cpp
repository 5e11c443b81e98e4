#include "sepnet/adversarial.hpp"

#include <algorithm>
#include <cmath>

#include "sepnet/error.hpp"
#include "sepnet/rng.hpp"

namespace sepnet {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::string to_string(AttackKind k) { return k == AttackKind::Pgd ? "pgd" : "fgsm"; }

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "fgsm") return AttackKind::Fgsm;
  if (name == "pgd") return AttackKind::Pgd;
  throw DomainError("unknown attack '" + name + "' (expected fgsm or pgd)");
}

void AttackConfig::validate() const {
  if (!(hi > lo)) throw DomainError("attack input range must satisfy lo < hi");
  if (!(epsilon >= 0.0)) throw DomainError("attack epsilon must be >= 0");
  if (epsilon > hi - lo) throw DomainError("attack epsilon exceeds the input range");
  if (kind == AttackKind::Pgd) {
    if (steps < 1) throw DomainError("PGD needs at least one step");
    if (!(step_size > 0.0)) throw DomainError("PGD step size must be > 0");
  }
}

bool AttackConfig::under_budget() const {
  return kind == AttackKind::Pgd && static_cast<double>(steps) * step_size < epsilon;
}

Tensor input_gradient(const SepMlp& model, const Tensor& x, std::size_t label) {
  const auto fwd = forward(model, x);
  return backward(model, fwd.cache, label, /*want_params=*/false).input;
}

Tensor fgsm(const SepMlp& model, const Tensor& x, std::size_t label, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0) return x;
  const Tensor g = input_gradient(model, x, label);
  Tensor out = x;
  auto od = out.data();
  const auto gd = g.data();
  for (std::size_t i = 0; i < od.size(); ++i)
    od[i] = std::clamp(od[i] + cfg.epsilon * sign(gd[i]), cfg.lo, cfg.hi);
  return out;
}

Tensor pgd(const SepMlp& model, const Tensor& x, std::size_t label, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0) return x;
  const auto x0 = x.data();
  Tensor cur = x;
  auto project = [&](std::span<double> d) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = std::clamp(d[i], x0[i] - cfg.epsilon, x0[i] + cfg.epsilon);
      d[i] = std::clamp(d[i], cfg.lo, cfg.hi);
    }
  };
  if (cfg.random_start) {
    Rng rng(*cfg.random_start);
    for (double& v : cur.data()) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
    project(cur.data());
  }
  for (int it = 0; it < cfg.steps; ++it) {
    const Tensor g = input_gradient(model, cur, label);
    auto d = cur.data();
    const auto gd = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += cfg.step_size * sign(gd[i]);
    project(d);
  }
  return cur;
}

Tensor attack(const SepMlp& model, const Tensor& x, std::size_t label, const AttackConfig& cfg) {
  return cfg.kind == AttackKind::Pgd ? pgd(model, x, label, cfg) : fgsm(model, x, label, cfg);
}

double linf_distance(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("linf_distance: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace sepnet
