#pragma once

// l_inf adversarial examples: FGSM and PGD with input-range clipping.

#include <cstdint>
#include <optional>
#include <string>

#include "sepnet/nn.hpp"
#include "sepnet/tensor.hpp"

namespace sepnet {

enum class AttackKind { Fgsm, Pgd };

std::string to_string(AttackKind k);
AttackKind parse_attack_kind(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::Fgsm;
  double epsilon = 0.0;
  int steps = 1;            // PGD only
  double step_size = 0.0;   // PGD only
  double lo = 0.0;
  double hi = 1.0;
  /// Seed for an optional uniform start inside the ball (PGD only).
  std::optional<std::uint64_t> random_start;

  /// Throws DomainError for epsilon < 0, epsilon > hi - lo, steps < 1 or a
  /// non-positive step size on PGD.
  void validate() const;
  /// True when steps * step_size cannot reach epsilon.
  bool under_budget() const;

  static AttackConfig fgsm(double eps) {
    AttackConfig c;
    c.epsilon = eps;
    c.step_size = eps;
    return c;
  }
  static AttackConfig pgd(double eps, int steps, double step_size) {
    AttackConfig c;
    c.kind = AttackKind::Pgd;
    c.epsilon = eps;
    c.steps = steps;
    c.step_size = step_size;
    return c;
  }
  /// epsilon = 0.031, 10 steps of 0.0078.
  static AttackConfig pgd_defaults() { return pgd(0.031, 10, 0.0078); }
  /// epsilon = 0.015.
  static AttackConfig fgsm_defaults() { return fgsm(0.015); }
};

/// d cross_entropy(forward(x), label) / dx.
Tensor input_gradient(const SepMlp& model, const Tensor& x, std::size_t label);

/// clip(x + eps * sign(grad), lo, hi) with sign(0) = 0.
Tensor fgsm(const SepMlp& model, const Tensor& x, std::size_t label, const AttackConfig& cfg);

/// Iterates x <- proj_ball(clip(x + s * sign(grad), lo, hi)) from the clean
/// input (or a seeded random start). Every iterate stays in both the
/// eps-ball around x and [lo, hi].
Tensor pgd(const SepMlp& model, const Tensor& x, std::size_t label, const AttackConfig& cfg);

/// Dispatch on cfg.kind.
Tensor attack(const SepMlp& model, const Tensor& x, std::size_t label, const AttackConfig& cfg);

double linf_distance(const Tensor& a, const Tensor& b);

}  // namespace sepnet
