#pragma once

// Regularized training objective, its adversarial (min-max) variant, the
// Adam training loop, evaluation metrics and magnitude pruning.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sepnet/adversarial.hpp"
#include "sepnet/data.hpp"
#include "sepnet/nn.hpp"
#include "sepnet/regularizers.hpp"

namespace sepnet {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  RegularizerConfig reg;
  /// Present => adversarial training on attacked inputs; absent => plain.
  std::optional<AttackConfig> attack;
  AdamConfig adam;
  std::uint64_t seed = 1;
  double prune_threshold = 0.0;
  /// Evaluate NA (and RA when an attack is configured) after every epoch.
  bool eval_each_epoch = true;

  void validate() const;
};

struct LossParts {
  double total = 0.0;
  double data = 0.0;  // mean cross-entropy over the batch
  double rho = 0.0;
  std::optional<double> tau;  // absent when some factor has min extent < 2
  double g = 0.0;
};

struct EpochStats {
  double total_loss = 0.0;
  double data_loss = 0.0;
  double rho = 0.0;
  std::optional<double> tau;
  double g = 0.0;
  double natural_accuracy = 0.0;
  std::optional<double> robust_accuracy;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double structural_cr = 1.0;
  double pruned_cr = 1.0;
  std::size_t pruned_entries = 0;
  std::vector<double> layer_condition;
  std::optional<double> accuracy_variance;
};

/// Regularizer part of the objective on the model's current factors.
LossParts regularizer_parts(const SepMlp& model, const RegularizerConfig& reg);
/// mu1 grad rho + mu2 grad tau + mu3 grad g, laid out like the model (bias
/// gradients are zero).
GradientSet regularizer_gradient(const SepMlp& model, const RegularizerConfig& reg);

LossParts rlst_loss(const SepMlp& model, std::span<const Sample> batch, const RegularizerConfig& reg);
LossParts arlst_loss(const SepMlp& model, std::span<const Sample> batch, const RegularizerConfig& reg,
                     const AttackConfig& attack);

struct DataGradient {
  GradientSet grads;   // mean over the batch
  double loss = 0.0;   // mean cross-entropy over the batch
};

/// Mean data-term gradient; each sample is attacked first when `attack` is set.
DataGradient data_gradient(const SepMlp& model, std::span<const Sample> batch,
                           const std::optional<AttackConfig>& attack);

/// Full objective gradient: data term plus the weighted regularizer gradients.
GradientSet objective_gradient(const SepMlp& model, std::span<const Sample> batch,
                               const RegularizerConfig& reg, const std::optional<AttackConfig>& attack);

/// Runs cfg.epochs epochs of seeded shuffling, minibatch (adversarial)
/// gradients and Adam updates, then optional pruning. Deterministic given
/// the config.
TrainReport train(SepMlp& model, const Dataset& data, const TrainConfig& cfg);

/// Accuracy in percent on clean inputs, or on per-sample attacked inputs.
double evaluate(const SepMlp& model, const Dataset& data,
                const std::optional<AttackConfig>& attack = std::nullopt);

struct PruneResult {
  std::size_t zeroed = 0;        // entries newly set to zero
  double achieved_cr = 0.0;      // dense-equivalent / remaining; +inf when nothing remains
  double structural_cr = 0.0;
};

/// Zeroes factor entries with |a| < threshold. Biases are never pruned and
/// count towards the remaining parameters.
PruneResult prune(SepMlp& model, double threshold);

double structural_compression(const SepMlp& model);
double pruned_compression(const SepMlp& model);

/// Per layer prod_t kappa(A_t); +inf for a layer with a rank-deficient factor.
std::vector<double> condition_report(const SepMlp& model);

/// Population variance; nullopt for fewer than two values.
std::optional<double> population_variance(std::span<const double> values);

/// Number of factor entries with |a| < threshold.
std::size_t count_small_entries(const SepMlp& model, double threshold);

}  // namespace sepnet
