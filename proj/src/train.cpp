#include "sepnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sepnet/error.hpp"
#include "sepnet/linalg.hpp"

namespace sepnet {

void TrainConfig::validate() const {
  if (batch_size == 0) throw DomainError("batch size must be positive");
  if (prune_threshold < 0.0) throw DomainError("prune threshold must be >= 0");
  reg.validate();
  if (attack) attack->validate();
  if (!(adam.lr > 0.0)) throw DomainError("learning rate must be > 0");
}

LossParts regularizer_parts(const SepMlp& model, const RegularizerConfig& reg) {
  const auto factors = model.all_factors();
  LossParts p;
  p.rho = rho_value(factors);
  if (tau_applicable(factors)) p.tau = tau_value(factors, reg.nu);
  else if (reg.mu2 != 0.0) tau_value(factors, reg.nu);  // raises the domain error
  p.g = g_value(factors, reg.p, reg.varpi);
  p.total = reg.mu1 * p.rho + reg.mu2 * p.tau.value_or(0.0) + reg.mu3 * p.g;
  return p;
}

GradientSet regularizer_gradient(const SepMlp& model, const RegularizerConfig& reg) {
  GradientSet out = GradientSet::zeros_like(model);
  const auto factors = model.all_factors();
  auto accumulate = [&](const std::vector<Matrix>& grads, double weight) {
    std::size_t idx = 0;
    for (auto& lg : out.layers)
      for (auto& f : lg.factors) {
        auto dst = f.data();
        auto src = grads[idx++].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
      }
  };
  if (reg.mu1 != 0.0) accumulate(rho_grad(factors), reg.mu1);
  if (reg.mu2 != 0.0) accumulate(tau_grad(factors, reg.nu), reg.mu2);
  if (reg.mu3 != 0.0) accumulate(g_grad(factors, reg.p, reg.varpi), reg.mu3);
  return out;
}

namespace {

double mean_cross_entropy(const SepMlp& model, std::span<const Sample> batch,
                          const std::optional<AttackConfig>& attack) {
  if (batch.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : batch) {
    const Tensor x = attack ? sepnet::attack(model, s.x, s.label, *attack) : s.x;
    acc += cross_entropy(predict_logits(model, x), s.label);
  }
  return acc / static_cast<double>(batch.size());
}

}  // namespace

LossParts rlst_loss(const SepMlp& model, std::span<const Sample> batch, const RegularizerConfig& reg) {
  LossParts p = regularizer_parts(model, reg);
  p.data = mean_cross_entropy(model, batch, std::nullopt);
  p.total += p.data;
  return p;
}

LossParts arlst_loss(const SepMlp& model, std::span<const Sample> batch, const RegularizerConfig& reg,
                     const AttackConfig& attack) {
  attack.validate();
  LossParts p = regularizer_parts(model, reg);
  p.data = mean_cross_entropy(model, batch, attack);
  p.total += p.data;
  return p;
}

DataGradient data_gradient(const SepMlp& model, std::span<const Sample> batch,
                           const std::optional<AttackConfig>& attack) {
  DataGradient out;
  out.grads = GradientSet::zeros_like(model);
  if (batch.empty()) return out;
  for (const auto& s : batch) {
    const Tensor x = attack ? sepnet::attack(model, s.x, s.label, *attack) : s.x;
    const auto fwd = forward(model, x);
    out.loss += cross_entropy(fwd.logits, s.label);
    out.grads.add_scaled(backward(model, fwd.cache, s.label).params, 1.0);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.grads.scale(inv);
  out.loss *= inv;
  return out;
}

GradientSet objective_gradient(const SepMlp& model, std::span<const Sample> batch,
                               const RegularizerConfig& reg, const std::optional<AttackConfig>& attack) {
  GradientSet g = data_gradient(model, batch, attack).grads;
  g.add_scaled(regularizer_gradient(model, reg), 1.0);
  return g;
}

TrainReport train(SepMlp& model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.epochs > 0 && data.empty()) throw DomainError("cannot train on an empty dataset");
  for (const auto& s : data.samples)
    if (s.x.shape() != model.input_shape()) throw ShapeError("dataset sample shape does not match the model");

  TrainReport report;
  AdamState adam;
  adam.config = cfg.adam;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    EpochStats st;
    std::size_t n_batches = 0;
    double tau_sum = 0.0;
    bool tau_defined = true;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data.samples[order[i]]);

      const LossParts reg = regularizer_parts(model, cfg.reg);
      DataGradient dg = data_gradient(model, batch, cfg.attack);
      dg.grads.add_scaled(regularizer_gradient(model, cfg.reg), 1.0);
      adam_step(adam, model, dg.grads);

      st.data_loss += dg.loss;
      st.total_loss += dg.loss + reg.total;
      st.rho += reg.rho;
      st.g += reg.g;
      if (reg.tau) tau_sum += *reg.tau;
      else tau_defined = false;
      ++n_batches;
    }
    const double inv = 1.0 / static_cast<double>(n_batches);
    st.data_loss *= inv;
    st.total_loss *= inv;
    st.rho *= inv;
    st.g *= inv;
    if (tau_defined) st.tau = tau_sum * inv;
    if (cfg.eval_each_epoch) {
      st.natural_accuracy = evaluate(model, data);
      if (cfg.attack) st.robust_accuracy = evaluate(model, data, cfg.attack);
    }
    report.epochs.push_back(st);
  }

  if (cfg.prune_threshold > 0.0) report.pruned_entries = prune(model, cfg.prune_threshold).zeroed;
  report.structural_cr = structural_compression(model);
  report.pruned_cr = pruned_compression(model);
  report.layer_condition = condition_report(model);
  return report;
}

double evaluate(const SepMlp& model, const Dataset& data, const std::optional<AttackConfig>& attack) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : data.samples) {
    const Tensor x = attack ? sepnet::attack(model, s.x, s.label, *attack) : s.x;
    if (predict(model, x) == s.label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

double structural_compression(const SepMlp& model) {
  return compression_ratio(model.dense_parameter_count(), model.parameter_count());
}

double pruned_compression(const SepMlp& model) {
  std::size_t remaining = 0;
  for (const auto& layer : model.layers()) {
    for (const auto& f : layer.transform.factors()) remaining += count_nonzero(f.data());
    if (layer.transform.bias()) remaining += layer.transform.bias()->size();
  }
  if (remaining == 0) return std::numeric_limits<double>::infinity();
  return compression_ratio(model.dense_parameter_count(), remaining);
}

PruneResult prune(SepMlp& model, double threshold) {
  if (threshold < 0.0) throw DomainError("prune threshold must be >= 0");
  PruneResult r;
  for (auto& layer : model.layers())
    for (auto& f : layer.transform.factors())
      for (double& v : f.data())
        if (v != 0.0 && std::abs(v) < threshold) {
          v = 0.0;
          ++r.zeroed;
        }
  r.achieved_cr = pruned_compression(model);
  r.structural_cr = structural_compression(model);
  return r;
}

std::vector<double> condition_report(const SepMlp& model) {
  std::vector<double> out;
  for (const auto& layer : model.layers()) {
    double kappa = 1.0;
    try {
      for (const auto& f : layer.transform.factors()) kappa *= condition_number(f);
    } catch (const RankDeficientError&) {
      kappa = std::numeric_limits<double>::infinity();
    }
    out.push_back(kappa);
  }
  return out;
}

std::optional<double> population_variance(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / n;
}

std::size_t count_small_entries(const SepMlp& model, double threshold) {
  std::size_t n = 0;
  for (const auto& layer : model.layers())
    for (const auto& f : layer.transform.factors())
      for (double v : f.data())
        if (std::abs(v) < threshold) ++n;
  return n;
}

}  // namespace sepnet
