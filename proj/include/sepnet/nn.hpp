#pragma once

// Feed-forward classifiers whose linear layers are separable transforms,
// with manual backpropagation through the n-mode product chain and Adam.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepnet/rng.hpp"
#include "sepnet/separable.hpp"
#include "sepnet/tensor.hpp"

namespace sepnet {

enum class Activation { None, Relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct Layer {
  SeparableTransform transform;
  Activation activation = Activation::None;

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Layers are chained through vec(): the output of layer l is reshaped to
/// the input shape of layer l+1, so adjacent layers only need equal element
/// counts. The logits are vec() of the last layer's output.
class SepMlp {
 public:
  SepMlp() = default;
  /// Throws ShapeError when layers do not chain or the last layer's output
  /// size differs from `classes`.
  SepMlp(std::vector<Layer> layers, std::size_t classes);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  std::size_t classes() const noexcept { return classes_; }
  Shape input_shape() const { return layers_.front().transform.input_shape(); }

  /// Every factor of every layer, in layer-major order.
  std::vector<Matrix> all_factors() const;
  /// Count of factor and bias entries.
  std::size_t parameter_count() const;
  /// Dense-equivalent parameter count: sum over layers of prod(K) prod(I) + bias.
  std::size_t dense_parameter_count() const;

  /// Order-sensitive hash of every parameter bit pattern.
  std::uint64_t fingerprint() const;

  friend bool operator==(const SepMlp&, const SepMlp&) = default;

 private:
  std::vector<Layer> layers_;
  std::size_t classes_ = 0;
};

// --- architecture descriptors ------------------------------------------------

struct FactorShape {
  std::size_t rows = 0;  // K
  std::size_t cols = 0;  // I
  friend bool operator==(const FactorShape&, const FactorShape&) = default;
};

struct LayerSpec {
  std::vector<FactorShape> factors;
  Activation activation = Activation::None;
  bool bias = true;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchSpec {
  std::vector<LayerSpec> layers;
  std::size_t classes = 0;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// Text form: layers separated by ';', factors by ',', each factor "KxI",
/// optional ":relu" / ":none" suffix and "!nobias" flag, e.g.
/// "6x6,6x6:relu;2x36". Classes are the last layer's output size.
ArchSpec parse_architecture(const std::string& text);
std::string format_architecture(const ArchSpec& spec);
ArchSpec architecture_of(const SepMlp& model);

/// Factor entries uniform in +-sqrt(6 / (K_t + I_t)); each layer's factors
/// are then rescaled by the T-th root of 1 / prod_t (||A_t||_F / sqrt(I_t))
/// so the layer has roughly unit forward gain. Biases start at zero.
SepMlp init_model(const ArchSpec& spec, Rng& rng);

// --- forward / backward ------------------------------------------------------

struct ForwardCache {
  std::uint64_t fingerprint = 0;
  std::vector<Tensor> inputs;           // per layer, reshaped to its input shape
  std::vector<Tensor> pre_activations;  // per layer
  std::vector<double> logits;
};

struct ForwardResult {
  std::vector<double> logits;
  ForwardCache cache;
};

/// Throws ShapeError when x does not match the first layer's input shape.
ForwardResult forward(const SepMlp& model, const Tensor& x);
std::vector<double> predict_logits(const SepMlp& model, const Tensor& x);
std::size_t predict(const SepMlp& model, const Tensor& x);

/// -log softmax(logits)[label] via log-sum-exp.
double cross_entropy(std::span<const double> logits, std::size_t label);
/// softmax(logits) - onehot(label): gradient of cross_entropy wrt logits.
std::vector<double> cross_entropy_grad(std::span<const double> logits, std::size_t label);

struct LayerGrad {
  std::vector<Matrix> factors;
  std::optional<std::vector<double>> bias;
};

struct GradientSet {
  std::vector<LayerGrad> layers;

  static GradientSet zeros_like(const SepMlp& model);
  /// this += scale * other; shapes must mirror.
  void add_scaled(const GradientSet& other, double scale);
  void scale(double s);
};

struct BackwardResult {
  GradientSet params;
  Tensor input;  // d loss / d x
};

/// Gradients of cross_entropy(forward(x), label). Throws DomainError for a
/// stale cache (model changed since forward) or a bad label.
BackwardResult backward(const SepMlp& model, const ForwardCache& cache, std::size_t label,
                        bool want_params = true);

// --- optimizer ---------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

std::vector<std::span<double>> parameter_views(SepMlp& model);
std::vector<std::span<const double>> gradient_views(const GradientSet& grads);

/// One bias-corrected Adam update. Moments are allocated on first use;
/// throws ShapeError when param and grad views do not mirror each other.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads);
void adam_step(AdamState& state, SepMlp& model, const GradientSet& grads);

}  // namespace sepnet
