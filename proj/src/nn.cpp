#include "sepnet/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "sepnet/error.hpp"

namespace sepnet {

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "none"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "none" || name.empty()) return Activation::None;
  throw DomainError("unknown activation '" + name + "'");
}

SepMlp::SepMlp(std::vector<Layer> layers, std::size_t classes)
    : layers_(std::move(layers)), classes_(classes) {
  if (layers_.empty()) throw ShapeError("model needs at least one layer");
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
    if (layers_[l].transform.output_size() != layers_[l + 1].transform.input_size())
      throw ShapeError("layer " + std::to_string(l) + " output size " +
                       std::to_string(layers_[l].transform.output_size()) +
                       " does not feed layer " + std::to_string(l + 1) + " input size " +
                       std::to_string(layers_[l + 1].transform.input_size()));
  if (layers_.back().transform.output_size() != classes_)
    throw ShapeError("final layer produces " +
                     std::to_string(layers_.back().transform.output_size()) +
                     " logits for " + std::to_string(classes_) + " classes");
}

std::vector<Matrix> SepMlp::all_factors() const {
  std::vector<Matrix> out;
  for (const auto& layer : layers_)
    for (const auto& f : layer.transform.factors()) out.push_back(f);
  return out;
}

std::size_t SepMlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += param_count(layer.transform).separable;
  return n;
}

std::size_t SepMlp::dense_parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += param_count(layer.transform).dense;
  return n;
}

std::uint64_t SepMlp::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t x) {
    h ^= x;
    h *= 0x100000001b3ULL;
  };
  for (const auto& layer : layers_) {
    for (const auto& f : layer.transform.factors()) {
      mix(f.rows());
      mix(f.cols());
      for (double v : f.data()) mix(std::bit_cast<std::uint64_t>(v));
    }
    if (layer.transform.bias())
      for (double v : *layer.transform.bias()) mix(std::bit_cast<std::uint64_t>(v));
    mix(static_cast<std::uint64_t>(layer.activation));
  }
  return h;
}

// --- architecture --------------------------------------------------------------

namespace {

std::size_t parse_extent(const std::string& s, const std::string& context) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw DomainError("bad extent '" + s + "' in architecture '" + context + "'");
  }
  if (pos != s.size() || v == 0)
    throw DomainError("bad extent '" + s + "' in architecture '" + context + "'");
  return static_cast<std::size_t>(v);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

ArchSpec parse_architecture(const std::string& text) {
  ArchSpec spec;
  for (const auto& raw_layer : split(text, ';')) {
    std::string layer_text = trim(raw_layer);
    if (layer_text.empty()) throw DomainError("empty layer in architecture '" + text + "'");
    LayerSpec layer;
    if (auto bang = layer_text.find('!'); bang != std::string::npos) {
      if (trim(layer_text.substr(bang + 1)) != "nobias")
        throw DomainError("unknown layer flag in '" + layer_text + "'");
      layer.bias = false;
      layer_text = trim(layer_text.substr(0, bang));
    }
    if (auto colon = layer_text.find(':'); colon != std::string::npos) {
      layer.activation = parse_activation(trim(layer_text.substr(colon + 1)));
      layer_text = trim(layer_text.substr(0, colon));
    }
    for (const auto& raw_factor : split(layer_text, ',')) {
      const std::string f = trim(raw_factor);
      const auto x = f.find('x');
      if (x == std::string::npos) throw DomainError("factor '" + f + "' is not of the form KxI");
      layer.factors.push_back({parse_extent(f.substr(0, x), text), parse_extent(f.substr(x + 1), text)});
    }
    spec.layers.push_back(std::move(layer));
  }
  if (spec.layers.empty()) throw DomainError("architecture has no layers");
  std::size_t out = 1;
  for (const auto& f : spec.layers.back().factors) out *= f.rows;
  spec.classes = out;
  return spec;
}

std::string format_architecture(const ArchSpec& spec) {
  std::string out;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    if (l) out += ";";
    const auto& layer = spec.layers[l];
    for (std::size_t t = 0; t < layer.factors.size(); ++t) {
      if (t) out += ",";
      out += std::to_string(layer.factors[t].rows) + "x" + std::to_string(layer.factors[t].cols);
    }
    out += ":" + to_string(layer.activation);
    if (!layer.bias) out += "!nobias";
  }
  return out;
}

ArchSpec architecture_of(const SepMlp& model) {
  ArchSpec spec;
  spec.classes = model.classes();
  for (const auto& layer : model.layers()) {
    LayerSpec ls;
    ls.activation = layer.activation;
    ls.bias = layer.transform.has_bias();
    for (const auto& f : layer.transform.factors()) ls.factors.push_back({f.rows(), f.cols()});
    spec.layers.push_back(std::move(ls));
  }
  return spec;
}

SepMlp init_model(const ArchSpec& spec, Rng& rng) {
  std::vector<Layer> layers;
  for (const auto& ls : spec.layers) {
    if (ls.factors.empty()) throw ShapeError("layer without factors");
    std::vector<Matrix> factors;
    double gain = 1.0;
    for (const auto& fs : ls.factors) {
      Matrix a(fs.rows, fs.cols);
      const double limit = std::sqrt(6.0 / static_cast<double>(fs.rows + fs.cols));
      for (double& v : a.data()) v = rng.uniform(-limit, limit);
      gain *= frobenius_norm(a) / std::sqrt(static_cast<double>(fs.cols));
      factors.push_back(std::move(a));
    }
    if (gain > 0.0) {
      const double s = std::pow(1.0 / gain, 1.0 / static_cast<double>(factors.size()));
      for (auto& a : factors)
        for (double& v : a.data()) v *= s;
    }
    std::optional<std::vector<double>> bias;
    if (ls.bias) {
      std::size_t n = 1;
      for (const auto& fs : ls.factors) n *= fs.rows;
      bias = std::vector<double>(n, 0.0);
    }
    layers.push_back({SeparableTransform(std::move(factors), std::move(bias)), ls.activation});
  }
  std::size_t classes = spec.classes;
  if (classes == 0) classes = layers.back().transform.output_size();
  return SepMlp(std::move(layers), classes);
}

// --- forward / backward ----------------------------------------------------------

ForwardResult forward(const SepMlp& model, const Tensor& x) {
  ForwardResult res;
  auto& cache = res.cache;
  cache.fingerprint = model.fingerprint();
  if (x.shape() != model.input_shape()) throw ShapeError("forward: input shape mismatch");
  Tensor h = x;
  for (const auto& layer : model.layers()) {
    Tensor in = h.reshaped(layer.transform.input_shape());
    Tensor y = forward_md(layer.transform, in);
    cache.inputs.push_back(std::move(in));
    h = y;
    if (layer.activation == Activation::Relu)
      for (double& v : h.data()) v = std::max(v, 0.0);
    cache.pre_activations.push_back(std::move(y));
  }
  cache.logits = vec(h);
  res.logits = cache.logits;
  return res;
}

std::vector<double> predict_logits(const SepMlp& model, const Tensor& x) {
  if (x.shape() != model.input_shape()) throw ShapeError("predict: input shape mismatch");
  Tensor h = x;
  for (const auto& layer : model.layers()) {
    h = forward_md(layer.transform, h.reshaped(layer.transform.input_shape()));
    if (layer.activation == Activation::Relu)
      for (double& v : h.data()) v = std::max(v, 0.0);
  }
  return vec(h);
}

std::size_t predict(const SepMlp& model, const Tensor& x) {
  const auto logits = predict_logits(model, x);
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size())
    throw DomainError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(logits.size()) + " classes");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return std::log(sum) + mx - logits[label];
}

std::vector<double> cross_entropy_grad(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size())
    throw DomainError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(logits.size()) + " classes");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> g(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += g[i] = std::exp(logits[i] - mx);
  for (double& v : g) v /= sum;
  g[label] -= 1.0;
  return g;
}

GradientSet GradientSet::zeros_like(const SepMlp& model) {
  GradientSet g;
  for (const auto& layer : model.layers()) {
    LayerGrad lg;
    for (const auto& f : layer.transform.factors()) lg.factors.emplace_back(f.rows(), f.cols());
    if (layer.transform.bias()) lg.bias = std::vector<double>(layer.transform.bias()->size(), 0.0);
    g.layers.push_back(std::move(lg));
  }
  return g;
}

void GradientSet::add_scaled(const GradientSet& other, double s) {
  if (other.layers.size() != layers.size()) throw ShapeError("gradient sets do not mirror");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& mine = layers[l];
    const auto& theirs = other.layers[l];
    if (mine.factors.size() != theirs.factors.size() || mine.bias.has_value() != theirs.bias.has_value())
      throw ShapeError("gradient sets do not mirror");
    for (std::size_t t = 0; t < mine.factors.size(); ++t) {
      auto dst = mine.factors[t].data();
      auto src = theirs.factors[t].data();
      if (dst.size() != src.size()) throw ShapeError("gradient sets do not mirror");
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
    }
    if (mine.bias) {
      if (mine.bias->size() != theirs.bias->size()) throw ShapeError("gradient sets do not mirror");
      for (std::size_t i = 0; i < mine.bias->size(); ++i) (*mine.bias)[i] += s * (*theirs.bias)[i];
    }
  }
}

void GradientSet::scale(double s) {
  for (auto& lg : layers) {
    for (auto& f : lg.factors)
      for (double& v : f.data()) v *= s;
    if (lg.bias)
      for (double& v : *lg.bias) v *= s;
  }
}

BackwardResult backward(const SepMlp& model, const ForwardCache& cache, std::size_t label,
                        bool want_params) {
  const auto& layers = model.layers();
  if (cache.fingerprint != model.fingerprint() || cache.inputs.size() != layers.size())
    throw DomainError("backward: cache is stale (model changed since forward)");

  BackwardResult res;
  if (want_params) res.params = GradientSet::zeros_like(model);

  const auto dlogits = cross_entropy_grad(cache.logits, label);
  Tensor grad = unvec(dlogits, layers.back().transform.output_shape());

  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const auto& tr = layer.transform;
    grad = grad.reshaped(tr.output_shape());
    if (layer.activation == Activation::Relu) {
      const auto pre = cache.pre_activations[li].data();
      auto g = grad.data();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(pre[i] > 0.0)) g[i] = 0.0;
    }

    if (want_params) {
      auto& lg = res.params.layers[li];
      if (lg.bias) lg.bias->assign(grad.data().begin(), grad.data().end());
      const Tensor& x = cache.inputs[li];
      for (std::size_t t = 0; t < tr.order(); ++t) {
        // Y = Z_t x_t A_t with Z_t = X multiplied along every other mode.
        Tensor z = x;
        for (std::size_t m = 0; m < tr.order(); ++m)
          if (m != t) z = nmode_product(z, tr.factor(m), m);
        lg.factors[t] = mode_contract(grad, z, t);
      }
    }

    Tensor dx = grad;
    for (std::size_t m = 0; m < tr.order(); ++m) dx = nmode_product(dx, transpose(tr.factor(m)), m);
    grad = std::move(dx);
  }
  res.input = grad.reshaped(model.input_shape());
  return res;
}

// --- Adam ------------------------------------------------------------------------

std::vector<std::span<double>> parameter_views(SepMlp& model) {
  std::vector<std::span<double>> out;
  for (auto& layer : model.layers()) {
    for (auto& f : layer.transform.factors()) out.push_back(f.data());
    if (layer.transform.bias()) out.emplace_back(*layer.transform.bias());
  }
  return out;
}

std::vector<std::span<const double>> gradient_views(const GradientSet& grads) {
  std::vector<std::span<const double>> out;
  for (const auto& lg : grads.layers) {
    for (const auto& f : lg.factors) out.push_back(f.data());
    if (lg.bias) out.emplace_back(*lg.bias);
  }
  return out;
}

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].size() != grads[i].size()) throw ShapeError("adam_step: parameter/gradient shape mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not mirror parameters");
  }

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != params[i].size()) throw ShapeError("adam_step: optimizer state does not mirror parameters");
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      params[i][j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

void adam_step(AdamState& state, SepMlp& model, const GradientSet& grads) {
  auto p = parameter_views(model);
  auto g = gradient_views(grads);
  adam_step(state, p, g);
}

}  // namespace sepnet
