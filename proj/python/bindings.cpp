// NumPy bindings. Arrays cross the boundary in Fortran order, so numpy index
// [i0, i1, ...] is tensor entry (i0, i1, ...) with mode 0 varying fastest.

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sepnet/adversarial.hpp"
#include "sepnet/data.hpp"
#include "sepnet/error.hpp"
#include "sepnet/linalg.hpp"
#include "sepnet/nn.hpp"
#include "sepnet/regularizers.hpp"
#include "sepnet/separable.hpp"
#include "sepnet/train.hpp"
#include "sepnet/verify.hpp"

namespace py = pybind11;
using namespace sepnet;

namespace {

using FArray = py::array_t<double, py::array::f_style | py::array::forcecast>;

Tensor to_tensor(const FArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  const double* p = a.data();
  return Tensor(shape, std::vector<double>(p, p + a.size()));
}

Matrix to_matrix(const FArray& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  const double* p = a.data();
  return Matrix(a.shape(0), a.shape(1), std::vector<double>(p, p + a.size()));
}

FArray from_buffer(const Shape& shape, std::span<const double> data) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  FArray out(dims);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

FArray from_tensor(const Tensor& t) { return from_buffer(t.shape(), t.data()); }
FArray from_matrix(const Matrix& m) { return from_buffer({m.rows(), m.cols()}, m.data()); }

std::vector<Matrix> to_matrices(const std::vector<FArray>& arrays) {
  std::vector<Matrix> out;
  for (const auto& a : arrays) out.push_back(to_matrix(a));
  return out;
}

std::vector<FArray> from_matrices(const std::vector<Matrix>& ms) {
  std::vector<FArray> out;
  for (const auto& m : ms) out.push_back(from_matrix(m));
  return out;
}

// X has shape (N, *sample_shape); sample n is X[n, ...].
Dataset to_dataset(const FArray& x, const std::vector<std::size_t>& labels, std::size_t classes) {
  if (x.ndim() < 2) throw ShapeError("samples must be an array of shape (N, ...)");
  const auto n = static_cast<std::size_t>(x.shape(0));
  if (labels.size() != n) throw ShapeError("sample and label counts differ");
  Dataset d;
  d.classes = classes;
  d.shape.assign(x.shape() + 1, x.shape() + x.ndim());
  const std::size_t per = shape_size(d.shape);
  const double* p = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    // Fortran order: sample index is the fastest axis, so gather with stride n.
    std::vector<double> v(per);
    for (std::size_t j = 0; j < per; ++j) v[j] = p[i + n * j];
    d.samples.push_back({Tensor(d.shape, std::move(v)), labels[i]});
  }
  d.validate();
  return d;
}

py::tuple from_dataset(const Dataset& d) {
  const std::size_t n = d.size();
  const std::size_t per = shape_size(d.shape);
  std::vector<py::ssize_t> dims{static_cast<py::ssize_t>(n)};
  dims.insert(dims.end(), d.shape.begin(), d.shape.end());
  FArray x(dims);
  double* p = x.mutable_data();
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < per; ++j) p[i + n * j] = d.samples[i].x.data()[j];
    labels.push_back(d.samples[i].label);
  }
  return py::make_tuple(x, py::array(py::cast(labels)));
}

AttackConfig make_attack(const std::string& kind, double eps, int steps, double step_size, double lo, double hi) {
  AttackConfig a = parse_attack_kind(kind) == AttackKind::Pgd ? AttackConfig::pgd(eps, steps, step_size)
                                                               : AttackConfig::fgsm(eps);
  a.lo = lo;
  a.hi = hi;
  a.validate();
  return a;
}

}  // namespace

PYBIND11_MODULE(_sepnet, m) {
  m.doc() = "Separable (Kronecker-factored) transforms, regularizers, attacks and training";

  py::register_exception<Error>(m, "SepnetError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<RankDeficientError>(m, "RankDeficientError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  // tensor-core / linalg
  m.def("kron", [](const FArray& a, const FArray& b) { return from_matrix(kron(to_matrix(a), to_matrix(b))); });
  m.def("kron_chain", [](const std::vector<FArray>& fs) { return from_matrix(kron_chain(to_matrices(fs))); });
  m.def("nmode_product", [](const FArray& x, const FArray& a, std::size_t mode) {
    return from_tensor(nmode_product(to_tensor(x), to_matrix(a), mode));
  });
  m.def("singular_values", [](const FArray& a) { return singular_values(to_matrix(a)); });
  m.def("condition_number", [](const FArray& a) { return condition_number(to_matrix(a)); });
  m.def("numeric_rank", [](const FArray& a) { return numeric_rank(to_matrix(a)); });

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("next", &Rng::next)
      .def("uniform", [](Rng& r) { return r.uniform(); })
      .def("normal", &Rng::normal)
      .def("below", &Rng::below);

  // separable transforms
  py::class_<SeparableTransform>(m, "SeparableTransform")
      .def(py::init([](const std::vector<FArray>& factors, std::optional<std::vector<double>> bias) {
             return SeparableTransform(to_matrices(factors), std::move(bias));
           }),
           py::arg("factors"), py::arg("bias") = py::none())
      .def_property_readonly("factors", [](const SeparableTransform& t) { return from_matrices(t.factors()); })
      .def_property_readonly("bias", [](const SeparableTransform& t) { return t.bias(); })
      .def_property_readonly("input_shape", &SeparableTransform::input_shape)
      .def_property_readonly("output_shape", &SeparableTransform::output_shape)
      .def("forward", [](const SeparableTransform& t, const FArray& x) { return from_tensor(forward_md(t, to_tensor(x))); })
      .def("forward_vec", [](const SeparableTransform& t, std::vector<double> v) { return forward_vec(t, v); })
      .def("materialize", [](const SeparableTransform& t) { return from_matrix(materialize(t)); })
      .def("param_count", [](const SeparableTransform& t) {
        const auto pc = param_count(t);
        return py::make_tuple(pc.separable, pc.dense);
      });
  m.def("compression_ratio", &compression_ratio);

  // regularizers
  m.def("rho_value", [](const std::vector<FArray>& fs) { return rho_value(to_matrices(fs)); });
  m.def("rho_grad", [](const std::vector<FArray>& fs) { return from_matrices(rho_grad(to_matrices(fs))); });
  m.def("tau_value", [](const std::vector<FArray>& fs, double nu) { return tau_value(to_matrices(fs), nu); },
        py::arg("factors"), py::arg("nu") = 1e-4);
  m.def("tau_grad", [](const std::vector<FArray>& fs, double nu) { return from_matrices(tau_grad(to_matrices(fs), nu)); },
        py::arg("factors"), py::arg("nu") = 1e-4);
  m.def("g_value",
        [](const std::vector<FArray>& fs, double p, double varpi) { return g_value(to_matrices(fs), p, varpi); },
        py::arg("factors"), py::arg("p") = 1.0, py::arg("varpi") = 1e-6);
  m.def("g_grad",
        [](const std::vector<FArray>& fs, double p, double varpi) {
          return from_matrices(g_grad(to_matrices(fs), p, varpi));
        },
        py::arg("factors"), py::arg("p") = 1.0, py::arg("varpi") = 1e-6);

  // models
  py::class_<SepMlp>(m, "Model")
      .def(py::init([](const std::string& arch, std::uint64_t seed) {
             Rng rng(seed);
             return init_model(parse_architecture(arch), rng);
           }),
           py::arg("arch"), py::arg("seed") = 1)
      .def_property_readonly("classes", &SepMlp::classes)
      .def_property_readonly("input_shape", &SepMlp::input_shape)
      .def_property_readonly("architecture", [](const SepMlp& mdl) { return format_architecture(architecture_of(mdl)); })
      .def_property_readonly("layers",
                             [](const SepMlp& mdl) {
                               std::vector<SeparableTransform> out;
                               for (const auto& l : mdl.layers()) out.push_back(l.transform);
                               return out;
                             })
      .def("parameter_count", &SepMlp::parameter_count)
      .def("dense_parameter_count", &SepMlp::dense_parameter_count)
      .def("logits", [](const SepMlp& mdl, const FArray& x) { return predict_logits(mdl, to_tensor(x)); })
      .def("predict", [](const SepMlp& mdl, const FArray& x) { return predict(mdl, to_tensor(x)); })
      .def("condition_report", &condition_report)
      .def("prune", [](SepMlp& mdl, double threshold) { return prune(mdl, threshold).achieved_cr; })
      .def("structural_compression", &structural_compression)
      .def("pruned_compression", &pruned_compression)
      .def("save", [](const SepMlp& mdl, const std::string& path) { save_checkpoint({mdl, {}, {}}, path); })
      .def_static("load", [](const std::string& path) { return load_checkpoint(path).model; })
      .def(py::self == py::self);

  // attacks
  m.def("attack",
        [](const SepMlp& mdl, const FArray& x, std::size_t label, const std::string& kind, double eps, int steps,
           double step_size, double lo, double hi) {
          return from_tensor(attack(mdl, to_tensor(x), label, make_attack(kind, eps, steps, step_size, lo, hi)));
        },
        py::arg("model"), py::arg("x"), py::arg("label"), py::arg("kind") = "fgsm", py::arg("eps") = 0.015,
        py::arg("steps") = 10, py::arg("step_size") = 0.0078, py::arg("lo") = 0.0, py::arg("hi") = 1.0);

  // data
  m.def("synthetic_gaussians",
        [](std::size_t classes, std::size_t per_class, const Shape& shape, double separation, std::uint64_t seed,
           double noise) { return from_dataset(synthetic_gaussians(classes, per_class, shape, separation, seed, noise)); },
        py::arg("classes"), py::arg("per_class"), py::arg("shape"), py::arg("separation"), py::arg("seed"),
        py::arg("noise") = kSyntheticNoise);
  m.def("load_idx",
        [](const std::string& images, const std::string& labels, std::size_t classes) {
          return from_dataset(load_idx(images, labels, classes));
        },
        py::arg("images"), py::arg("labels"), py::arg("classes") = 10);

  // training
  m.def(
      "train",
      [](SepMlp& mdl, const FArray& x, const std::vector<std::size_t>& y, std::size_t epochs, std::size_t batch_size,
         double lr, double mu1, double mu2, double mu3, std::uint64_t seed, std::optional<std::string> attack_kind,
         double eps, int steps, double step_size, double prune_threshold) {
        const Dataset data = to_dataset(x, y, mdl.classes());
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.adam.lr = lr;
        cfg.reg.mu1 = mu1;
        cfg.reg.mu2 = mu2;
        cfg.reg.mu3 = mu3;
        cfg.seed = seed;
        cfg.prune_threshold = prune_threshold;
        if (attack_kind) cfg.attack = make_attack(*attack_kind, eps, steps, step_size, 0.0, 1.0);
        const TrainReport r = train(mdl, data, cfg);
        py::list epochs_out;
        for (const auto& e : r.epochs) {
          py::dict d;
          d["total_loss"] = e.total_loss;
          d["data_loss"] = e.data_loss;
          d["rho"] = e.rho;
          d["tau"] = e.tau;
          d["g"] = e.g;
          d["na"] = e.natural_accuracy;
          d["ra"] = e.robust_accuracy;
          epochs_out.append(d);
        }
        py::dict out;
        out["epochs"] = epochs_out;
        out["structural_cr"] = r.structural_cr;
        out["pruned_cr"] = r.pruned_cr;
        out["layer_condition"] = r.layer_condition;
        return out;
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("epochs") = 10, py::arg("batch_size") = 32,
      py::arg("lr") = 1e-3, py::arg("mu1") = 0.0, py::arg("mu2") = 0.0, py::arg("mu3") = 0.0, py::arg("seed") = 1,
      py::arg("attack") = py::none(), py::arg("eps") = 0.031, py::arg("steps") = 10, py::arg("step_size") = 0.0078,
      py::arg("prune_threshold") = 0.0);
  m.def(
      "evaluate",
      [](const SepMlp& mdl, const FArray& x, const std::vector<std::size_t>& y, std::optional<std::string> attack_kind,
         double eps, int steps, double step_size) {
        const Dataset data = to_dataset(x, y, mdl.classes());
        std::optional<AttackConfig> a;
        if (attack_kind) a = make_attack(*attack_kind, eps, steps, step_size, 0.0, 1.0);
        return evaluate(mdl, data, a);
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("attack") = py::none(), py::arg("eps") = 0.031,
      py::arg("steps") = 10, py::arg("step_size") = 0.0078);

  m.def(
      "verify",
      [](std::size_t trials, std::uint64_t seed) {
        std::vector<std::pair<std::string, bool>> out;
        for (const auto& r : run_verification({trials, seed, false})) out.emplace_back(r.name, r.passed);
        return out;
      },
      py::arg("trials") = 100, py::arg("seed") = 2024);
}
