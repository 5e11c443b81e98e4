#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "sepnet/error.hpp"
#include "sepnet/linalg.hpp"
#include "sepnet/train.hpp"

using namespace sepnet;

namespace {

SepMlp random_model(Rng& rng, const std::string& arch) {
  SepMlp m = init_model(parse_architecture(arch), rng);
  for (auto& l : m.layers())
    if (l.transform.bias())
      for (double& b : *l.transform.bias()) b = rng.uniform(-0.3, 0.3);
  return m;
}

std::vector<Sample> random_batch(Rng& rng, const Shape& shape, std::size_t n, std::size_t classes) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({oracle::random_tensor(rng, shape, 0.0, 1.0), rng.below(classes)});
  return out;
}

double mean_ce(const SepMlp& m, std::span<const Sample> batch) {
  double s = 0.0;
  for (const auto& smp : batch) s += cross_entropy(predict_logits(m, smp.x), smp.label);
  return s / static_cast<double>(batch.size());
}

SepMlp scaled_identity_model(std::vector<Matrix> factors) {
  const std::size_t n = SeparableTransform(factors).output_size();
  return SepMlp({Layer{SeparableTransform(std::move(factors)), Activation::None}}, n);
}

}  // namespace

TEST_CASE("RLST loss") {
  Rng rng(501);
  const SepMlp m = random_model(rng, "3x4,3x4:relu;2x9");
  const auto batch = random_batch(rng, m.input_shape(), 8, 2);

  SUBCASE("zero weights give the mean cross-entropy") {
    const LossParts p = rlst_loss(m, batch, RegularizerConfig{});
    CHECK(p.total == p.data);
    CHECK(oracle::rel_diff(p.data, mean_ce(m, batch)) <= 1e-14);
  }
  SUBCASE("total re-sums from independently computed parts") {
    RegularizerConfig reg;
    reg.mu1 = 0.3;
    reg.mu2 = 0.2;
    reg.mu3 = 0.1;
    const LossParts p = rlst_loss(m, batch, reg);
    // The 2x9 head has min extent 2, so tau is defined over all factors.
    const auto fs = m.all_factors();
    const double expect =
        mean_ce(m, batch) + 0.3 * rho_value(fs) + 0.2 * tau_value(fs, reg.nu) + 0.1 * g_value(fs, reg.p, reg.varpi);
    CHECK(std::abs(p.total - expect) <= 1e-12 * std::abs(expect));
    REQUIRE(p.tau);
    CHECK(std::abs(p.total - (p.data + 0.3 * p.rho + 0.2 * *p.tau + 0.1 * p.g)) <= 1e-12 * std::abs(p.total));
  }
  SUBCASE("zero-parameter model: g sits on its closed-form floor") {
    // g(0) for a k1 x k2 factor is k2^2 varpi^p / 2.
    SepMlp z = scaled_identity_model({Matrix(3, 3), Matrix(2, 4)});
    RegularizerConfig reg;
    reg.mu3 = 1e-3;
    const auto zb = random_batch(rng, z.input_shape(), 4, z.classes());
    const LossParts p = rlst_loss(z, zb, reg);
    const double floor = (9.0 + 16.0) * reg.varpi / 2.0;
    CHECK(oracle::rel_diff(p.g, floor) <= 1e-12);
    CHECK(oracle::rel_diff(p.data, std::log(static_cast<double>(z.classes()))) <= 1e-14);
  }
  SUBCASE("tau is absent when a factor is a vector") {
    SepMlp v = random_model(rng, "3x4;1x3");
    const LossParts p = rlst_loss(v, random_batch(rng, v.input_shape(), 3, 1), RegularizerConfig{});
    CHECK_FALSE(p.tau);
    RegularizerConfig reg;
    reg.mu2 = 1.0;
    CHECK_THROWS_AS(rlst_loss(v, random_batch(rng, v.input_shape(), 3, 1), reg), DomainError);
  }
}

TEST_CASE("ARLST loss") {
  Rng rng(503);
  const SepMlp m = random_model(rng, "3x4,3x4:relu;2x9");
  RegularizerConfig reg;
  reg.mu1 = 0.1;
  reg.mu3 = 0.01;

  SUBCASE("zero budget equals RLST") {
    const auto batch = random_batch(rng, m.input_shape(), 8, 2);
    const LossParts a = arlst_loss(m, batch, reg, AttackConfig::fgsm(0.0));
    const LossParts r = rlst_loss(m, batch, reg);
    CHECK(a.total == r.total);
    CHECK(arlst_loss(m, batch, reg, AttackConfig::pgd(0.0, 3, 0.01)).total == r.total);
  }
  SUBCASE("constant logits make the attack a no-op") {
    const SepMlp c({Layer{SeparableTransform({Matrix(2, 3), Matrix(1, 3)}, std::vector<double>{0.2, -0.1}),
                          Activation::None}},
                   2);
    const auto batch = random_batch(rng, c.input_shape(), 6, 2);
    CHECK(arlst_loss(c, batch, {}, AttackConfig::pgd_defaults()).data == rlst_loss(c, batch, {}).data);
  }
  SUBCASE("the inner max raises the data term on most batches") {
    int raised = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto batch = random_batch(rng, m.input_shape(), 8, 2);
      if (arlst_loss(m, batch, {}, AttackConfig::pgd_defaults()).data >= rlst_loss(m, batch, {}).data) ++raised;
    }
    CHECK(raised >= 45);
  }
  SUBCASE("invalid attack") {
    const auto batch = random_batch(rng, m.input_shape(), 2, 2);
    CHECK_THROWS_AS(arlst_loss(m, batch, reg, AttackConfig::fgsm(-1.0)), DomainError);
  }
}

TEST_CASE("total gradient is the sum of its parts") {
  Rng rng(505);
  const SepMlp m = random_model(rng, "3x4,3x4:relu;2x9");
  const auto batch = random_batch(rng, m.input_shape(), 6, 2);
  RegularizerConfig reg;
  reg.mu1 = 0.7;
  reg.mu2 = 0.05;
  reg.mu3 = 2e-3;
  const GradientSet total = objective_gradient(m, batch, reg, std::nullopt);

  // Data term: per-sample backprop averaged here, regularizers straight from their own gradients.
  GradientSet expect = GradientSet::zeros_like(m);
  for (const auto& s : batch) {
    const auto fwd = forward(m, s.x);
    expect.add_scaled(backward(m, fwd.cache, s.label).params, 1.0 / static_cast<double>(batch.size()));
  }
  const auto fs = m.all_factors();
  const auto r = rho_grad(fs);
  const auto t = tau_grad(fs, reg.nu);
  const auto g = g_grad(fs, reg.p, reg.varpi);
  std::size_t idx = 0;
  for (std::size_t l = 0; l < m.layers().size(); ++l)
    for (std::size_t k = 0; k < m.layers()[l].transform.order(); ++k, ++idx) {
      auto dst = expect.layers[l].factors[k].data();
      for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += reg.mu1 * r[idx].data()[i] + reg.mu2 * t[idx].data()[i] + reg.mu3 * g[idx].data()[i];
    }
  const auto a = gradient_views(total);
  const auto b = gradient_views(expect);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].size(); ++i)
      CHECK(std::abs(a[k][i] - b[k][i]) <= 1e-12 * std::max(1.0, std::abs(b[k][i])));

  // Bias gradients carry no regularizer contribution.
  const GradientSet rg = regularizer_gradient(m, reg);
  for (const auto& lg : rg.layers)
    if (lg.bias) CHECK(count_nonzero(*lg.bias) == 0);

  // The full objective gradient matches finite differences of the objective.
  SepMlp probe = m;
  auto params = parameter_views(probe);
  const auto analytic = gradient_views(total);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto fd = oracle::central_diff(params[k], [&] { return rlst_loss(probe, batch, reg).total; });
    CHECK(oracle::rel_error(analytic[k], fd) <= 1e-4);
  }
}

TEST_CASE("train") {
  const Dataset data = synthetic_gaussians(2, 100, {6, 6}, 6.0, 11);
  const ArchSpec arch = parse_architecture("6x6,6x6:relu;2x36");

  SUBCASE("zero epochs leave the model unchanged") {
    Rng rng(1);
    SepMlp m = init_model(arch, rng);
    const SepMlp before = m;
    TrainConfig cfg;
    cfg.epochs = 0;
    const TrainReport rep = train(m, data, cfg);
    CHECK(m == before);
    CHECK(rep.epochs.empty());
  }
  SUBCASE("separable two-class data reaches 95% within 50 epochs") {
    Rng rng(1);
    SepMlp m = init_model(arch, rng);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 16;
    cfg.adam.lr = 1e-2;
    cfg.seed = 1;
    const TrainReport rep = train(m, data, cfg);
    REQUIRE(rep.epochs.size() == 50);
    const auto first = std::find_if(rep.epochs.begin(), rep.epochs.end(),
                                    [](const EpochStats& e) { return e.natural_accuracy >= 95.0; });
    CHECK(first != rep.epochs.end());
    CHECK(evaluate(m, data) >= 95.0);
    for (const auto& e : rep.epochs) {
      CHECK(e.natural_accuracy >= 0.0);
      CHECK(e.natural_accuracy <= 100.0);
      CHECK_FALSE(e.robust_accuracy);
    }
    CHECK(rep.structural_cr >= 1.0);
    CHECK(rep.layer_condition.size() == 2);
  }
  SUBCASE("a separable linear model reaches 99%") {
    Rng rng(2);
    SepMlp m = init_model(parse_architecture("2x36"), rng);
    Dataset flat = data;
    flat.shape = {36};
    for (auto& s : flat.samples) s.x = unvec(s.x.data(), {36});
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.adam.lr = 1e-2;
    train(m, flat, cfg);
    CHECK(evaluate(m, flat) >= 99.0);
  }
  SUBCASE("same seed, bit-identical parameters") {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.reg.mu1 = 1e-3;
    cfg.reg.mu2 = 1e-3;
    cfg.reg.mu3 = 1e-3;
    cfg.attack = AttackConfig::pgd(0.05, 2, 0.03);
    Rng r1(4);
    Rng r2(4);
    SepMlp a = init_model(arch, r1);
    SepMlp b = init_model(arch, r2);
    train(a, data, cfg);
    train(b, data, cfg);
    CHECK(a == b);
    CHECK(a.fingerprint() == b.fingerprint());
    cfg.seed = 2;
    Rng r3(4);
    SepMlp c = init_model(arch, r3);
    train(c, data, cfg);
    CHECK_FALSE(a == c);
  }
  SUBCASE("ARLST at zero budget follows the RLST trajectory") {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 20;
    Rng r1(6);
    Rng r2(6);
    SepMlp a = init_model(arch, r1);
    SepMlp b = init_model(arch, r2);
    train(a, data, cfg);
    cfg.attack = AttackConfig::fgsm(0.0);
    const TrainReport rep = train(b, data, cfg);
    CHECK(a == b);
    REQUIRE(rep.epochs.back().robust_accuracy);
    CHECK(*rep.epochs.back().robust_accuracy == rep.epochs.back().natural_accuracy);
  }
  SUBCASE("configuration and shape errors") {
    Rng rng(1);
    SepMlp m = init_model(arch, rng);
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(m, data, cfg), DomainError);
    cfg = {};
    cfg.prune_threshold = -1.0;
    CHECK_THROWS_AS(train(m, data, cfg), DomainError);
    cfg = {};
    CHECK_THROWS_AS(train(m, Dataset{}, cfg), DomainError);
    SepMlp small = init_model(parse_architecture("2x9"), rng);
    CHECK_THROWS_AS(train(small, data, cfg), ShapeError);
  }
}

TEST_CASE("evaluate") {
  SUBCASE("oracle logits give 100") {
    // x = one-hot(label) through an identity layer.
    Dataset d;
    d.classes = 3;
    d.shape = {3};
    for (std::size_t i = 0; i < 30; ++i) {
      Tensor x({3});
      x[i % 3] = 1.0;
      d.samples.push_back({x, i % 3});
    }
    const SepMlp m({Layer{SeparableTransform({Matrix::identity(3)}), Activation::None}}, 3);
    CHECK(evaluate(m, d) == 100.0);
    CHECK(evaluate(m, Dataset{}) == 0.0);
  }
  SUBCASE("zero budget: RA equals NA") {
    Rng rng(7);
    const SepMlp m = init_model(parse_architecture("3x4,3x4:relu;2x9"), rng);
    const Dataset d = synthetic_gaussians(2, 40, {4, 4}, 2.0, 5);
    CHECK(evaluate(m, d, AttackConfig::fgsm(0.0)) == evaluate(m, d));
    CHECK(evaluate(m, d, AttackConfig::pgd(0.0, 4, 0.01)) == evaluate(m, d));
  }
  SUBCASE("random model on label-independent data sits near chance") {
    Rng rng(9);
    const std::size_t c = 4;
    const std::size_t n = 1000;
    Dataset d;
    d.classes = c;
    d.shape = {3, 4};
    for (std::size_t i = 0; i < n; ++i) d.samples.push_back({oracle::random_tensor(rng, d.shape, 0.0, 1.0), i % c});
    const SepMlp m = random_model(rng, "4x3,1x4:relu;4x4");
    const double p = 1.0 / static_cast<double>(c);
    const double se = 100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    CHECK(std::abs(evaluate(m, d) - 100.0 * p) <= 3.0 * se);
  }
}

TEST_CASE("prune") {
  Rng rng(601);
  SUBCASE("threshold zero changes nothing") {
    SepMlp m = random_model(rng, "3x4,3x4:relu;2x9");
    const SepMlp before = m;
    const PruneResult r = prune(m, 0.0);
    CHECK(m == before);
    CHECK(r.zeroed == 0);
    CHECK(r.achieved_cr == r.structural_cr);
    CHECK(r.structural_cr == structural_compression(m));
  }
  SUBCASE("threshold above every entry empties the factors") {
    SepMlp m = random_model(rng, "3x4,3x4!nobias;2x9!nobias");
    const PruneResult r = prune(m, 1e9);
    CHECK(r.zeroed == 12 + 12 + 18);
    CHECK(std::isinf(r.achieved_cr));
    CHECK(std::isinf(pruned_compression(m)));
    CHECK(count_small_entries(m, 1e-300) == 42);
  }
  SUBCASE("hand arithmetic") {
    // 2x2 (x) 2x2 layer, no bias: dense 16, separable 8.
    Matrix a = Matrix::from_rows({{1.0, 1e-4}, {0.5, -2e-4}});
    Matrix b = Matrix::from_rows({{3.0, 0.2}, {0.0, 1.0}});
    SepMlp m({Layer{SeparableTransform({a, b}), Activation::None}}, 4);
    CHECK(structural_compression(m) == 2.0);
    CHECK(pruned_compression(m) == 16.0 / 7.0);
    const PruneResult r = prune(m, 1e-3);
    CHECK(r.zeroed == 2);
    CHECK(r.achieved_cr == 16.0 / 5.0);
    CHECK(m.layers()[0].transform.factor(0)(0, 1) == 0.0);
  }
  SUBCASE("biases are never pruned") {
    SepMlp m({Layer{SeparableTransform({Matrix::identity(2)}, std::vector<double>{1e-9, 0.0}), Activation::None}}, 2);
    prune(m, 1e-3);
    CHECK((*m.layers()[0].transform.bias())[0] == 1e-9);
  }
  SUBCASE("negative threshold") {
    SepMlp m = random_model(rng, "2x2");
    CHECK_THROWS_AS(prune(m, -1.0), DomainError);
  }
}

TEST_CASE("sparsity regularization increases small entries") {
  const Dataset data = synthetic_gaussians(2, 100, {6, 6}, 6.0, 7);
  const ArchSpec arch = parse_architecture("6x6,6x6:relu;2x36");
  auto run = [&](double mu3) {
    Rng rng(3);
    SepMlp m = init_model(arch, rng);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.adam.lr = 1e-2;
    cfg.seed = 3;
    cfg.reg.mu3 = mu3;
    cfg.eval_each_epoch = false;
    cfg.prune_threshold = 1e-3;
    const TrainReport rep = train(m, data, cfg);
    CHECK(rep.pruned_entries == count_small_entries(m, 1e-300));
    return rep.pruned_entries;
  };
  CHECK(run(1e-3) > run(0.0));
}

TEST_CASE("condition report") {
  SUBCASE("identity factors") {
    const SepMlp m = scaled_identity_model({Matrix::identity(3), Matrix::identity(2)});
    CHECK(condition_report(m) == std::vector<double>{1.0});
  }
  SUBCASE("diagonal factors") {
    const SepMlp m = scaled_identity_model({Matrix::diagonal(std::vector<double>{1, 2}),
                                            Matrix::diagonal(std::vector<double>{1, 3})});
    CHECK(condition_report(m)[0] == doctest::Approx(6.0).epsilon(1e-14));
  }
  SUBCASE("product form matches the materialized map") {
    Rng rng(607);
    for (int trial = 0; trial < 10; ++trial) {
      const SepMlp m = random_model(rng, "3x3,2x2,3x3:relu;4x18");
      const auto k = condition_report(m);
      REQUIRE(k.size() == 2);
      for (std::size_t l = 0; l < 2; ++l) {
        const Matrix w = materialize(m.layers()[l].transform);
        const auto s = singular_values(w);
        CHECK(oracle::rel_diff(k[l], s.front() / s.back()) <= 1e-8);
      }
    }
  }
  SUBCASE("rank-deficient factor") {
    const SepMlp m = scaled_identity_model({Matrix::from_rows({{1, 2}, {2, 4}}), Matrix::identity(2)});
    CHECK(std::isinf(condition_report(m)[0]));
  }
}

TEST_CASE("population variance") {
  CHECK_FALSE(population_variance(std::vector<double>{1.0}));
  CHECK(*population_variance(std::vector<double>{90.0, 100.0}) == 25.0);
  CHECK(*population_variance(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}) == 4.0);
}
