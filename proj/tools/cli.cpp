#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "sepnet/error.hpp"
#include "sepnet/linalg.hpp"
#include "sepnet/run_config.hpp"
#include "sepnet/separable.hpp"
#include "sepnet/train.hpp"
#include "sepnet/verify.hpp"

namespace sepnet::cli {

namespace {

// --- formatting -------------------------------------------------------------------

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::string pad(const std::string& s, std::size_t width, bool left) {
  const std::size_t w = display_width(s);
  if (w >= width) return s;
  const std::string fill(width - w, ' ');
  return left ? s + fill : fill + s;
}

// Plain text table: first column left-aligned, the rest right-aligned.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

  std::string str() const {
    std::vector<std::size_t> widths(header_.size());
    for (std::size_t c = 0; c < header_.size(); ++c) widths[c] = display_width(header_[c]);
    for (const auto& r : rows_)
      for (std::size_t c = 0; c < r.size() && c < widths.size(); ++c)
        widths[c] = std::max(widths[c], display_width(r[c]));
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c) out += " │ ";
        out += pad(c < cells.size() ? cells[c] : "", widths[c], c == 0);
      }
      while (!out.empty() && out.back() == ' ') out.pop_back();
      out += "\n";
    };
    line(header_);
    for (std::size_t c = 0; c < widths.size(); ++c) {
      if (c) out += "─┼─";
      for (std::size_t i = 0; i < widths[c]; ++i) out += "─";
    }
    out += "\n";
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string fixed(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string general(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Shortest round-trip form for the key-value block.
std::string exact(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string grouped(std::size_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ",";
    out += digits[i];
  }
  return out;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class KeyValueBlock {
 public:
  void add(const std::string& key, const std::string& value) { lines_ += key + " = " + value + "\n"; }
  void add(const std::string& key, double value) { add(key, exact(value)); }
  void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
  std::string str() const { return "[metrics]\n" + lines_; }

 private:
  std::string lines_;
};

std::string attack_line(const std::optional<AttackConfig>& a) {
  if (!a) return "attack none";
  std::ostringstream os;
  os << "attack " << to_string(a->kind) << " eps " << exact(a->epsilon);
  if (a->kind == AttackKind::Pgd) os << " steps " << a->steps << " step-size " << exact(a->step_size);
  os << " range [" << exact(a->lo) << ", " << exact(a->hi) << "]";
  return os.str();
}

// --- shared option plumbing ----------------------------------------------------------

struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;
};

void add_config_options(CLI::App* app, ConfigOptions& opts) {
  app->add_option("--config", opts.config_path, "key = value configuration file");
  for (const auto& key : RunConfig::keys()) {
    std::string alias = key;
    std::replace(alias.begin(), alias.end(), '-', '_');
    std::string names = "--" + key;
    if (alias != key) names += ",--" + alias;
    opts.options[key] = app->add_option(names, opts.overrides[key], "overrides '" + key + "'");
  }
}

RunConfig resolve_config(const ConfigOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  for (const auto& [key, opt] : opts.options)
    if (opt->count()) cfg.set(key, opts.overrides.at(key));
  return cfg;
}

KeyValues config_snapshot(const RunConfig& cfg, std::uint64_t seed) {
  KeyValues kv;
  for (const auto& key : RunConfig::keys()) {
    if (key == "seeds") kv.emplace_back(key, std::to_string(seed));
    else kv.emplace_back(key, cfg.get(key));
  }
  return kv;
}

std::filesystem::path checkpoint_path(const RunConfig& cfg, std::uint64_t seed) {
  std::filesystem::path p = cfg.checkpoint;
  if (cfg.seeds.size() == 1) return p;
  const auto ext = p.extension();
  p.replace_extension();
  p += ".seed" + std::to_string(seed);
  p += ext;
  return p;
}

// --- train -----------------------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  SepMlp model;
  TrainReport report;
  double na = 0.0;
  std::optional<double> ra;
};

SeedRun run_seed(const RunConfig& cfg, const ArchSpec& arch, const Dataset& data, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  Rng rng(seed);
  run.model = init_model(arch, rng);
  const TrainConfig tc = cfg.train_config(seed);
  run.report = train(run.model, data, tc);
  run.na = evaluate(run.model, data);
  if (tc.attack) run.ra = evaluate(run.model, data, tc.attack);
  return run;
}

std::string epoch_table(const TrainReport& report) {
  if (report.epochs.empty()) return "(no epochs)\n";
  Table t({"epoch", "total loss", "data loss", "ρ", "τ", "g", "NA %", "RA %"});
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const auto& s = report.epochs[e];
    t.row({std::to_string(e + 1), general(s.total_loss), general(s.data_loss), general(s.rho),
           s.tau ? general(*s.tau) : "-", general(s.g), fixed(s.natural_accuracy, 2),
           s.robust_accuracy ? fixed(*s.robust_accuracy, 2) : "-"});
  }
  return t.str();
}

KeyValues run_metrics(const SeedRun& run) {
  KeyValues m;
  m.emplace_back("na", exact(run.na));
  if (run.ra) m.emplace_back("ra", exact(*run.ra));
  m.emplace_back("cr.structural", exact(run.report.structural_cr));
  m.emplace_back("cr.pruned", exact(run.report.pruned_cr));
  m.emplace_back("pruned_entries", std::to_string(run.report.pruned_entries));
  for (std::size_t l = 0; l < run.report.layer_condition.size(); ++l)
    m.emplace_back("layer." + std::to_string(l) + ".kappa", exact(run.report.layer_condition[l]));
  return m;
}

void warn_under_budget(const std::optional<AttackConfig>& attack, std::ostream& err) {
  if (attack && attack->under_budget())
    err << "warning: PGD steps * step-size < eps; the attack cannot reach the edge of the ball\n";
}

int cmd_train(const ConfigOptions& opts, const std::optional<std::uint64_t>& seed, bool dump, bool no_timestamp,
              std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(opts);
  if (seed) cfg.seeds = {*seed};
  if (dump) {
    out << dump_config(cfg);
    return kOk;
  }
  const ArchSpec arch = cfg.architecture();
  const auto attack = cfg.attack_config();
  warn_under_budget(attack, err);
  cfg.train_config(cfg.seeds.front());  // validates before any work starts
  const Dataset data = cfg.load_dataset();
  if (data.classes != arch.classes)
    throw DomainError("architecture has " + std::to_string(arch.classes) + " classes but the data has " +
                      std::to_string(data.classes));

  std::vector<SeedRun> runs(cfg.seeds.size());
  std::vector<std::exception_ptr> failures(cfg.seeds.size());
  {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      workers.emplace_back([&, i] {
        try {
          runs[i] = run_seed(cfg, arch, data, cfg.seeds[i]);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      });
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  for (const auto& run : runs)
    save_checkpoint({run.model, config_snapshot(cfg, run.seed), run_metrics(run)}, checkpoint_path(cfg, run.seed));

  std::string text = "sepnet train report\n";
  if (!no_timestamp) text += "generated " + timestamp() + "\n";
  text += std::string("mode ") + (attack ? "ARLST" : "RLST") + "\n";
  text += attack_line(attack) + "\n";
  text += "arch " + format_architecture(arch) + "\n";
  text += "data " + cfg.data + " classes " + std::to_string(data.classes) + " samples " +
          std::to_string(data.size()) + " shape " + format_shape(data.shape) + "\n";
  text += "regularizers mu1 " + exact(cfg.mu1) + " mu2 " + exact(cfg.mu2) + " mu3 " + exact(cfg.mu3) + "\n";
  text += "metrics evaluated on the training set\n";

  for (const auto& run : runs) {
    text += "\nseed " + std::to_string(run.seed) + "\n";
    text += epoch_table(run.report);
  }

  const std::size_t layers = arch.layers.size();
  std::vector<std::string> header{"seed", "NA %", "RA %", "structural Cr", "pruned Cr"};
  for (std::size_t l = 0; l < layers; ++l) header.push_back("κ layer " + std::to_string(l));
  Table summary(header);
  std::vector<double> nas;
  std::vector<double> ras;
  for (const auto& run : runs) {
    std::vector<std::string> row{std::to_string(run.seed), fixed(run.na, 2), run.ra ? fixed(*run.ra, 2) : "-",
                                 general(run.report.structural_cr), general(run.report.pruned_cr)};
    for (double k : run.report.layer_condition) row.push_back(general(k));
    summary.row(std::move(row));
    nas.push_back(run.na);
    if (run.ra) ras.push_back(*run.ra);
  }
  text += "\nsummary\n" + summary.str();

  KeyValueBlock kv;
  kv.add("mode", attack ? "ARLST" : "RLST");
  kv.add("attack", attack ? to_string(attack->kind) : "none");
  if (attack) {
    kv.add("eps", attack->epsilon);
    kv.add("steps", static_cast<std::size_t>(attack->steps));
    kv.add("step_size", attack->step_size);
  }
  kv.add("epochs", cfg.epochs);
  kv.add("samples", data.size());
  kv.add("seeds", cfg.get("seeds"));
  for (const auto& run : runs) {
    const std::string prefix = "seed." + std::to_string(run.seed) + ".";
    for (const auto& [k, v] : run_metrics(run)) kv.add(prefix + k, v);
    kv.add(prefix + "checkpoint", checkpoint_path(cfg, run.seed).string());
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  kv.add("na.mean", mean(nas));
  if (!ras.empty()) kv.add("ra.mean", mean(ras));
  if (auto var = population_variance(nas)) kv.add("na.var", *var);
  if (auto var = population_variance(ras)) kv.add("ra.var", *var);
  text += "\n" + kv.str();

  write_file_atomic(cfg.report, text);
  out << text;
  return kOk;
}

// --- attack ----------------------------------------------------------------------------

int cmd_attack(const ConfigOptions& opts, const std::string& summary_path, bool no_timestamp, std::ostream& out,
               std::ostream& err) {
  RunConfig cfg = resolve_config(opts);
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  const SepMlp& model = ckpt.model;
  cfg.shape = format_shape(model.input_shape());
  if (!opts.options.at("classes")->count() && cfg.data == "synthetic") cfg.classes = model.classes();
  const auto attack = cfg.attack_config();
  warn_under_budget(attack, err);
  const Dataset data = cfg.load_dataset();
  if (data.classes != model.classes())
    throw DomainError("checkpoint has " + std::to_string(model.classes()) + " classes but the data has " +
                      std::to_string(data.classes));

  const double na = evaluate(model, data);
  std::size_t correct = 0;
  double linf_sum = 0.0;
  double linf_max = 0.0;
  double l2_sum = 0.0;
  Table per_sample({"sample", "label", "clean", "attacked", "ℓ∞", "ℓ2"});
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    const Tensor adv = attack ? sepnet::attack(model, s.x, s.label, *attack) : s.x;
    const std::size_t pred = predict(model, adv);
    if (pred == s.label) ++correct;
    const double linf = linf_distance(adv, s.x);
    double l2 = 0.0;
    for (std::size_t j = 0; j < adv.size(); ++j) l2 += (adv.data()[j] - s.x.data()[j]) * (adv.data()[j] - s.x.data()[j]);
    l2 = std::sqrt(l2);
    linf_sum += linf;
    linf_max = std::max(linf_max, linf);
    l2_sum += l2;
    per_sample.row({std::to_string(i), std::to_string(s.label), std::to_string(predict(model, s.x)),
                    std::to_string(pred), general(linf), general(l2)});
  }
  const double n = data.empty() ? 1.0 : static_cast<double>(data.size());
  const double ra = data.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / n;

  std::string text = "sepnet attack report\n";
  if (!no_timestamp) text += "generated " + timestamp() + "\n";
  text += attack_line(attack) + "\n";
  text += "checkpoint " + cfg.checkpoint + "\n";
  text += "samples " + std::to_string(data.size()) + "\n\n";
  Table t({"metric", "value"});
  t.row({"NA %", fixed(na, 2)});
  t.row({"RA %", fixed(ra, 2)});
  t.row({"mean ℓ∞ perturbation", general(linf_sum / n)});
  t.row({"max ℓ∞ perturbation", general(linf_max)});
  t.row({"mean ℓ2 perturbation", general(l2_sum / n)});
  text += t.str();

  KeyValueBlock kv;
  kv.add("attack", attack ? to_string(attack->kind) : "none");
  if (attack) {
    kv.add("eps", attack->epsilon);
    kv.add("steps", static_cast<std::size_t>(attack->steps));
    kv.add("step_size", attack->step_size);
  }
  kv.add("samples", data.size());
  kv.add("na", na);
  kv.add("ra", ra);
  kv.add("linf.mean", linf_sum / n);
  kv.add("linf.max", linf_max);
  kv.add("l2.mean", l2_sum / n);
  text += "\n" + kv.str();
  out << text;

  if (!summary_path.empty()) {
    const std::string summary = attack_line(attack) + "\n" + per_sample.str();
    write_file_atomic(summary_path, summary);
  }
  return kOk;
}

// --- inspect ---------------------------------------------------------------------------

// Magnitude histogram: an exact-zero bin, then 16 half-decade bins whose lower
// edges run from 1e-7 to 10^0.5. Nonzero values below 1e-7 land in the first
// of those, values of 10 and above in the last.
constexpr std::size_t kHistBins = 16;

double bin_edge(std::size_t k) { return std::pow(10.0, -7.0 + 0.5 * static_cast<double>(k)); }

std::vector<std::size_t> magnitude_histogram(std::span<const double> values, std::size_t& zeros) {
  std::vector<std::size_t> bins(kHistBins, 0);
  zeros = 0;
  for (double v : values) {
    const double a = std::abs(v);
    if (a == 0.0) {
      ++zeros;
      continue;
    }
    std::size_t k = 0;
    while (k + 1 < kHistBins && a >= bin_edge(k + 1)) ++k;
    ++bins[k];
  }
  return bins;
}

struct Replacement {
  std::size_t layer = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

Replacement parse_replacement(const std::string& text) {
  const auto colon = text.find(':');
  const auto x = text.find('x', colon == std::string::npos ? 0 : colon);
  if (colon == std::string::npos || x == std::string::npos)
    throw DomainError("--replaces expects LAYER:ROWSxCOLS, got '" + text + "'");
  try {
    return {std::stoul(text.substr(0, colon)), std::stoul(text.substr(colon + 1, x - colon - 1)),
            std::stoul(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw DomainError("--replaces expects LAYER:ROWSxCOLS, got '" + text + "'");
  }
}

int cmd_inspect(const std::string& path, const std::vector<std::string>& replaces, std::ostream& out) {
  std::vector<Replacement> repl;
  for (const auto& r : replaces) repl.push_back(parse_replacement(r));
  const Checkpoint ckpt = load_checkpoint(path);
  const SepMlp& model = ckpt.model;
  for (const auto& r : repl)
    if (r.layer >= model.layers().size()) throw DomainError("--replaces names missing layer " + std::to_string(r.layer));

  const auto kappas = condition_report(model);
  std::string text = "sepnet inspect " + path + "\n";
  text += "arch " + format_architecture(architecture_of(model)) + "\n\n";

  KeyValueBlock kv;
  Table layers({"layer", "factors", "activation", "bias", "separable params", "dense params", "structural Cr",
                "κ(W)"});
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    std::string shapes;
    for (const auto& f : layer.transform.factors()) {
      if (!shapes.empty()) shapes += ", ";
      shapes += std::to_string(f.rows()) + "×" + std::to_string(f.cols());
    }
    const ParamCount pc = param_count(layer.transform);
    layers.row({std::to_string(l), shapes, to_string(layer.activation), layer.transform.bias() ? "yes" : "no",
                grouped(pc.separable), grouped(pc.dense), general(compression_ratio(pc.dense, pc.separable)),
                general(kappas[l])});
    const std::string prefix = "layer." + std::to_string(l) + ".";
    kv.add(prefix + "params.separable", pc.separable);
    kv.add(prefix + "params.dense", pc.dense);
    kv.add(prefix + "kappa", kappas[l]);
  }
  text += layers.str();

  const std::size_t sep = model.parameter_count();
  const std::size_t dense = model.dense_parameter_count();
  text += "\nparameters: separable " + grouped(sep) + " vs dense " + grouped(dense) + "\n";
  text += "structural Cr " + general(structural_compression(model)) + ", pruned Cr " +
          general(pruned_compression(model)) + "\n";

  if (!repl.empty()) {
    Table rt({"layer", "replaced map", "replaced params", "separable params", "ratio"});
    for (const auto& r : repl) {
      const auto& t = model.layers()[r.layer].transform;
      std::size_t factor_params = 0;
      for (const auto& f : t.factors()) factor_params += f.size();
      const std::size_t replaced = r.rows * r.cols;
      rt.row({std::to_string(r.layer), std::to_string(r.rows) + "×" + std::to_string(r.cols), grouped(replaced),
              grouped(factor_params), fixed(compression_ratio(replaced, factor_params), 1)});
      const std::string prefix = "layer." + std::to_string(r.layer) + ".replaced.";
      kv.add(prefix + "params.dense", replaced);
      kv.add(prefix + "params.separable", factor_params);
      kv.add(prefix + "ratio", compression_ratio(replaced, factor_params));
      text += "\nlayer " + std::to_string(r.layer) + ": separable " + grouped(factor_params) + " vs dense " +
              grouped(replaced) + " (replaced " + std::to_string(r.rows) + "×" + std::to_string(r.cols) + " map)\n";
    }
    text += "\n" + rt.str();
  }

  std::vector<std::string> header{"|a| bin"};
  std::vector<std::vector<std::size_t>> hists;
  std::vector<std::size_t> zero_counts;
  std::size_t total_zeros = 0;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& factors = model.layers()[l].transform.factors();
    for (std::size_t t = 0; t < factors.size(); ++t) {
      header.push_back("L" + std::to_string(l) + " A" + std::to_string(t));
      std::size_t zeros = 0;
      hists.push_back(magnitude_histogram(factors[t].data(), zeros));
      zero_counts.push_back(zeros);
      total_zeros += zeros;
      const std::string prefix = "layer." + std::to_string(l) + ".factor." + std::to_string(t) + ".";
      kv.add(prefix + "shape", std::to_string(factors[t].rows()) + "x" + std::to_string(factors[t].cols()));
      kv.add(prefix + "zeros", zeros);
      for (std::size_t k = 0; k < kHistBins; ++k) kv.add(prefix + "hist." + std::to_string(k), hists.back()[k]);
    }
  }
  Table hist(header);
  {
    std::vector<std::string> row{"0"};
    for (std::size_t z : zero_counts) row.push_back(std::to_string(z));
    hist.row(std::move(row));
  }
  for (std::size_t k = 0; k < kHistBins; ++k) {
    char label[48];
    std::snprintf(label, sizeof label, "[%.1e, %.1e)", bin_edge(k), bin_edge(k + 1));
    std::vector<std::string> row{label};
    if (k == 0) std::snprintf(label, sizeof label, "(0, %.1e)", bin_edge(1));
    if (k + 1 == kHistBins) std::snprintf(label, sizeof label, "[%.1e, inf)", bin_edge(k));
    row[0] = label;
    for (const auto& h : hists) row.push_back(std::to_string(h[k]));
    hist.row(std::move(row));
  }
  text += "\nfactor magnitude histogram\n" + hist.str();

  kv.add("params.separable", sep);
  kv.add("params.dense", dense);
  kv.add("cr.structural", structural_compression(model));
  kv.add("cr.pruned", pruned_compression(model));
  kv.add("zeros.total", total_zeros);
  for (const auto& [k, v] : ckpt.metrics) kv.add("checkpoint." + k, v);
  text += "\n" + kv.str();
  out << text;
  return kOk;
}

// --- verify ----------------------------------------------------------------------------

int cmd_verify(const VerifyOptions& opts, std::ostream& out) {
  const auto results = run_verification(opts);
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    ok &= r.passed;
  }
  out << (ok ? "all properties passed\n" : "verification failed\n");
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Separable-transform classifiers: training, attacks, inspection and self-checks", "sepnet"};
  app.require_subcommand(1);

  ConfigOptions train_opts;
  std::optional<std::uint64_t> seed;
  bool dump = false;
  bool no_timestamp = false;
  auto* train_cmd = app.add_subcommand("train", "train one model per seed and write checkpoint + report");
  add_config_options(train_cmd, train_opts);
  train_cmd->add_option("--seed", seed, "single seed (overrides --seeds)");
  train_cmd->add_flag("--dump-config", dump, "print the resolved configuration and exit");
  train_cmd->add_flag("--no-timestamp", no_timestamp, "omit the timestamp line from the report");

  ConfigOptions attack_opts;
  std::string summary_path;
  auto* attack_cmd = app.add_subcommand("attack", "evaluate a checkpoint under an attack");
  add_config_options(attack_cmd, attack_opts);
  attack_cmd->add_option("--summary", summary_path, "write per-sample perturbation norms here");
  attack_cmd->add_flag("--no-timestamp", no_timestamp, "omit the timestamp line");

  std::string inspect_path;
  std::vector<std::string> replaces;
  auto* inspect_cmd = app.add_subcommand("inspect", "describe a checkpoint");
  inspect_cmd->add_option("checkpoint", inspect_path, "checkpoint file")->required();
  inspect_cmd->add_option("--replaces", replaces,
                          "LAYER:ROWSxCOLS dense map a layer's factors stand in for (repeatable)");

  VerifyOptions vopts;
  auto* verify_cmd = app.add_subcommand("verify", "run the randomized property suite");
  verify_cmd->add_option("--trials", vopts.trials, "trials per property")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", vopts.seed, "suite seed");
  verify_cmd->add_flag("--inject-kron-fault", vopts.inject_kron_fault,
                       "test hook: corrupt one entry of every Kronecker product");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts, seed, dump, no_timestamp, out, err);
    if (*attack_cmd) return cmd_attack(attack_opts, summary_path, no_timestamp, out, err);
    if (*inspect_cmd) return cmd_inspect(inspect_path, replaces, out);
    if (*verify_cmd) return cmd_verify(vopts, out);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace sepnet::cli
