#include "sepnet/run_config.hpp"

#include <algorithm>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sepnet/error.hpp"

namespace sepnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string s = trim(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw DomainError("bad value '" + text + "' for '" + key + "'");
  return v;
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number_field(T RunConfig::*member, const char* key) {
  return {[member, key](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.*member = trim(v); },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"arch", string_field(&RunConfig::arch)},
      {"data", string_field(&RunConfig::data)},
      {"classes", number_field(&RunConfig::classes, "classes")},
      {"per-class", number_field(&RunConfig::per_class, "per-class")},
      {"shape", string_field(&RunConfig::shape)},
      {"separation", number_field(&RunConfig::separation, "separation")},
      {"noise", number_field(&RunConfig::noise, "noise")},
      {"data-seed", number_field(&RunConfig::data_seed, "data-seed")},
      {"images", string_field(&RunConfig::images)},
      {"labels", string_field(&RunConfig::labels)},
      {"epochs", number_field(&RunConfig::epochs, "epochs")},
      {"batch-size", number_field(&RunConfig::batch_size, "batch-size")},
      {"lr", number_field(&RunConfig::lr, "lr")},
      {"beta1", number_field(&RunConfig::beta1, "beta1")},
      {"beta2", number_field(&RunConfig::beta2, "beta2")},
      {"adam-eps", number_field(&RunConfig::adam_eps, "adam-eps")},
      {"mu1", number_field(&RunConfig::mu1, "mu1")},
      {"mu2", number_field(&RunConfig::mu2, "mu2")},
      {"mu3", number_field(&RunConfig::mu3, "mu3")},
      {"nu", number_field(&RunConfig::nu, "nu")},
      {"varpi", number_field(&RunConfig::varpi, "varpi")},
      {"p", number_field(&RunConfig::p, "p")},
      {"prune-threshold", number_field(&RunConfig::prune_threshold, "prune-threshold")},
      {"attack", string_field(&RunConfig::attack)},
      {"eps", number_field(&RunConfig::eps, "eps")},
      {"steps", number_field(&RunConfig::steps, "steps")},
      {"step-size", number_field(&RunConfig::step_size, "step-size")},
      {"lo", number_field(&RunConfig::lo, "lo")},
      {"hi", number_field(&RunConfig::hi, "hi")},
      {"seeds",
       {[](RunConfig& c, const std::string& v) {
          std::vector<std::uint64_t> seeds;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) seeds.push_back(parse_number<std::uint64_t>("seeds", item));
          if (seeds.empty()) throw DomainError("'seeds' needs at least one value");
          c.seeds = std::move(seeds);
        },
        [](const RunConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.seeds.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(c.seeds[i]);
          }
          return out;
        }}},
      {"checkpoint", string_field(&RunConfig::checkpoint)},
      {"report", string_field(&RunConfig::report)},
  };
  return table;
}

// "step-size" and "step_size" name the same key.
const Field& find_field(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  for (const auto& [k, f] : field_table())
    if (k == key) return f;
  throw DomainError("unknown configuration key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { find_field(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return find_field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, f] : field_table()) out.push_back(key);
    return out;
  }();
  return k;
}

std::optional<AttackConfig> RunConfig::attack_config() const {
  if (attack == "none") return std::nullopt;
  AttackConfig a;
  a.kind = parse_attack_kind(attack);
  a.epsilon = eps;
  a.steps = a.kind == AttackKind::Pgd ? steps : 1;
  a.step_size = a.kind == AttackKind::Pgd ? step_size : eps;
  a.lo = lo;
  a.hi = hi;
  a.validate();
  return a;
}

TrainConfig RunConfig::train_config(std::uint64_t seed) const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.reg = {mu1, mu2, mu3, nu, varpi, p};
  t.attack = attack_config();
  t.adam = {lr, beta1, beta2, adam_eps};
  t.seed = seed;
  t.prune_threshold = prune_threshold;
  t.validate();
  return t;
}

Shape parse_shape(const std::string& text) {
  Shape s;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, 'x')) {
    const auto v = parse_number<std::size_t>("shape", item);
    if (v == 0) throw DomainError("shape extents must be positive: '" + text + "'");
    s.push_back(v);
  }
  if (s.empty()) throw DomainError("empty shape");
  return s;
}

std::string format_shape(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out;
}

Shape RunConfig::sample_shape() const { return parse_shape(shape); }

ArchSpec RunConfig::architecture() const { return parse_architecture(arch); }

Dataset RunConfig::load_dataset() const {
  if (data == "synthetic")
    return synthetic_gaussians(classes, per_class, sample_shape(), separation, data_seed, noise);
  if (data == "idx") {
    if (images.empty() || labels.empty()) throw DomainError("idx data needs 'images' and 'labels' paths");
    return load_idx(images, labels, classes, sample_shape());
  }
  throw DomainError("unknown data source '" + data + "' (expected synthetic or idx)");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DomainError("config line " + std::to_string(line_no) + ": expected key = value");
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : field_table()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

}  // namespace sepnet
