#include "sepnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "sepnet/error.hpp"
#include "sepnet/rng.hpp"

namespace sepnet {

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.x.shape() != shape) throw FormatError("sample " + std::to_string(i) + " has the wrong shape");
    if (s.label >= classes) throw FormatError("sample " + std::to_string(i) + " label out of range");
    for (double v : s.x.data())
      if (!(v >= 0.0 && v <= 1.0)) throw FormatError("sample " + std::to_string(i) + " value outside [0,1]");
  }
}

// --- IDX ------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

void expect_exact_size(std::span<const std::uint8_t> bytes, std::size_t header, std::uint64_t payload,
                       const char* what) {
  const std::uint64_t need = header + payload;
  if (bytes.size() < need)
    throw FormatError(std::string("truncated IDX ") + what + " file: need " + std::to_string(need) +
                      " bytes, have " + std::to_string(bytes.size()));
  if (bytes.size() > need)
    throw FormatError(std::string("IDX ") + what + " file has " +
                      std::to_string(bytes.size() - need) + " trailing bytes");
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw FormatError("truncated IDX image header");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImageMagic)
    throw FormatError("IDX image magic number mismatch: got " + hex32(magic) + ", expected " +
                      hex32(kIdxImageMagic));
  IdxImages img;
  img.count = read_be32(bytes, 4);
  img.rows = read_be32(bytes, 8);
  img.cols = read_be32(bytes, 12);
  if (img.rows == 0 || img.cols == 0) throw FormatError("IDX image with a zero dimension");
  const std::uint64_t payload = std::uint64_t{img.count} * img.rows * img.cols;
  expect_exact_size(bytes, 16, payload, "image");
  img.pixels.assign(bytes.begin() + 16, bytes.end());
  return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("truncated IDX label header");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxLabelMagic)
    throw FormatError("IDX label magic number mismatch: got " + hex32(magic) + ", expected " +
                      hex32(kIdxLabelMagic));
  const std::uint32_t count = read_be32(bytes, 4);
  expect_exact_size(bytes, 8, count, "label");
  return {bytes.begin() + 8, bytes.end()};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.count));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t classes, std::optional<Shape> sample_shape) {
  const auto img_bytes = read_file(images_path);
  const auto lbl_bytes = read_file(labels_path);
  const IdxImages img = parse_idx_images(img_bytes);
  const auto labels = parse_idx_labels(lbl_bytes);
  if (labels.size() != img.count)
    throw FormatError("IDX image count " + std::to_string(img.count) + " != label count " +
                      std::to_string(labels.size()));

  Dataset ds;
  ds.classes = classes;
  const Shape native{img.rows, img.cols};
  ds.shape = sample_shape.value_or(native);
  if (shape_size(ds.shape) != img.rows * img.cols)
    throw ShapeError("requested sample shape does not match IDX image size");
  const std::size_t px = img.rows * img.cols;
  ds.samples.reserve(img.count);
  for (std::size_t n = 0; n < img.count; ++n) {
    if (labels[n] >= classes)
      throw FormatError("IDX label " + std::to_string(labels[n]) + " out of range for " +
                        std::to_string(classes) + " classes");
    Tensor t(native);
    for (std::size_t r = 0; r < img.rows; ++r)
      for (std::size_t c = 0; c < img.cols; ++c)
        t[r + img.rows * c] = img.pixels[n * px + r * img.cols + c] / 255.0;
    ds.samples.push_back({t.reshaped(ds.shape), labels[n]});
  }
  return ds;
}

// --- synthetic ------------------------------------------------------------------

Dataset synthetic_gaussians(std::size_t classes, std::size_t per_class, const Shape& shape,
                            double separation, std::uint64_t seed, double noise) {
  if (classes == 0) throw DomainError("synthetic_gaussians: classes must be positive");
  if (!(separation > 0.0)) throw DomainError("synthetic_gaussians: separation must be > 0");
  if (!(noise >= 0.0)) throw DomainError("synthetic_gaussians: noise must be >= 0");
  Dataset ds;
  ds.classes = classes;
  ds.shape = shape;
  const std::size_t d = shape_size(shape);
  Rng rng(seed);

  const double delta = std::min(0.45, separation * noise / std::sqrt(2.0 * static_cast<double>(d)));
  std::vector<std::vector<double>> signs;
  const bool can_be_distinct = d >= 64 || (std::size_t{1} << d) >= classes;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> s(d);
    for (int attempt = 0;; ++attempt) {
      for (double& v : s) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const bool dup = std::find(signs.begin(), signs.end(), s) != signs.end();
      if (!dup || !can_be_distinct || attempt > 1000) break;
    }
    signs.push_back(s);
  }

  ds.samples.reserve(classes * per_class);
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t c = 0; c < classes; ++c) {
      Tensor x(shape);
      for (std::size_t j = 0; j < d; ++j)
        x[j] = std::clamp(0.5 + delta * signs[c][j] + noise * rng.normal(), 0.0, 1.0);
      ds.samples.push_back({std::move(x), c});
    }
  return ds;
}

// --- checkpoints ----------------------------------------------------------------

std::string hexfloat(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  if (ec != std::errc()) throw FormatError("hexfloat formatting failed");
  return std::string(buf, end);
}

double parse_hexfloat(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::hex);
  if (ec != std::errc() || ptr != last) throw FormatError("bad hex-float value '" + s + "'");
  return v;
}

namespace {

void append_values(std::string& out, std::span<const double> values) {
  for (double v : values) {
    out += ' ';
    out += hexfloat(v);
  }
}

struct LineReader {
  std::istringstream in;
  std::size_t line_no = 0;

  explicit LineReader(const std::string& text) : in(text) {}

  // Next non-empty, non-comment line split on whitespace.
  std::optional<std::vector<std::string>> next() {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::vector<std::string> tok{std::istream_iterator<std::string>(ls), {}};
      if (!tok.empty()) return tok;
    }
    return std::nullopt;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError("checkpoint line " + std::to_string(line_no) + ": " + msg);
  }

  std::vector<std::string> expect(const std::string& keyword, std::size_t min_tokens) {
    auto tok = next();
    if (!tok) fail("unexpected end of document, expected '" + keyword + "'");
    if ((*tok)[0] != keyword) fail("expected '" + keyword + "', found '" + (*tok)[0] + "'");
    if (tok->size() < min_tokens) fail("too few fields for '" + keyword + "'");
    return *tok;
  }

  std::size_t to_size(const std::string& s) const {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }
};

std::string join_rest(const std::vector<std::string>& tok, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < tok.size(); ++i) {
    if (i > from) out += ' ';
    out += tok[i];
  }
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& model = ckpt.model;
  std::string out;
  out += "# sepnet model checkpoint; parameter values are C99 hex-floats (no 0x prefix)\n";
  out += "format sepnet-checkpoint\n";
  out += "version " + std::to_string(kCheckpointVersion) + "\n";
  out += "classes " + std::to_string(model.classes()) + "\n";
  out += "layers " + std::to_string(model.layers().size()) + "\n";
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    const auto& tr = layer.transform;
    out += "layer " + std::to_string(l) + " activation " + to_string(layer.activation) +
           " factors " + std::to_string(tr.order()) + " bias " + (tr.has_bias() ? "yes" : "no") + "\n";
    for (std::size_t t = 0; t < tr.order(); ++t) {
      const auto& f = tr.factor(t);
      out += "factor " + std::to_string(t) + " " + std::to_string(f.rows()) + " " +
             std::to_string(f.cols());
      append_values(out, f.data());
      out += "\n";
    }
    if (tr.bias()) {
      out += "bias " + std::to_string(tr.bias()->size());
      append_values(out, *tr.bias());
      out += "\n";
    }
  }
  for (const auto& [k, v] : ckpt.config) out += "config " + k + " " + v + "\n";
  for (const auto& [k, v] : ckpt.metrics) out += "metric " + k + " " + v + "\n";
  out += "end\n";
  return out;
}

Checkpoint parse_checkpoint(const std::string& text) {
  LineReader r(text);
  auto fmt = r.expect("format", 2);
  if (fmt[1] != "sepnet-checkpoint") r.fail("unknown format '" + fmt[1] + "'");
  auto ver = r.expect("version", 2);
  const std::size_t version = r.to_size(ver[1]);
  if (version != static_cast<std::size_t>(kCheckpointVersion))
    throw VersionError("unsupported checkpoint version " + ver[1] + " (this build reads version " +
                       std::to_string(kCheckpointVersion) + ")");
  const std::size_t classes = r.to_size(r.expect("classes", 2)[1]);
  const std::size_t n_layers = r.to_size(r.expect("layers", 2)[1]);
  if (n_layers == 0) r.fail("checkpoint has no layers");

  std::vector<Layer> layers;
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto lt = r.expect("layer", 8);
    if (r.to_size(lt[1]) != l || lt[2] != "activation" || lt[4] != "factors" || lt[6] != "bias")
      r.fail("malformed layer header");
    Activation act;
    try {
      act = parse_activation(lt[3]);
    } catch (const DomainError& e) {
      r.fail(e.what());
    }
    const std::size_t n_factors = r.to_size(lt[5]);
    if (lt[7] != "yes" && lt[7] != "no") r.fail("bias flag must be yes or no");
    const bool has_bias = lt[7] == "yes";

    std::vector<Matrix> factors;
    for (std::size_t t = 0; t < n_factors; ++t) {
      auto ft = r.expect("factor", 4);
      if (r.to_size(ft[1]) != t) r.fail("factors out of order");
      const std::size_t rows = r.to_size(ft[2]);
      const std::size_t cols = r.to_size(ft[3]);
      if (rows == 0 || cols == 0) r.fail("factor with a zero extent");
      if (ft.size() != 4 + rows * cols) r.fail("factor value count does not match its shape");
      std::vector<double> data;
      data.reserve(rows * cols);
      for (std::size_t i = 4; i < ft.size(); ++i) data.push_back(parse_hexfloat(ft[i]));
      factors.emplace_back(rows, cols, std::move(data));
    }
    std::optional<std::vector<double>> bias;
    if (has_bias) {
      auto bt = r.expect("bias", 2);
      const std::size_t n = r.to_size(bt[1]);
      if (bt.size() != 2 + n) r.fail("bias value count does not match its length");
      std::vector<double> b;
      for (std::size_t i = 2; i < bt.size(); ++i) b.push_back(parse_hexfloat(bt[i]));
      bias = std::move(b);
    }
    try {
      layers.push_back({SeparableTransform(std::move(factors), std::move(bias)), act});
    } catch (const ShapeError& e) {
      r.fail(std::string("shape inconsistency: ") + e.what());
    }
  }

  Checkpoint ckpt;
  try {
    ckpt.model = SepMlp(std::move(layers), classes);
  } catch (const ShapeError& e) {
    r.fail(std::string("shape inconsistency: ") + e.what());
  }
  for (;;) {
    auto tok = r.next();
    if (!tok) r.fail("missing 'end' marker");
    const auto& key = (*tok)[0];
    if (key == "end") break;
    if (tok->size() < 2) r.fail("entry without a key");
    if (key == "config") ckpt.config.emplace_back((*tok)[1], join_rest(*tok, 2));
    else if (key == "metric") ckpt.metrics.emplace_back((*tok)[1], join_rest(*tok, 2));
    else r.fail("unknown entry '" + key + "'");
  }
  if (r.next()) r.fail("content after 'end'");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(ckpt);
  write_file_atomic(path, text);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FormatError("checkpoint '" + path.string() + "' does not exist");
  const auto bytes = read_file(path);
  return parse_checkpoint(std::string(bytes.begin(), bytes.end()));
}

}  // namespace sepnet
