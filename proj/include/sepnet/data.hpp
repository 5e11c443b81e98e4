#pragma once

// Datasets (IDX files and seeded synthetic blobs) and model checkpoints.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sepnet/nn.hpp"
#include "sepnet/tensor.hpp"

namespace sepnet {

struct Sample {
  Tensor x;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t classes = 0;
  Shape shape;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  /// Throws FormatError if a sample disagrees with `shape`, a label is out of
  /// range, or a value falls outside [0, 1].
  void validate() const;
};

// --- IDX ------------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
};

/// Parse an in-memory IDX image file. The buffer must be exactly header plus
/// payload; throws FormatError on bad magic, truncation or trailing bytes.
IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);

/// Loads an IDX image/label pair. Pixels are scaled by 1/255. Each image is
/// stored as a (rows, cols) tensor with tensor index (r, c) = pixel (r, c),
/// then reshaped to `sample_shape` when given (same element count).
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t classes = 10, std::optional<Shape> sample_shape = std::nullopt);

// --- synthetic ------------------------------------------------------------------

inline constexpr double kSyntheticNoise = 0.15;

/// Seeded Gaussian blobs in [0,1]^shape. Class c has mean 0.5 + delta * s_c
/// with s_c a distinct random sign pattern and
///   delta = min(0.45, separation * noise / sqrt(2 d)),
/// so `separation` is roughly the distance between class means measured in
/// noise standard deviations. Samples are interleaved by class and clipped
/// to [0, 1].
Dataset synthetic_gaussians(std::size_t classes, std::size_t per_class, const Shape& shape,
                            double separation, std::uint64_t seed, double noise = kSyntheticNoise);

// --- checkpoints ----------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct Checkpoint {
  SepMlp model;
  KeyValues config;   // training configuration snapshot
  KeyValues metrics;  // final metrics
};

std::string hexfloat(double v);
double parse_hexfloat(const std::string& s);

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws VersionError for an unsupported version and FormatError for any
/// malformed or shape-inconsistent document.
Checkpoint parse_checkpoint(const std::string& text);

/// Written via temp file + rename.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sepnet
