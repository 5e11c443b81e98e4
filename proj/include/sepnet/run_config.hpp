#pragma once

// Batch-run configuration shared by the CLI and the Python bindings.
//
// File format: one `key = value` per line, '#' starts a comment, blank lines
// are ignored. Keys are the CLI long-flag names without the leading dashes;
// an underscore spelling (batch_size) is accepted for any hyphenated key.
// dump_config() emits every key in a fixed order, and parsing that output
// reproduces the same RunConfig.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sepnet/data.hpp"
#include "sepnet/train.hpp"

namespace sepnet {

struct RunConfig {
  // model
  std::string arch = "4x6,4x6:relu;2x16";

  // data source: "synthetic" or "idx"
  std::string data = "synthetic";
  std::size_t classes = 2;
  std::size_t per_class = 100;
  std::string shape = "6x6";
  double separation = 6.0;
  double noise = kSyntheticNoise;
  std::uint64_t data_seed = 7;
  std::string images;
  std::string labels;

  // training
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu3 = 0.0;
  double nu = 1e-4;
  double varpi = 1e-6;
  double p = 1.0;
  double prune_threshold = 0.0;

  // attack: "none", "fgsm" or "pgd"
  std::string attack = "none";
  double eps = 0.0;
  int steps = 10;
  double step_size = 0.0078;
  double lo = 0.0;
  double hi = 1.0;

  // run
  std::vector<std::uint64_t> seeds{1};
  std::string checkpoint = "model.ckpt";
  std::string report = "report.txt";

  /// Sets one field from its textual form; throws DomainError for unknown
  /// keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  std::optional<AttackConfig> attack_config() const;
  TrainConfig train_config(std::uint64_t seed) const;
  Shape sample_shape() const;
  ArchSpec architecture() const;
  /// Synthetic blobs or the IDX pair, depending on `data`.
  Dataset load_dataset() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
std::string dump_config(const RunConfig& cfg);

/// "6x6" / "28x28" / "2x3x4" -> extents.
Shape parse_shape(const std::string& text);
std::string format_shape(const Shape& shape);

}  // namespace sepnet
