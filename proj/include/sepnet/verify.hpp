#pragma once

// Self-check suite behind `sepnet verify`: randomized checks of the Kronecker
// identities, the multi-dimensional/vectorized equivalence, sparsity
// counting, finite-difference gradient checks and attack contracts.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sepnet {

struct VerifyOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 2024;
  /// Test hook: every Kronecker product used by the suite has the sign of
  /// its (0, 0) entry flipped.
  bool inject_kron_fault = false;
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<PropertyResult> run_verification(const VerifyOptions& opts);

}  // namespace sepnet
