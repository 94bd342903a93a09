#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odml/mining.hpp"

namespace odml {

struct VerifyOptions {
  MinerRule rule = MinerRule::prose;
  bool corrupt_gradient = false;  // perturbs one analytic gradient by 1%
  std::uint64_t seed = 0;
  std::size_t miner_batches = 200;
  std::size_t grad_instances = 50;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
};

// Exhaustive restatement of the pair-filtering rules: every similarity is a
// plain dot-product loop and every threshold is recomputed per pair. Serves
// as the ground truth the production miner is compared against.
MinedPairs brute_force_mine(const EmbeddingBatch& batch, double epsilon, MinerRule rule);

// Runs the self-check battery: miner versus the brute-force oracle, full
// pipeline gradients versus finite differences, nearest-neighbor versus the
// density-ratio classifier, and algebraic loss invariants.
VerifyReport run_verification(const VerifyOptions& options);

}  // namespace odml
