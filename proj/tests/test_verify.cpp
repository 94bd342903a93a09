#include "doctest.h"

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "odml/matrix.hpp"
#include "odml/mining.hpp"
#include "odml/verify.hpp"

using namespace odml;

namespace {

EmbeddingBatch worked_example() {
  EmbeddingBatch batch;
  batch.embeddings = Matrix(4, 2, {1.0, 0.0, 0.8, 0.6, 0.6, 0.8, 0.0, 1.0});
  batch.labels = {0, 0, 1, 1};
  return batch;
}

using PairSet = std::vector<std::pair<std::size_t, std::size_t>>;

PairSet sorted(PairSet pairs) {
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

}  // namespace

TEST_CASE("the brute-force miner reproduces the worked example") {
  const MinedPairs pairs = brute_force_mine(worked_example(), 0.1, MinerRule::prose);
  CHECK(sorted(pairs.positives) == PairSet{{1, 0}, {2, 3}});
  CHECK(sorted(pairs.negatives) == PairSet{{1, 2}, {2, 1}});
}

TEST_CASE("the brute-force miner flips with the comparison rule") {
  const MinedPairs pairs = brute_force_mine(worked_example(), 0.1, MinerRule::equation);
  CHECK(sorted(pairs.positives) == PairSet{{0, 1}, {3, 2}});
  CHECK(sorted(pairs.negatives) ==
        PairSet{{0, 2}, {0, 3}, {1, 3}, {2, 0}, {3, 0}, {3, 1}});
}

TEST_CASE("the brute-force miner skips anchors missing a pair side") {
  EmbeddingBatch single_class;
  single_class.embeddings = Matrix(3, 2, {1.0, 0.0, 0.0, 1.0, 1.0, 0.0});
  single_class.labels = {4, 4, 4};
  const MinedPairs pairs = brute_force_mine(single_class, 0.1, MinerRule::prose);
  CHECK(pairs.positives.empty());
  CHECK(pairs.negatives.empty());

  EmbeddingBatch lonely;
  lonely.embeddings = Matrix(3, 2, {1.0, 0.0, 0.0, 1.0, -1.0, 0.0});
  lonely.labels = {0, 1, 2};
  const MinedPairs none = brute_force_mine(lonely, 0.1, MinerRule::prose);
  CHECK(none.positives.empty());
  CHECK(none.negatives.empty());
}

TEST_CASE("the full verification battery passes on a healthy build") {
  VerifyOptions options;
  const VerifyReport report = run_verification(options);
  REQUIRE(report.checks.size() == 4);
  for (const CheckResult& check : report.checks) {
    INFO(check.name << ": " << check.detail);
    CHECK(check.passed);
  }
  CHECK(report.all_passed());
  CHECK(report.checks[0].name == "miner-oracle-equivalence");
  CHECK(report.checks[1].name == "gradient-fidelity");
  CHECK(report.checks[2].name == "nearest-neighbor-bayes-equivalence");
  CHECK(report.checks[3].name == "loss-invariants");
}

TEST_CASE("the battery also passes under the flipped miner rule") {
  VerifyOptions options;
  options.rule = MinerRule::equation;
  options.miner_batches = 60;
  options.grad_instances = 5;
  const VerifyReport report = run_verification(options);
  for (const CheckResult& check : report.checks) {
    INFO(check.name << ": " << check.detail);
    CHECK(check.passed);
  }
}

TEST_CASE("a one-percent gradient corruption is caught") {
  VerifyOptions options;
  options.corrupt_gradient = true;
  const VerifyReport report = run_verification(options);
  CHECK_FALSE(report.all_passed());
  bool grad_failed = false;
  for (const CheckResult& check : report.checks) {
    if (check.name == "gradient-fidelity") {
      grad_failed = !check.passed;
      CHECK(check.detail.find("max relative error") != std::string::npos);
    } else {
      CHECK(check.passed);
    }
  }
  CHECK(grad_failed);
}

TEST_CASE("verification is deterministic for a fixed seed") {
  VerifyOptions options;
  options.seed = 42;
  options.miner_batches = 40;
  options.grad_instances = 4;
  const VerifyReport a = run_verification(options);
  const VerifyReport b = run_verification(options);
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    CHECK(a.checks[i].passed == b.checks[i].passed);
    CHECK(a.checks[i].detail == b.checks[i].detail);
  }
}
