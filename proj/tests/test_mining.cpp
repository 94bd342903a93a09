#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "odml/error.hpp"
#include "odml/layers.hpp"
#include "odml/mining.hpp"
#include "odml/rng.hpp"

using namespace odml;

namespace {

using Pair = std::pair<std::size_t, std::size_t>;

EmbeddingBatch random_batch(std::size_t n, std::size_t dim, std::size_t n_classes, Rng& rng) {
  Matrix raw(n, dim);
  for (double& v : raw.data()) v = rng.gaussian();
  EmbeddingBatch batch;
  batch.embeddings = l2_normalize_forward(raw, nullptr);
  for (std::size_t i = 0; i < n; ++i) batch.labels.push_back(rng.below(n_classes));
  return batch;
}

std::set<Pair> as_set(const std::vector<Pair>& pairs) { return {pairs.begin(), pairs.end()}; }

// The four-point worked example: two classes on the unit circle.
EmbeddingBatch worked_example() {
  EmbeddingBatch batch;
  batch.embeddings = Matrix(4, 2, {1.0, 0.0, 0.8, 0.6, 0.6, 0.8, 0.0, 1.0});
  batch.labels = {0, 0, 1, 1};
  return batch;
}

}  // namespace

TEST_CASE("batch validation enforces matching labels and unit rows") {
  EmbeddingBatch batch = worked_example();
  batch.validate();

  EmbeddingBatch short_labels = worked_example();
  short_labels.labels.pop_back();
  CHECK_THROWS_AS(short_labels.validate(), DimensionError);

  EmbeddingBatch denormalized = worked_example();
  denormalized.embeddings(0, 0) = 2.0;
  CHECK_THROWS_AS(denormalized.validate(), NumericError);
}

TEST_CASE("cosine matrix matches hand dot products") {
  Matrix S = cosine_matrix(worked_example());
  CHECK(S(0, 1) == doctest::Approx(0.8));
  CHECK(S(0, 2) == doctest::Approx(0.6));
  CHECK(S(0, 3) == doctest::Approx(0.0));
  CHECK(S(1, 2) == doctest::Approx(0.96));
  CHECK(S(1, 3) == doctest::Approx(0.6));
  CHECK(S(2, 3) == doctest::Approx(0.8));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(S(i, i) == doctest::Approx(1.0));
    for (std::size_t j = 0; j < 4; ++j) CHECK(S(i, j) == S(j, i));
  }
}

TEST_CASE("identical embeddings have unit similarity") {
  EmbeddingBatch batch;
  batch.embeddings = Matrix(2, 3, {0.6, 0.8, 0.0, 0.6, 0.8, 0.0});
  batch.labels = {0, 1};
  Matrix S = cosine_matrix(batch);
  CHECK(S(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("mining the worked example keeps exactly the informative pairs") {
  MinedPairs mined = ms_mine(worked_example(), 0.1);
  CHECK(as_set(mined.positives) == std::set<Pair>{{1, 0}, {2, 3}});
  CHECK(as_set(mined.negatives) == std::set<Pair>{{1, 2}, {2, 1}});

  auto triplets = assemble_triplets(mined);
  std::set<Triplet> got(triplets.begin(), triplets.end());
  CHECK(got == std::set<Triplet>{{1, 0, 2}, {2, 3, 1}});
}

TEST_CASE("flipped rule applies the reversed comparisons") {
  MinedPairs mined = ms_mine(worked_example(), 0.1, MinerRule::equation);
  CHECK(as_set(mined.positives) == std::set<Pair>{{0, 1}, {3, 2}});
  CHECK(as_set(mined.negatives) ==
        std::set<Pair>{{0, 2}, {0, 3}, {1, 3}, {2, 0}, {3, 0}, {3, 1}});

  // With everything identical, prose keeps all pairs and the flipped rule none.
  EmbeddingBatch same;
  same.embeddings = Matrix(4, 2, {1, 0, 1, 0, 1, 0, 1, 0});
  same.labels = {0, 0, 1, 1};
  MinedPairs prose = ms_mine(same, 0.1);
  CHECK(prose.positives.size() == 4);
  CHECK(prose.negatives.size() == 8);
  MinedPairs eq = ms_mine(same, 0.1, MinerRule::equation);
  CHECK(eq.positives.empty());
  CHECK(eq.negatives.empty());
}

TEST_CASE("single-class batches mine nothing") {
  EmbeddingBatch batch;
  batch.embeddings = Matrix(3, 2, {1, 0, 0, 1, 1, 0});
  batch.labels = {4, 4, 4};
  MinedPairs mined = ms_mine(batch, 0.1);
  CHECK(mined.positives.empty());
  CHECK(mined.negatives.empty());
  CHECK(assemble_triplets(mined).empty());
}

TEST_CASE("singleton classes are skipped as anchors") {
  // Row 2's class appears once: it anchors nothing, but still serves
  // as a negative partner for the other anchors.
  EmbeddingBatch batch;
  batch.embeddings = Matrix(3, 2, {1, 0, 0.8, 0.6, 0, 1});
  batch.labels = {0, 0, 1};
  MinedPairs mined = ms_mine(batch, 2.5);
  for (const auto& [a, p] : mined.positives) {
    (void)p;
    CHECK(a != 2);
  }
  for (const auto& [a, n] : mined.negatives) {
    (void)n;
    CHECK(a != 2);
  }
  CHECK(as_set(mined.positives) == std::set<Pair>{{0, 1}, {1, 0}});
  CHECK(as_set(mined.negatives) == std::set<Pair>{{0, 2}, {1, 2}});
}

TEST_CASE("negative epsilon is rejected") {
  CHECK_THROWS_AS((void)ms_mine(worked_example(), -0.01), ValidationError);
}

TEST_CASE("kept pairs grow monotonically with epsilon") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    EmbeddingBatch batch = random_batch(2 + rng.below(10), 2 + rng.below(6), 3, rng);
    std::set<Pair> prev_pos, prev_neg;
    for (double eps : {0.0, 0.05, 0.1, 0.3, 1.0, 2.5}) {
      MinedPairs mined = ms_mine(batch, eps);
      auto pos = as_set(mined.positives);
      auto neg = as_set(mined.negatives);
      CHECK(std::includes(pos.begin(), pos.end(), prev_pos.begin(), prev_pos.end()));
      CHECK(std::includes(neg.begin(), neg.end(), prev_neg.begin(), prev_neg.end()));
      prev_pos = std::move(pos);
      prev_neg = std::move(neg);
    }
  }
}

TEST_CASE("rotating every embedding changes nothing") {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dim = 3 + rng.below(4);
    EmbeddingBatch batch = random_batch(8, dim, 3, rng);

    // Compose a few Givens rotations into R.
    Matrix R(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) R(i, i) = 1.0;
    for (int g = 0; g < 5; ++g) {
      const std::size_t i = rng.below(dim);
      std::size_t j = rng.below(dim - 1);
      if (j >= i) ++j;
      const double theta = rng.uniform(0.0, 6.28318530717958647692);
      Matrix G(dim, dim);
      for (std::size_t k = 0; k < dim; ++k) G(k, k) = 1.0;
      G(i, i) = std::cos(theta);
      G(j, j) = std::cos(theta);
      G(i, j) = -std::sin(theta);
      G(j, i) = std::sin(theta);
      R = matmul(R, G);
    }

    EmbeddingBatch rotated = batch;
    rotated.embeddings = l2_normalize_forward(matmul(batch.embeddings, R), nullptr);

    for (double eps : {0.05, 0.2}) {
      MinedPairs a = ms_mine(batch, eps);
      MinedPairs b = ms_mine(rotated, eps);
      CHECK(as_set(a.positives) == as_set(b.positives));
      CHECK(as_set(a.negatives) == as_set(b.negatives));
    }
  }
}

TEST_CASE("triplets preserve the label contract") {
  Rng rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    EmbeddingBatch batch = random_batch(3 + rng.below(12), 4, 1 + rng.below(4), rng);
    MinedPairs mined = ms_mine(batch, rng.uniform(0.0, 0.5));
    for (const Triplet& t : assemble_triplets(mined)) {
      CHECK(batch.labels[t.anchor] == batch.labels[t.positive]);
      CHECK(batch.labels[t.anchor] != batch.labels[t.negative]);
      CHECK(t.anchor != t.positive);
    }
  }
}

TEST_CASE("triplet count is the per-anchor product of kept pairs") {
  MinedPairs pairs;
  pairs.positives = {{0, 1}, {0, 2}, {5, 1}};
  pairs.negatives = {{0, 3}, {0, 4}, {0, 6}, {7, 1}};
  auto triplets = assemble_triplets(pairs);
  CHECK(triplets.size() == 6);  // anchor 0: 2x3; anchors 5 and 7 lack a side
  for (const Triplet& t : triplets) CHECK(t.anchor == 0);
}
