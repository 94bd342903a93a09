#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "odml/matrix.hpp"

namespace odml {

// Batch of L2-normalized embeddings with one class label per row.
struct EmbeddingBatch {
  Matrix embeddings;  // N_b x D
  std::vector<std::size_t> labels;

  void validate() const;
};

// Pair filtering semantics. `prose` keeps a positive pair when its similarity
// falls below the anchor's best negative similarity plus epsilon, and a
// negative pair when its similarity rises above the anchor's worst positive
// similarity minus epsilon; this matches the multi-similarity mining method.
// `equation` flips both comparisons.
enum class MinerRule { prose, equation };

// S[i,j] = dot(z_i, z_j); symmetric with unit diagonal for a valid batch.
Matrix cosine_matrix(const EmbeddingBatch& batch);

struct MinedPairs {
  std::vector<std::pair<std::size_t, std::size_t>> positives;  // (anchor, positive)
  std::vector<std::pair<std::size_t, std::size_t>> negatives;  // (anchor, negative)
};

// Multi-similarity pair filtering. Anchors that have no positive partner or
// no negative partner in the batch contribute nothing; a single-class batch
// therefore yields an empty result.
MinedPairs ms_mine(const EmbeddingBatch& batch, double epsilon,
                   MinerRule rule = MinerRule::prose);

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  bool operator==(const Triplet&) const = default;
  bool operator<(const Triplet& o) const {
    if (anchor != o.anchor) return anchor < o.anchor;
    if (positive != o.positive) return positive < o.positive;
    return negative < o.negative;
  }
};

// Per-anchor Cartesian product of kept positives and kept negatives.
std::vector<Triplet> assemble_triplets(const MinedPairs& pairs);

}  // namespace odml
