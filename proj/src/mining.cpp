#include "odml/mining.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "odml/error.hpp"

namespace odml {

void EmbeddingBatch::validate() const {
  if (embeddings.rows() != labels.size()) {
    throw DimensionError("EmbeddingBatch: " + std::to_string(embeddings.rows()) +
                         " embedding rows but " + std::to_string(labels.size()) + " labels");
  }
  require_finite(embeddings, "EmbeddingBatch");
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    const double n = norm(embeddings.row(r));
    if (std::fabs(n - 1.0) > 1e-9) {
      throw NumericError("EmbeddingBatch: row " + std::to_string(r) + " has norm " +
                         std::to_string(n) + ", expected 1");
    }
  }
}

Matrix cosine_matrix(const EmbeddingBatch& batch) {
  batch.validate();
  return matmul(batch.embeddings, transpose(batch.embeddings));
}

MinedPairs ms_mine(const EmbeddingBatch& batch, double epsilon, MinerRule rule) {
  if (epsilon < 0.0) throw ValidationError("ms_mine: epsilon must be nonnegative");
  const Matrix S = cosine_matrix(batch);
  const std::size_t n = batch.labels.size();

  MinedPairs out;
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> positives, negatives;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == a) continue;
      if (batch.labels[k] == batch.labels[a]) {
        positives.push_back(k);
      } else {
        negatives.push_back(k);
      }
    }
    if (positives.empty() || negatives.empty()) continue;

    double max_neg = -2.0;
    for (std::size_t k : negatives) max_neg = std::max(max_neg, S(a, k));
    double min_pos = 2.0;
    for (std::size_t k : positives) min_pos = std::min(min_pos, S(a, k));

    for (std::size_t p : positives) {
      const bool keep = rule == MinerRule::prose ? S(a, p) < max_neg + epsilon
                                                 : S(a, p) > max_neg + epsilon;
      if (keep) out.positives.emplace_back(a, p);
    }
    for (std::size_t neg : negatives) {
      const bool keep = rule == MinerRule::prose ? S(a, neg) > min_pos - epsilon
                                                 : S(a, neg) < min_pos - epsilon;
      if (keep) out.negatives.emplace_back(a, neg);
    }
  }
  return out;
}

std::vector<Triplet> assemble_triplets(const MinedPairs& pairs) {
  std::map<std::size_t, std::vector<std::size_t>> pos_by_anchor, neg_by_anchor;
  for (const auto& [a, p] : pairs.positives) pos_by_anchor[a].push_back(p);
  for (const auto& [a, n] : pairs.negatives) neg_by_anchor[a].push_back(n);

  std::vector<Triplet> out;
  for (const auto& [a, ps] : pos_by_anchor) {
    auto it = neg_by_anchor.find(a);
    if (it == neg_by_anchor.end()) continue;
    for (std::size_t p : ps) {
      for (std::size_t n : it->second) out.push_back({a, p, n});
    }
  }
  return out;
}

}  // namespace odml
