#include "odml/losses.hpp"

#include <algorithm>
#include <cmath>

#include "odml/error.hpp"

namespace odml {

void LossConfig::validate(std::size_t n_classes) const {
  if (margin < 0.0 || !std::isfinite(margin)) {
    throw ValidationError("loss: margin must be a nonnegative finite value");
  }
  if (alpha < 0.0 || beta < 0.0 || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw ValidationError("loss: alpha and beta must be nonnegative finite values");
  }
  if (alpha + beta <= 0.0) throw ValidationError("loss: alpha + beta must be positive");
  if (!class_weights.empty()) {
    if (class_weights.size() != n_classes) {
      throw ValidationError("loss: " + std::to_string(class_weights.size()) +
                            " class weights for " + std::to_string(n_classes) + " classes");
    }
    for (double w : class_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw ValidationError("loss: class weights must be positive finite values");
      }
    }
  }
}

TripletLossResult triplet_loss(const Matrix& embeddings, const std::vector<Triplet>& triplets,
                               double margin, TripletReduction reduction) {
  if (margin < 0.0) throw ValidationError("triplet_loss: margin must be nonnegative");
  require_finite(embeddings, "triplet_loss");

  TripletLossResult result;
  result.embedding_grad = Matrix(embeddings.rows(), embeddings.cols());
  if (triplets.empty()) return result;

  const std::size_t n = embeddings.rows();
  const std::size_t dim = embeddings.cols();
  double total = 0.0;
  for (const Triplet& t : triplets) {
    if (t.anchor >= n || t.positive >= n || t.negative >= n) {
      throw ValidationError("triplet_loss: triplet index outside the batch of " +
                            std::to_string(n));
    }
    const auto za = embeddings.row(t.anchor);
    const auto zp = embeddings.row(t.positive);
    const auto zn = embeddings.row(t.negative);
    const double d_ap = euclidean_distance(za, zp);
    const double d_an = euclidean_distance(za, zn);
    const double term = d_ap - d_an + margin;
    if (term <= 0.0) continue;
    total += term;

    if (d_ap > 1e-12) {
      for (std::size_t c = 0; c < dim; ++c) {
        const double dir = (za[c] - zp[c]) / d_ap;
        result.embedding_grad(t.anchor, c) += dir;
        result.embedding_grad(t.positive, c) -= dir;
      }
    }
    if (d_an > 1e-12) {
      for (std::size_t c = 0; c < dim; ++c) {
        const double dir = (za[c] - zn[c]) / d_an;
        result.embedding_grad(t.anchor, c) -= dir;
        result.embedding_grad(t.negative, c) += dir;
      }
    }
  }

  double scale = 1.0;
  if (reduction == TripletReduction::mean) {
    scale = 1.0 / static_cast<double>(triplets.size());
  }
  result.value = total * scale;
  if (scale != 1.0) {
    for (double& g : result.embedding_grad.data()) g *= scale;
  }
  return result;
}

CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<std::size_t>& targets,
                                 const std::vector<double>& class_weights) {
  const std::size_t batch = logits.rows();
  const std::size_t k = logits.cols();
  if (batch == 0 || k == 0) throw ValidationError("cross_entropy: empty logits");
  if (targets.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(batch) + " logit rows");
  }
  if (!class_weights.empty() && class_weights.size() != k) {
    throw ValidationError("cross_entropy: " + std::to_string(class_weights.size()) +
                          " class weights for " + std::to_string(k) + " classes");
  }
  require_finite(logits, "cross_entropy");

  CrossEntropyResult result;
  result.logit_grad = Matrix(batch, k);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t y = targets[b];
    if (y >= k) {
      throw ValidationError("cross_entropy: target " + std::to_string(y) + " outside [0, " +
                            std::to_string(k) + ")");
    }
    const double w = class_weights.empty() ? 1.0 : class_weights[y];

    const auto row = logits.row(b);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    const double log_z = std::log(z);
    result.value += w * (log_z - (row[y] - m)) * inv_batch;

    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(row[j] - m) / z;
      result.logit_grad(b, j) = w * inv_batch * (p - (j == y ? 1.0 : 0.0));
    }
  }
  return result;
}

double combined_loss(double triplet_value, double ce_value, const LossConfig& config) {
  if (!std::isfinite(triplet_value) || !std::isfinite(ce_value)) {
    throw NumericError("combined_loss: non-finite component");
  }
  return config.alpha * triplet_value + config.beta * ce_value;
}

}  // namespace odml
