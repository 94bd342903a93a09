#pragma once

#include <cstddef>
#include <vector>

#include "odml/matrix.hpp"
#include "odml/mining.hpp"

namespace odml {

enum class TripletReduction { mean, sum };

struct LossConfig {
  double margin = 0.2;
  double alpha = 0.5;
  double beta = 0.5;
  TripletReduction triplet_reduction = TripletReduction::mean;
  std::vector<double> class_weights;  // empty = uniform

  void validate(std::size_t n_classes) const;
};

struct TripletLossResult {
  double value = 0.0;
  Matrix embedding_grad;  // same shape as the embeddings
};

// Margin loss over mined triplets: [ |z_a - z_p| - |z_a - z_n| + margin ]_+
// per triplet, reduced by sum or mean. Clamped triplets contribute zero
// gradient; coincident pairs contribute a zero direction.
TripletLossResult triplet_loss(const Matrix& embeddings, const std::vector<Triplet>& triplets,
                               double margin,
                               TripletReduction reduction = TripletReduction::mean);

struct CrossEntropyResult {
  double value = 0.0;
  Matrix logit_grad;  // B x K
};

// Mean over the batch of class_weights[y] * (-log softmax(logits)[y]),
// stabilized by per-row max subtraction. Empty class_weights means uniform.
CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<std::size_t>& targets,
                                 const std::vector<double>& class_weights = {});

// alpha * triplet + beta * ce.
double combined_loss(double triplet_value, double ce_value, const LossConfig& config);

}  // namespace odml
