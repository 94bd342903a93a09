#pragma once

#include <string>
#include <vector>

#include "odml/matrix.hpp"
#include "odml/rng.hpp"

namespace odml {

// Reverse-mode tape. Layers push the activations they need on the forward
// pass and pop them in LIFO order on the backward pass, so a backward pass
// can only follow a matching forward pass on the same tape.
class Tape {
 public:
  void push(Matrix m) { stack_.push_back(std::move(m)); }
  // Pops the top entry; throws TapeError if the tape is empty or the entry
  // does not have the expected column count.
  Matrix pop(std::size_t expect_cols, const std::string& who);
  bool empty() const { return stack_.empty(); }
  std::size_t depth() const { return stack_.size(); }
  void clear() { stack_.clear(); }

 private:
  std::vector<Matrix> stack_;
};

// Named view of one parameter matrix and its gradient buffer.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
};

// Fully-connected layer: out[b,o] = sum_i in[b,i] * w[i,o] + bias[o].
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_dim, std::size_t out_dim);

  // Glorot-uniform weights in [-sqrt(6/(I+O)), +sqrt(6/(I+O))], zero bias.
  void init(Rng& rng);

  // tape == nullptr runs inference-only (nothing recorded).
  Matrix forward(const Matrix& input, Tape* tape) const;
  // Accumulates into weight_grad/bias_grad and returns the input gradient.
  Matrix backward(const Matrix& upstream, Tape& tape);

  void zero_grad();
  std::size_t in_dim() const { return weights.rows(); }
  std::size_t out_dim() const { return weights.cols(); }
  std::vector<ParamRef> params(const std::string& prefix);

  Matrix weights;      // in x out
  Matrix bias;         // 1 x out
  Matrix weight_grad;  // same shape as weights
  Matrix bias_grad;    // same shape as bias
};

// Elementwise max(0, x). Units at exactly zero are treated as dead in the
// backward pass.
Matrix relu_forward(const Matrix& input, Tape* tape);
Matrix relu_backward(const Matrix& upstream, Tape& tape);

// Scales each row to unit Euclidean norm. Rows with norm <= 1e-12 raise
// NumericError (degenerate row).
Matrix l2_normalize_forward(const Matrix& input, Tape* tape);
Matrix l2_normalize_backward(const Matrix& upstream, Tape& tape);

}  // namespace odml
