#include "odml/layers.hpp"

#include <cmath>
#include <utility>

#include "odml/error.hpp"

namespace odml {

Matrix Tape::pop(std::size_t expect_cols, const std::string& who) {
  if (stack_.empty()) {
    throw TapeError(who + ": tape is empty (backward without matching forward?)");
  }
  Matrix top = std::move(stack_.back());
  stack_.pop_back();
  if (top.cols() != expect_cols) {
    throw TapeError(who + ": popped entry has " + std::to_string(top.cols()) +
                    " cols, expected " + std::to_string(expect_cols));
  }
  return top;
}

Linear::Linear(std::size_t in_dim, std::size_t out_dim)
    : weights(in_dim, out_dim),
      bias(1, out_dim),
      weight_grad(in_dim, out_dim),
      bias_grad(1, out_dim) {}

void Linear::init(Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
  for (double& w : weights.data()) w = rng.uniform(-bound, bound);
  bias.fill(0.0);
  zero_grad();
}

Matrix Linear::forward(const Matrix& input, Tape* tape) const {
  if (input.cols() != in_dim()) {
    throw DimensionError("Linear::forward: input has " + std::to_string(input.cols()) +
                         " cols, layer expects " + std::to_string(in_dim()));
  }
  Matrix out = matmul(input, weights);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias(0, c);
  }
  if (tape != nullptr) tape->push(input);
  return out;
}

Matrix Linear::backward(const Matrix& upstream, Tape& tape) {
  if (upstream.cols() != out_dim()) {
    throw DimensionError("Linear::backward: upstream has " + std::to_string(upstream.cols()) +
                         " cols, layer produces " + std::to_string(out_dim()));
  }
  Matrix input = tape.pop(in_dim(), "Linear::backward");
  if (input.rows() != upstream.rows()) {
    throw DimensionError("Linear::backward: batch mismatch between saved input and upstream");
  }
  Matrix wg = matmul(transpose(input), upstream);
  axpy(weight_grad, wg, 1.0);
  for (std::size_t r = 0; r < upstream.rows(); ++r) {
    for (std::size_t c = 0; c < upstream.cols(); ++c) bias_grad(0, c) += upstream(r, c);
  }
  return matmul(upstream, transpose(weights));
}

void Linear::zero_grad() {
  weight_grad.fill(0.0);
  bias_grad.fill(0.0);
}

std::vector<ParamRef> Linear::params(const std::string& prefix) {
  return {
      {prefix + ".weights", &weights, &weight_grad},
      {prefix + ".bias", &bias, &bias_grad},
  };
}

Matrix relu_forward(const Matrix& input, Tape* tape) {
  Matrix out = input;
  for (double& x : out.data()) {
    if (x < 0.0) x = 0.0;
  }
  if (tape != nullptr) tape->push(input);
  return out;
}

Matrix relu_backward(const Matrix& upstream, Tape& tape) {
  Matrix input = tape.pop(upstream.cols(), "relu_backward");
  if (input.rows() != upstream.rows()) {
    throw DimensionError("relu_backward: batch mismatch between saved input and upstream");
  }
  Matrix grad = upstream;
  for (std::size_t i = 0; i < grad.data().size(); ++i) {
    if (input.data()[i] <= 0.0) grad.data()[i] = 0.0;
  }
  return grad;
}

Matrix l2_normalize_forward(const Matrix& input, Tape* tape) {
  Matrix out = input;
  for (std::size_t r = 0; r < input.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < input.cols(); ++c) sq += input(r, c) * input(r, c);
    const double n = std::sqrt(sq);
    if (n <= 1e-12) {
      throw NumericError("l2_normalize: row " + std::to_string(r) +
                         " has near-zero norm " + std::to_string(n));
    }
    for (std::size_t c = 0; c < input.cols(); ++c) out(r, c) = input(r, c) / n;
  }
  if (tape != nullptr) tape->push(input);
  return out;
}

Matrix l2_normalize_backward(const Matrix& upstream, Tape& tape) {
  Matrix input = tape.pop(upstream.cols(), "l2_normalize_backward");
  if (input.rows() != upstream.rows()) {
    throw DimensionError("l2_normalize_backward: batch mismatch between saved input and upstream");
  }
  // For y = x/|x|: dx = (g - y*(g.y)) / |x| rowwise.
  Matrix grad(input.rows(), input.cols());
  for (std::size_t r = 0; r < input.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < input.cols(); ++c) sq += input(r, c) * input(r, c);
    const double n = std::sqrt(sq);
    if (n <= 1e-12) {
      throw NumericError("l2_normalize_backward: row " + std::to_string(r) +
                         " has near-zero norm");
    }
    double gy = 0.0;
    for (std::size_t c = 0; c < input.cols(); ++c) {
      gy += upstream(r, c) * input(r, c) / n;
    }
    for (std::size_t c = 0; c < input.cols(); ++c) {
      const double y = input(r, c) / n;
      grad(r, c) = (upstream(r, c) - y * gy) / n;
    }
  }
  return grad;
}

}  // namespace odml
