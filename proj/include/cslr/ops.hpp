#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cslr/tensor.hpp"

namespace cslr {

// Every op returns a fresh tensor and, when `tape` is non-null and any input
// requires a gradient, records a backward closure that accumulates into the
// inputs' grads. Output tensors contain no NaN/Inf on finite input; overflow
// raises NumericError.

enum class Padding { Same, Valid };
enum class Mode { Train, Eval };

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape* tape, const TensorPtr& a, double c);
TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);  // elementwise

// y[r][c] = x[r][c] + bias[c]
TensorPtr add_row_bias(Tape* tape, const TensorPtr& x, const TensorPtr& bias);

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(Tape* tape, const TensorPtr& x);

TensorPtr softmax_rows(Tape* tape, const TensorPtr& x);
TensorPtr log_softmax_rows(Tape* tape, const TensorPtr& x);

TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps = 1e-5);

// x: T x C_in, kernels: k x C_in x C_out (stored row-major), bias: C_out or null.
TensorPtr conv1d(Tape* tape, const TensorPtr& x, const TensorPtr& kernels,
                 const TensorPtr& bias, int stride, Padding padding);

// x: T x C, kernels: k x C; channel c sees only input channel c. Same padding.
TensorPtr depthwise_conv1d(Tape* tape, const TensorPtr& x, const TensorPtr& kernels,
                           const TensorPtr& bias);

TensorPtr relu(Tape* tape, const TensorPtr& x);
TensorPtr gelu(Tape* tape, const TensorPtr& x);
TensorPtr sigmoid(Tape* tape, const TensorPtr& x);
TensorPtr swish(Tape* tape, const TensorPtr& x);
// x: T x 2C -> T x C, first_half * sigmoid(second_half)
TensorPtr glu(Tape* tape, const TensorPtr& x);

TensorPtr maxpool1d(Tape* tape, const TensorPtr& x, int k, int stride);

/// Running statistics plus learned affine for one batch-norm layer.
/// Statistics pool over every row the op sees (batch and time together).
struct BatchNormState {
  TensorPtr gamma;  // C, requires_grad
  TensorPtr beta;   // C, requires_grad
  std::vector<double> running_mean;
  std::vector<double> running_var;
  bool initialized = false;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels);
};

// x: N x C where N = batch*time rows. Train mode requires N >= 2.
TensorPtr batch_norm1d(Tape* tape, const TensorPtr& x, BatchNormState& state, Mode mode);

TensorPtr dropout(Tape* tape, const TensorPtr& x, double rate, Mode mode,
                  std::mt19937_64& rng);

// Row-wise concatenation / split (used to pool a batch through batch norm).
TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts);
std::vector<TensorPtr> split_rows(Tape* tape, const TensorPtr& x,
                                  const std::vector<std::size_t>& row_counts);

// Channel-wise concatenation of two T x C tensors.
TensorPtr concat_cols(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr slice_cols(Tape* tape, const TensorPtr& x, std::size_t begin, std::size_t end);

// Frame j of x maps to output frames 2j and 2j+1; a final odd output frame
// repeats the last input frame.
TensorPtr upsample_repeat_rows(Tape* tape, const TensorPtr& x, std::size_t t_out);

double sum_all(const TensorPtr& x);
// Seeds a backward pass for sum(x) (grad of every element = 1).
void seed_sum_grad(const TensorPtr& x);

}  // namespace cslr
