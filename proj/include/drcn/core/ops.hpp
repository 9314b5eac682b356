#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drcn/core/rng.hpp"
#include "drcn/core/tape.hpp"

// Differentiable operations. Every op takes the recording tape first; when the
// tape has gradients disabled (or no input requires one) nothing is recorded.
//
// Sequence tensors use a padded batch-major layout: a batch of B sequences of
// (padded) length T with d features is a (B*T) x d matrix whose row b*T + t is
// step t of sequence b. Masks are B x T tensors of {0, 1}.
namespace drcn::ops {

// Winning time index per (sequence, dimension) of a max-over-time pooling.
struct PoolRecord {
  std::size_t batch = 0;
  std::size_t dims = 0;
  std::vector<std::size_t> argmax;  // batch * dims, row-major

  std::size_t at(std::size_t b, std::size_t k) const { return argmax[b * dims + k]; }
};

// Running statistics for batch normalization (eval mode reads these).
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;
};

Var add(Tape& tape, const Var& a, const Var& b);
Var sub(Tape& tape, const Var& a, const Var& b);
Var mul(Tape& tape, const Var& a, const Var& b);
Var scale(Tape& tape, const Var& a, double factor);
Var add_n(Tape& tape, const std::vector<Var>& terms);
// x: R x C, bias: C. Adds the bias to every row.
Var add_bias(Tape& tape, const Var& x, const Var& bias);

Var abs(Tape& tape, const Var& a);
Var tanh(Tape& tape, const Var& a);
Var sigmoid(Tape& tape, const Var& a);
Var relu(Tape& tape, const Var& a);

Var matmul(Tape& tape, const Var& a, const Var& b);
Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias);

Var concat(Tape& tape, const std::vector<Var>& parts, std::size_t axis);
Var slice(Tape& tape, const Var& x, std::size_t axis, std::size_t begin, std::size_t end);

Var sum(Tape& tape, const Var& a);
Var mean(Tape& tape, const Var& a);

// Row-wise softmax over the last axis restricted to entries where mask == 1.
// Masked entries are exactly 0. Throws DegenerateMaskError on an all-masked row.
Var softmax_masked(Tape& tape, const Var& scores, const Tensor& mask);
Var softmax_rows(Tape& tape, const Var& logits);

inline constexpr double kCosineEpsilon = 1e-8;

// u.v / (|u||v| + eps) for two vectors of equal length.
Var cosine(Tape& tape, const Var& u, const Var& v);
// Per-sequence cosine matrix: hp is (B*I) x d, hq is (B*J) x d, result is
// (B*I) x J with block b holding cos(hp_{b,i}, hq_{b,j}).
Var cosine_scores(Tape& tape, const Var& hp, const Var& hq, std::size_t batch);
// a: (B*m) x k, b: (B*k) x n -> (B*m) x n, one product per block.
Var block_matmul(Tape& tape, const Var& a, const Var& b, std::size_t batch);
// a: (B*m) x n -> (B*n) x m, each block transposed.
Var block_transpose(Tape& tape, const Var& a, std::size_t batch);

// Max over unmasked time steps per dimension. With a rank-1 mask of length T,
// x is T x d and the result has shape [d]; with a B x T mask, x is (B*T) x d
// and the result is B x d. Ties go to the lowest time index.
Var max_pool_time(Tape& tape, const Var& x, const Tensor& mask, PoolRecord* record = nullptr);

// Zeroes padded rows of a sequence tensor.
Var mask_rows(Tape& tape, const Var& x, const Tensor& mask);

// Inverted dropout: at train time keeps each entry with probability `keep`
// and scales survivors by 1/keep. Returns `x` itself at eval time.
Var dropout(Tape& tape, const Var& x, double keep, bool training, Rng& rng);

// Batch normalization over the rows of x (B x d).
Var batch_norm(Tape& tape, const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
               bool training);

// Rows of `table` selected by `ids`; backward scatters into those rows only.
Var embedding_lookup(Tape& tape, const Var& table, std::span<const std::int32_t> ids);

// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Tape& tape, const Var& logits, std::span<const int> labels);

// Mean squared error over the rows where row_mask == 1 (and all columns).
Var masked_mse(Tape& tape, const Var& prediction, const Var& target, const Tensor& row_mask);

// Unidirectional LSTM over a padded batch. x: (B*T) x d, w_input: d x 4h,
// w_hidden: h x 4h, bias: 4h, gate blocks ordered input, forget, output,
// candidate. Padded steps leave the state untouched and emit zeros, so with
// `reverse` each sequence starts from its last real token.
Var lstm_sequence(Tape& tape, const Var& x, const Tensor& mask, const Var& w_input,
                  const Var& w_hidden, const Var& bias, bool reverse);

// Character convolution with max-over-characters. char_ids holds
// num_words * word_len ids packed left, 0 marking padding. kernel is
// (width * e) x out where e is the char embedding width; same-padded windows,
// ReLU, then max over the word's real characters. Words with no characters
// produce zeros.
Var char_cnn(Tape& tape, const Var& char_table, std::span<const std::int32_t> char_ids,
             std::size_t word_len, const Var& kernel, const Var& bias, std::size_t width);

namespace testing {
// Scales the recurrent-weight gradient of lstm_sequence on this thread. Used
// by the gradient-check negative control; 1.0 restores correct behaviour.
void set_backward_fault(double factor);
}  // namespace testing

}  // namespace drcn::ops
