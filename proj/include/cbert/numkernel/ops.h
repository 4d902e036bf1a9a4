#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cbert/common/rng.h"
#include "cbert/numkernel/tensor.h"

// Differentiable operations. Every function returns a fresh tensor and, when
// any input requires a gradient, records how to propagate into its inputs.
namespace cbert::nk {

// a: [..., M, K] (any leading extents), b: [K, N] -> [..., M, N].
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched product. a: [B, M, K], b: [B, K, N] -> [B, M, N].
Tensor bmm(const Tensor& a, const Tensor& b);
// Swaps the last two axes.
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
// x: [..., N], bias: [N].
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
// Exact GELU, x * Phi(x).
Tensor gelu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Max-subtracted softmax along `axis`. Entries equal to -inf receive exactly
// zero probability; a row that is entirely -inf yields zeros.
Tensor softmax(const Tensor& x, std::size_t axis);

struct CrossEntropy {
  Tensor loss;          // scalar mean over counted rows (0 when none)
  std::size_t count = 0;
};

// logits: [N, V]; rows whose target equals ignore_id are excluded.
CrossEntropy cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_id);

// Normalises the last axis, then applies gain and bias (both [H]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-12);

// table: [V, H] -> [ids.size(), H]. Repeated ids accumulate gradient.
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);

// Inverted dropout. Identity in eval mode or when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool train);

// Last-axis slicing and concatenation.
Tensor slice_last(const Tensor& x, std::size_t start, std::size_t length);
Tensor concat_last(const std::vector<Tensor>& parts);

// x: [B, T, E] -> [B, E] at time step t.
Tensor time_step(const Tensor& x, std::size_t t);

// x: [B, T, E] -> [B, T - width + 1, width * E]; window j is the
// concatenation of rows j .. j + width - 1.
Tensor unfold_windows(const Tensor& x, std::size_t width);

// x: [B, P, F], valid: B*P flags. Max over axis 1 restricted to valid
// positions; every row needs at least one valid position.
Tensor max_over_time(const Tensor& x, std::span<const std::uint8_t> valid);

Tensor sum(const Tensor& x);

}  // namespace cbert::nk
