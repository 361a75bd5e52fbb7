#pragma once

// Differentiable tensor operations. Matrices are rank-2 row-major; a "row"
// argument is a 1×n tensor broadcast over every row of its partner.

#include <cstddef>
#include <vector>

#include "mim/autodiff.hpp"

namespace mim::ad {

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var sum(const Var& a);
Var mean(const Var& a);
Var sum_rows(const Var& a);   // m×n -> 1×n
Var mean_rows(const Var& a);  // m×n -> 1×n

Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);

// axis 1 normalizes each row, axis 0 each column.
Var softmax(const Var& x, int axis);
// Per-row normalization to zero mean / unit variance, then gain ⊙ x̂ + bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-6);

Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
// out.row(i) = a.row(index[i]); repeated indices accumulate in backward.
Var gather_rows(const Var& a, const std::vector<std::size_t>& index);

// Mean binary cross-entropy of sigmoid(logits) against constant targets.
Var bce_with_logits(const Var& logits, const Tensor& targets);
// Σ weights[i] · BCE_i.
Var bce_with_logits(const Var& logits, const Tensor& targets, const Tensor& weights);

// Forward-only helpers shared with non-differentiable code paths.
Tensor softmax_values(const Tensor& x, int axis);
double gelu_value(double x);
double softplus_value(double x);
double sigmoid_value(double x);

}  // namespace mim::ad
