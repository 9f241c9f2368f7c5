// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "farnet/tensor.hpp"

// Differentiable tensor operations.
//
// Every op computes its result eagerly. When a tape is active on the calling
// thread and any input requires gradients, the op also records a backward rule
// that accumulates into the inputs' gradient buffers.
namespace farnet {

/// Norm floor used by cosine and L2 normalization.
inline constexpr double kNormEpsilon = 1e-12;

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// x[m×n] + bias[n] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// Tanh-approximated GELU.
Tensor gelu(const Tensor& x);

// Row-wise normalizations.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
/// Max-subtracted softmax of every row of a matrix.
Tensor softmax_rows(const Tensor& x);
/// Divides every row by its L2 norm; throws DegenerateVectorError below kNormEpsilon.
Tensor l2_normalize_rows(const Tensor& x);
/// L2 normalization of a rank-1 tensor.
Tensor l2_normalize(const Tensor& v);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Column means of a matrix: [m×n] -> [n].
Tensor mean_rows(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
/// dot(a,b) / (|a| |b|) over flattened inputs of equal size.
Tensor cosine(const Tensor& a, const Tensor& b);
/// logsumexp(logits) - logits[target]; the shared InfoNCE kernel.
Tensor log_softmax_nll(const Tensor& logits, std::size_t target_index);

// Structural.
Tensor reshape(const Tensor& x, Shape shape);
/// Row i of a matrix as a rank-1 tensor.
Tensor row(const Tensor& x, std::size_t i);
/// Flattens each input and stacks them as rows of an [N×size] matrix.
Tensor stack(const std::vector<Tensor>& items);
Tensor concat_rows(const Tensor& top, const Tensor& bottom);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Selects rows of a [V×d] table by index.
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices);

}  // namespace farnet
