// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "farnet/tensor.hpp"

namespace farnet {

/// Which similarities populate an InfoNCE denominator.
///  - InBatch:   row i is scored against every column j (s_ij), target j = i.
///  - AsWritten: only matched-pair similarities s_jj enter the denominator.
enum class NegativesMode { InBatch, AsWritten };

NegativesMode parse_negatives_mode(std::string_view text);
std::string_view to_string(NegativesMode mode);

/// mean_i log_softmax_nll(logits[i, :], i) for a square [B x B] logit matrix.
Tensor contrastive_rows(const Tensor& logits);
/// mean_i log_softmax_nll(logits, i) for a length-B vector of matched-pair logits.
Tensor contrastive_matched(const Tensor& logits);

/// Row-wise cosine similarity matrix: cos(a_i, b_j). Throws on zero-norm rows.
Tensor cosine_matrix(const Tensor& a, const Tensor& b);

}  // namespace farnet
