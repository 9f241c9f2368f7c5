// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/contrastive.hpp"

#include "farnet/errors.hpp"
#include "farnet/ops.hpp"

namespace farnet {

NegativesMode parse_negatives_mode(std::string_view text) {
  if (text == "in_batch") return NegativesMode::InBatch;
  if (text == "as_written") return NegativesMode::AsWritten;
  throw ConfigError("invalid negatives mode '" + std::string(text) + "' (expected in_batch or as_written)");
}

std::string_view to_string(NegativesMode mode) {
  return mode == NegativesMode::InBatch ? "in_batch" : "as_written";
}

Tensor contrastive_rows(const Tensor& logits) {
  if (logits.rank() != 2 || logits.rows() != logits.cols()) {
    throw DimensionError("contrastive_rows needs a square logit matrix, got " + shape_string(logits.shape()));
  }
  std::vector<Tensor> terms;
  terms.reserve(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) terms.push_back(log_softmax_nll(row(logits, i), i));
  return mean(stack(terms));
}

Tensor contrastive_matched(const Tensor& logits) {
  if (logits.rank() != 1) {
    throw DimensionError("contrastive_matched needs a logit vector, got " + shape_string(logits.shape()));
  }
  std::vector<Tensor> terms;
  terms.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) terms.push_back(log_softmax_nll(logits, i));
  return mean(stack(terms));
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  return matmul_nt(l2_normalize_rows(a), l2_normalize_rows(b));
}

}  // namespace farnet
