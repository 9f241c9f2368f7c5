// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "farnet/contrastive.hpp"
#include "farnet/encoders.hpp"
#include "farnet/tensor.hpp"

// Late-fusion semantic alignment: fused global contrastive loss plus
// alignment of reference- and target-branch cross-attention maps.
namespace farnet::esam {

struct FusionConfig {
  double lambda1 = 0.5;  // weight of the image embedding in the fused vector
  double tau = 0.07;

  /// Throws ConfigError when lambda1 is outside [0, 1] or tau <= 0.
  void validate() const;
};

/// lambda1 * image + (1 - lambda1) * text, elementwise.
Tensor fuse(const Tensor& image_pooled, const Tensor& text_pooled, double lambda1);

/// Global late-fusion loss. `projected` holds MLP(F_u) rows, `targets` the
/// target embeddings; logits are cos(projected_i, targets_j) / tau with
/// in-batch negatives and target j = i.
Tensor loss_late(const Tensor& projected, const Tensor& targets, double tau);

struct AttentionPair {
  Tensor reference;  // [regions x tokens] from (reference image, text)
  Tensor target;     // [regions x tokens] from (target image, text)
};

/// Both maps use the same block and the same text features.
AttentionPair attention_pair(const Tensor& reference_regions, const Tensor& target_regions, const Tensor& text_features,
                             const CrossAttentionBlock& block);

/// Cosine of the flattened maps.
Tensor map_similarity(const Tensor& a, const Tensor& b);

/// Attention-alignment loss over matched-pair map similarities s_j.
/// AsWritten: -mean_i log(exp(s_i/tau) / sum_j exp(s_j/tau)).
/// InBatch:   logits cos(A_ref_i, A_tgt_j) / tau with target j = i.
Tensor loss_attention(const std::vector<AttentionPair>& pairs, double tau,
                      NegativesMode mode = NegativesMode::AsWritten);

/// Sum of the enabled terms; an undefined tensor marks a disabled term.
/// Returns an undefined tensor when both are disabled.
Tensor loss_esam(const Tensor& late, const Tensor& attention);

}  // namespace farnet::esam
