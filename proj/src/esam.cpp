// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/esam.hpp"

#include <algorithm>

#include "farnet/errors.hpp"
#include "farnet/ops.hpp"

namespace farnet::esam {

void FusionConfig::validate() const {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw ConfigError("lambda1 must lie in [0, 1]");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
}

Tensor fuse(const Tensor& image_pooled, const Tensor& text_pooled, double lambda1) {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) {
    throw ConfigError("fuse: lambda1 = " + std::to_string(lambda1) + " outside [0, 1]");
  }
  return add(scale(image_pooled, lambda1), scale(text_pooled, 1.0 - lambda1));
}

Tensor loss_late(const Tensor& projected, const Tensor& targets, double tau) {
  if (projected.rank() != 2 || projected.shape() != targets.shape()) {
    throw DimensionError("loss_late: projected " + shape_string(projected.shape()) + " vs targets " +
                         shape_string(targets.shape()));
  }
  if (projected.rows() < 2) throw DimensionError("loss_late needs a batch of at least 2");
  return contrastive_rows(scale(cosine_matrix(projected, targets), 1.0 / tau));
}

AttentionPair attention_pair(const Tensor& reference_regions, const Tensor& target_regions, const Tensor& text_features,
                             const CrossAttentionBlock& block) {
  if (reference_regions.rank() != 2 || target_regions.rank() != 2 ||
      reference_regions.rows() != target_regions.rows()) {
    throw DimensionError("attention_pair: reference regions " + shape_string(reference_regions.shape()) +
                         " vs target regions " + shape_string(target_regions.shape()));
  }
  return {block.attention_map(reference_regions, text_features), block.attention_map(target_regions, text_features)};
}

Tensor map_similarity(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("map_similarity: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return cosine(a, b);
}

Tensor loss_attention(const std::vector<AttentionPair>& pairs, double tau, NegativesMode mode) {
  if (pairs.empty()) throw DimensionError("loss_attention: empty batch");
  std::size_t regions = pairs.front().reference.rows(), width = 0;
  for (const auto& p : pairs) {
    if (p.reference.rank() != 2 || p.reference.shape() != p.target.shape() || p.reference.rows() != regions) {
      throw DimensionError("loss_attention: attention maps differ in shape");
    }
    width = std::max(width, p.reference.cols());
  }
  if (mode == NegativesMode::AsWritten) {
    std::vector<Tensor> sims;
    sims.reserve(pairs.size());
    for (const auto& p : pairs) sims.push_back(map_similarity(p.reference, p.target));
    return contrastive_matched(reshape(scale(stack(sims), 1.0 / tau), {pairs.size()}));
  }
  // Texts differ in length; zero-pad token columns so every map flattens to the same size.
  auto padded = [&](const Tensor& map) {
    if (map.cols() == width) return map;
    return concat_cols({map, Tensor::zeros({regions, width - map.cols()})});
  };
  std::vector<Tensor> refs, tgts;
  for (const auto& p : pairs) {
    refs.push_back(padded(p.reference));
    tgts.push_back(padded(p.target));
  }
  return contrastive_rows(scale(cosine_matrix(stack(refs), stack(tgts)), 1.0 / tau));
}

Tensor loss_esam(const Tensor& late, const Tensor& attention) {
  if (late.defined() && attention.defined()) return add(late, attention);
  return late.defined() ? late : attention;
}

}  // namespace farnet::esam
