// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "farnet/image.hpp"
#include "farnet/nn.hpp"
#include "farnet/rng.hpp"
#include "farnet/tensor.hpp"

namespace farnet {

struct EncoderOutput {
  Tensor tokens;  // [n x d] per-token features (before L2 normalization)
  Tensor pooled;  // [d] mean of tokens, L2-normalized
};

struct ImageEncoderConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 2;
};

/// Patch-embedding transformer over RGB images.
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const ImageEncoderConfig& config, Rng& rng);

  const ImageEncoderConfig& config() const { return config_; }
  std::size_t region_count() const;
  /// Constant [regions x patch*patch*3] matrix of pixels scaled to [-0.5, 0.5].
  Tensor patchify(const Image& image) const;
  EncoderOutput encode(const Image& image) const;
  void collect(const std::string& prefix, NamedParameters& out) const;

  Linear patch_projection;
  Tensor positions;  // [regions x d]
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;

 private:
  ImageEncoderConfig config_;
};

struct TextEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t max_length = 32;
  std::size_t embed_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 2;
};

/// Token-embedding transformer over closed-vocabulary sequences.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const TextEncoderConfig& config, Rng& rng);

  const TextEncoderConfig& config() const { return config_; }
  /// Throws DimensionError for empty input, IndexError for out-of-vocabulary ids.
  EncoderOutput encode(const std::vector<std::size_t>& tokens) const;
  /// Encodes [prompt ; embed(tokens)], where prompt rows act as soft tokens.
  /// Pooling covers every position, prompt included.
  EncoderOutput encode_with_prompt(const Tensor& prompt, const std::vector<std::size_t>& tokens) const;
  void collect(const std::string& prefix, NamedParameters& out) const;

  Tensor token_table;  // [vocab x d]
  Tensor positions;    // [max_length x d]
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;

 private:
  Tensor embed(const std::vector<std::size_t>& tokens) const;
  EncoderOutput run(const Tensor& embedded) const;
  TextEncoderConfig config_;
};

struct CrossAttentionOutput {
  Tensor attended;  // [regions x d]
  Tensor map;       // [regions x tokens], rows sum to 1
};

/// Single cross-attention layer in which image regions query text tokens.
///
/// map      = softmax_rows((regions Wq)(text Wk)^T / sqrt(d))
/// mixed    = regions + (map (text Wv)) Wo
/// attended = mixed + ffn(norm(mixed))
class CrossAttentionBlock {
 public:
  CrossAttentionBlock() = default;
  CrossAttentionBlock(std::size_t embed_dim, std::size_t mlp_ratio, Rng& rng);

  Tensor attention_map(const Tensor& regions, const Tensor& text) const;
  CrossAttentionOutput operator()(const Tensor& regions, const Tensor& text) const;
  void collect(const std::string& prefix, NamedParameters& out) const;

  Linear query, key, value, output;  // bias-free [d x d]
  LayerNorm norm;
  Mlp ffn;
};

}  // namespace farnet
