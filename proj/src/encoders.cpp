// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/encoders.hpp"

#include <cmath>

#include "farnet/errors.hpp"
#include "farnet/ops.hpp"

namespace farnet {

namespace {
constexpr double kPositionStd = 0.1;
}

ImageEncoder::ImageEncoder(const ImageEncoderConfig& config, Rng& rng) : config_(config) {
  if (config.patch_size == 0 || config.image_size % config.patch_size != 0) {
    throw DimensionError("image size " + std::to_string(config.image_size) + " not divisible by patch size " +
                         std::to_string(config.patch_size));
  }
  const std::size_t d = config.embed_dim;
  patch_projection = Linear::create(config.patch_size * config.patch_size * 3, d, rng);
  positions = make_parameter({region_count(), d}, kPositionStd, rng);
  for (std::size_t i = 0; i < config.layers; ++i) blocks.push_back(TransformerBlock::create(d, config.heads, config.mlp_ratio, rng));
  final_norm = LayerNorm::create(d);
}

std::size_t ImageEncoder::region_count() const {
  const std::size_t grid = config_.image_size / config_.patch_size;
  return grid * grid;
}

Tensor ImageEncoder::patchify(const Image& image) const {
  if (image.channels != 3) {
    throw DimensionError("image encoder expects 3 channels, got " + std::to_string(image.channels));
  }
  if (image.width != config_.image_size || image.height != config_.image_size) {
    throw DimensionError("image encoder expects " + std::to_string(config_.image_size) + "x" +
                         std::to_string(config_.image_size) + " images, got " + std::to_string(image.width) + "x" +
                         std::to_string(image.height));
  }
  const std::size_t p = config_.patch_size;
  const std::size_t grid = config_.image_size / p;
  const std::size_t patch_len = p * p * 3;
  std::vector<double> values(region_count() * patch_len);
  for (std::size_t gy = 0; gy < grid; ++gy) {
    for (std::size_t gx = 0; gx < grid; ++gx) {
      double* dst = values.data() + (gy * grid + gx) * patch_len;
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x)
          for (std::size_t c = 0; c < 3; ++c)
            *dst++ = static_cast<double>(image.at(gx * p + x, gy * p + y, c)) / 255.0 - 0.5;
    }
  }
  return Tensor::matrix(region_count(), patch_len, std::move(values));
}

EncoderOutput ImageEncoder::encode(const Image& image) const {
  Tensor x = add(patch_projection(patchify(image)), positions);
  for (const auto& blk : blocks) x = blk(x);
  Tensor tokens = final_norm(x);
  return {tokens, l2_normalize(mean_rows(tokens))};
}

void ImageEncoder::collect(const std::string& prefix, NamedParameters& out) const {
  patch_projection.collect(prefix + ".patch_projection", out);
  out.emplace_back(prefix + ".positions", positions);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".blocks." + std::to_string(i), out);
  final_norm.collect(prefix + ".final_norm", out);
}

TextEncoder::TextEncoder(const TextEncoderConfig& config, Rng& rng) : config_(config) {
  if (config.vocab_size == 0) throw DimensionError("text encoder needs a non-empty vocabulary");
  const std::size_t d = config.embed_dim;
  token_table = make_parameter({config.vocab_size, d}, 1.0, rng);
  positions = make_parameter({config.max_length, d}, kPositionStd, rng);
  for (std::size_t i = 0; i < config.layers; ++i) blocks.push_back(TransformerBlock::create(d, config.heads, config.mlp_ratio, rng));
  final_norm = LayerNorm::create(d);
}

Tensor TextEncoder::embed(const std::vector<std::size_t>& tokens) const {
  if (tokens.empty()) throw DimensionError("text encoder: empty token sequence");
  for (auto id : tokens) {
    if (id >= config_.vocab_size) {
      throw IndexError("text encoder: token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(config_.vocab_size));
    }
  }
  return gather_rows(token_table, tokens);
}

EncoderOutput TextEncoder::run(const Tensor& embedded) const {
  const std::size_t n = embedded.rows();
  if (n > config_.max_length) {
    throw DimensionError("text encoder: sequence of " + std::to_string(n) + " exceeds max length " +
                         std::to_string(config_.max_length));
  }
  Tensor pos = n == config_.max_length ? positions : slice_rows(positions, 0, n);
  Tensor x = add(embedded, pos);
  for (const auto& blk : blocks) x = blk(x);
  Tensor tokens = final_norm(x);
  return {tokens, l2_normalize(mean_rows(tokens))};
}

EncoderOutput TextEncoder::encode(const std::vector<std::size_t>& tokens) const { return run(embed(tokens)); }

EncoderOutput TextEncoder::encode_with_prompt(const Tensor& prompt, const std::vector<std::size_t>& tokens) const {
  if (prompt.rank() != 2 || prompt.cols() != config_.embed_dim) {
    throw DimensionError("text encoder: prompt " + shape_string(prompt.shape()) + " does not match width " +
                         std::to_string(config_.embed_dim));
  }
  return run(concat_rows(prompt, embed(tokens)));
}

void TextEncoder::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".token_table", token_table);
  out.emplace_back(prefix + ".positions", positions);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".blocks." + std::to_string(i), out);
  final_norm.collect(prefix + ".final_norm", out);
}

CrossAttentionBlock::CrossAttentionBlock(std::size_t embed_dim, std::size_t mlp_ratio, Rng& rng)
    : query(Linear::create(embed_dim, embed_dim, rng, false)),
      key(Linear::create(embed_dim, embed_dim, rng, false)),
      value(Linear::create(embed_dim, embed_dim, rng, false)),
      output(Linear::create(embed_dim, embed_dim, rng, false)),
      norm(LayerNorm::create(embed_dim)),
      ffn(Mlp::create(embed_dim, embed_dim * mlp_ratio, embed_dim, rng)) {}

Tensor CrossAttentionBlock::attention_map(const Tensor& regions, const Tensor& text) const {
  const std::size_t d = query.weight.rows();
  if (regions.rank() != 2 || text.rank() != 2 || regions.cols() != d || text.cols() != d) {
    throw DimensionError("cross attention: regions " + shape_string(regions.shape()) + " and text " +
                         shape_string(text.shape()) + " must both have width " + std::to_string(d));
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
  return softmax_rows(scale(matmul_nt(query(regions), key(text)), inv_sqrt));
}

CrossAttentionOutput CrossAttentionBlock::operator()(const Tensor& regions, const Tensor& text) const {
  Tensor map = attention_map(regions, text);
  Tensor mixed = add(regions, output(matmul(map, value(text))));
  Tensor attended = add(mixed, ffn(norm(mixed)));
  return {attended, map};
}

void CrossAttentionBlock::collect(const std::string& prefix, NamedParameters& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
  norm.collect(prefix + ".norm", out);
  ffn.collect(prefix + ".ffn", out);
}

}  // namespace farnet
