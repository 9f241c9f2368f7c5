// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/nn.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "farnet/errors.hpp"
#include "farnet/ops.hpp"

namespace farnet {

Tensor make_parameter(Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& x : t.data()) x = rng.normal(0.0, stddev);
  return t;
}

Linear Linear::create(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
  Linear l;
  l.weight = make_parameter({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  if (with_bias) l.bias = Tensor::zeros({out}, true);
  return l;
}

Linear Linear::identity(std::size_t width) {
  std::vector<double> w(width * width, 0.0);
  for (std::size_t i = 0; i < width; ++i) w[i * width + i] = 1.0;
  return {Tensor::from({width, width}, std::move(w), true), Tensor::zeros({width}, true)};
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add_row_bias(y, bias) : y;
}

void Linear::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".weight", weight);
  if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

LayerNorm LayerNorm::create(std::size_t width) {
  return {Tensor::full({width}, 1.0, true), Tensor::zeros({width}, true)};
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm_rows(x, gamma, beta); }

void LayerNorm::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

Mlp Mlp::create(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  return {Linear::create(in, hidden, rng), Linear::create(hidden, out, rng)};
}

Tensor Mlp::operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }

void Mlp::collect(const std::string& prefix, NamedParameters& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

Tensor multi_head_attention(const Tensor& queries, const Tensor& keys, const Tensor& values, std::size_t heads) {
  const std::size_t width = queries.cols();
  if (heads == 0 || width % heads != 0) {
    throw DimensionError("attention width " + std::to_string(width) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  if (keys.cols() != width || values.cols() != width || keys.rows() != values.rows()) {
    throw DimensionError("attention: query " + shape_string(queries.shape()) + ", key " +
                         shape_string(keys.shape()) + ", value " + shape_string(values.shape()));
  }
  const std::size_t head_dim = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  if (heads == 1) return matmul(softmax_rows(scale(matmul_nt(queries, keys), inv_sqrt)), values);
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t b = h * head_dim, e = b + head_dim;
    Tensor scores = scale(matmul_nt(slice_cols(queries, b, e), slice_cols(keys, b, e)), inv_sqrt);
    outputs.push_back(matmul(softmax_rows(scores), slice_cols(values, b, e)));
  }
  return concat_cols(outputs);
}

TransformerBlock TransformerBlock::create(std::size_t width, std::size_t heads, std::size_t mlp_ratio, Rng& rng) {
  TransformerBlock blk;
  blk.heads = heads;
  blk.norm1 = LayerNorm::create(width);
  blk.query = Linear::create(width, width, rng);
  blk.key = Linear::create(width, width, rng, false);  // a key bias cannot change a softmax row
  blk.value = Linear::create(width, width, rng);
  blk.output = Linear::create(width, width, rng);
  blk.norm2 = LayerNorm::create(width);
  blk.mlp = Mlp::create(width, width * mlp_ratio, width, rng);
  return blk;
}

Tensor TransformerBlock::operator()(const Tensor& x) const {
  Tensor h = norm1(x);
  Tensor attended = multi_head_attention(query(h), key(h), value(h), heads);
  Tensor y = add(x, output(attended));
  return add(y, mlp(norm2(y)));
}

void TransformerBlock::collect(const std::string& prefix, NamedParameters& out) const {
  norm1.collect(prefix + ".norm1", out);
  query.collect(prefix + ".attn.query", out);
  key.collect(prefix + ".attn.key", out);
  value.collect(prefix + ".attn.value", out);
  output.collect(prefix + ".attn.output", out);
  norm2.collect(prefix + ".norm2", out);
  mlp.collect(prefix + ".mlp", out);
}

}  // namespace farnet
