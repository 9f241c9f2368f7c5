// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "farnet/rng.hpp"
#include "farnet/tensor.hpp"

namespace farnet {

/// Parameters in a stable, documented order; the order is the checkpoint order.
using NamedParameters = std::vector<std::pair<std::string, Tensor>>;

/// Trainable tensor initialized from N(0, stddev).
Tensor make_parameter(Shape shape, double stddev, Rng& rng);

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out], undefined when the layer has no bias

  static Linear create(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  /// Square identity map with zero bias.
  static Linear identity(std::size_t width);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm create(std::size_t width);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

/// Two-layer perceptron with a GELU between the layers.
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp create(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

/// Multi-head scaled dot-product attention over one sequence. Returns the
/// concatenated head outputs before any output projection.
Tensor multi_head_attention(const Tensor& queries, const Tensor& keys, const Tensor& values, std::size_t heads);

/// Pre-norm transformer encoder layer.
struct TransformerBlock {
  std::size_t heads = 1;
  LayerNorm norm1;
  Linear query, key, value, output;
  LayerNorm norm2;
  Mlp mlp;

  static TransformerBlock create(std::size_t width, std::size_t heads, std::size_t mlp_ratio, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

}  // namespace farnet
