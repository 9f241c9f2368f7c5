// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "farnet/arm.hpp"
#include "farnet/contrastive.hpp"
#include "farnet/encoders.hpp"
#include "farnet/esam.hpp"
#include "farnet/image.hpp"
#include "farnet/nn.hpp"

namespace farnet {

struct ModelConfig {
  std::size_t embed_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t patch_size = 8;
  std::size_t image_size = 32;
  std::size_t mlp_ratio = 2;
  std::size_t vocab_size = 0;
  std::size_t max_text_length = 32;
  bool share_image_encoders = true;

  bool operator==(const ModelConfig&) const = default;
};

/// Representation used as the retrieval query at inference time.
enum class QuerySource { U, MlpFu, MeanUUprime };
QuerySource parse_query_source(std::string_view text);
std::string_view to_string(QuerySource source);

struct LossSwitches {
  bool late = true;
  bool attention = true;
  bool res = true;
  bool pi = true;

  bool esam() const { return late || attention; }
  bool arm() const { return res || pi; }
  bool operator==(const LossSwitches&) const = default;
};

/// Falls back to a query head that the enabled losses actually train:
/// u needs the resilience loss, MLP(F_u) needs the late loss, mean(u, u')
/// needs either ARM term.
QuerySource effective_query_source(QuerySource requested, const LossSwitches& use);

struct LossSettings {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double tau = 0.07;
  NegativesMode retrieval_negatives = NegativesMode::InBatch;
  NegativesMode attention_negatives = NegativesMode::AsWritten;
  LossSwitches use;
};

struct Example {
  const Image* reference = nullptr;
  const Image* target = nullptr;
  const std::vector<std::size_t>* tokens = nullptr;
};

/// Loss terms for one batch; a disabled term is an undefined tensor.
struct BatchLosses {
  Tensor late, attention, res, pi;
  Tensor esam, arm, total;

  Tensor targets;       // v  [B x d]
  Tensor queries;       // u  [B x d]
  Tensor prompts;       // u' [B x d]
  Tensor projected;     // MLP(F_u) [B x d]
  std::vector<esam::AttentionPair> attention_pairs;
  arm::TargetStats stats;
  arm::Perturbation noise;

  /// Value of a term, 0 when disabled.
  static double value(const Tensor& term) { return term.defined() ? term.item() : 0.0; }
};

/// The full two-stage retrieval model: shared image encoder, text encoder,
/// one cross-attention block, the late-fusion MLP and the query head.
class FarNetModel {
 public:
  FarNetModel() = default;
  FarNetModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  /// Stable parameter order; checkpoints serialize in this order.
  NamedParameters parameters() const;
  std::vector<Tensor> parameter_tensors() const;
  void zero_grad() const;

  const ImageEncoder& reference_encoder() const { return image_encoder; }
  const ImageEncoder& target_encoder() const {
    return config_.share_image_encoders ? image_encoder : separate_target_encoder;
  }

  /// Computes every enabled loss term. When `fixed_noise` is given it is used
  /// as the perturbation; otherwise noise is drawn from `noise_rng` with the
  /// per-batch target statistics, or with `running` after folding them in.
  BatchLosses forward(std::span<const Example> batch, const LossSettings& settings, Rng* noise_rng,
                      const arm::Perturbation* fixed_noise = nullptr, arm::RunningStats* running = nullptr) const;

  /// u_i: mean-pooled, projected, L2-normalized attended sequence.
  Tensor encode_query_u(const Tensor& attended) const;

  /// Unit-norm query embedding for retrieval. Does not record on any tape.
  Tensor query_embedding(const Example& example, QuerySource source, double lambda1) const;
  /// Unit-norm gallery embedding v = pooled target-encoder output.
  Tensor gallery_embedding(const Image& image) const;
  /// Reference-branch attention map (regions x tokens) for export.
  Tensor reference_attention(const Example& example) const;

  ImageEncoder image_encoder;
  ImageEncoder separate_target_encoder;
  TextEncoder text_encoder;
  CrossAttentionBlock cross_attention;
  Mlp fusion_mlp;
  Linear query_head;

 private:
  ModelConfig config_;
};

}  // namespace farnet
