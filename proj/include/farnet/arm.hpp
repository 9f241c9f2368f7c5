// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>
#include <vector>

#include "farnet/contrastive.hpp"
#include "farnet/encoders.hpp"
#include "farnet/rng.hpp"
#include "farnet/tensor.hpp"

// Early-fusion reconciliation: uncertainty-perturbed retrieval loss and the
// prompt-to-image loss.
namespace farnet::arm {

/// Scalar statistics of the target-embedding distribution.
struct TargetStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

enum class StatsMode { PerBatch, Running };
StatsMode parse_stats_mode(std::string_view text);
std::string_view to_string(StatsMode mode);

/// Mean and population stddev over every entry of a [B x d] batch.
TargetStats estimate_target_stats(const Tensor& targets);

/// Exponential moving average of per-batch statistics.
class RunningStats {
 public:
  explicit RunningStats(double momentum = 0.9) : momentum_(momentum) {}
  TargetStats update(const TargetStats& batch);
  const TargetStats& current() const { return stats_; }
  bool initialized() const { return initialized_; }
  double momentum() const { return momentum_; }
  /// Restores a previously captured state (checkpoint resume).
  void restore(const TargetStats& stats, bool initialized) {
    stats_ = stats;
    initialized_ = initialized;
  }

 private:
  double momentum_;
  TargetStats stats_;
  bool initialized_ = false;
};

/// Per-entry noise: alpha ~ N(1, sigma_t), beta ~ N(mu_t, sigma_t). Constant on the tape.
struct Perturbation {
  Tensor alpha;
  Tensor beta;
};

/// Draws every alpha entry, then every beta entry, in row-major order.
Perturbation sample_perturbation(const Shape& shape, const TargetStats& stats, Rng& rng);
/// alpha ⊙ v + beta. The result is not renormalized.
Tensor apply_perturbation(const Tensor& targets, const Perturbation& noise);
Tensor perturb(const Tensor& targets, const TargetStats& stats, Rng& rng);

/// Generic retrieval objective over dot-product logits u_i · v*_j / tau.
Tensor retrieval_loss(const Tensor& queries, const Tensor& targets, double tau,
                      NegativesMode mode = NegativesMode::InBatch);

/// lambda2 * L(u, v) + (1 - lambda2) * L(u, v_hat).
Tensor loss_res(const Tensor& queries, const Tensor& targets, const Tensor& perturbed_targets, double tau,
                double lambda2, NegativesMode mode = NegativesMode::InBatch);

/// u' = pooled text-encoder output over [prompt ; modification tokens].
Tensor prompt_embed(const Tensor& prompt, const std::vector<std::size_t>& tokens, const TextEncoder& text_encoder);

/// Retrieval objective between prompt embeddings and targets.
Tensor loss_pi(const Tensor& prompt_embeddings, const Tensor& targets, double tau,
               NegativesMode mode = NegativesMode::InBatch);

/// Sum of the enabled terms (undefined = disabled).
Tensor loss_arm(const Tensor& res, const Tensor& pi);
Tensor loss_total(const Tensor& esam, const Tensor& arm);

}  // namespace farnet::arm
