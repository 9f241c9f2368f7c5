// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/arm.hpp"

#include <cmath>

#include "farnet/errors.hpp"
#include "farnet/ops.hpp"

namespace farnet::arm {

namespace {

Tensor sum_defined(const Tensor& a, const Tensor& b) {
  if (a.defined() && b.defined()) return add(a, b);
  return a.defined() ? a : b;
}

}  // namespace

StatsMode parse_stats_mode(std::string_view text) {
  if (text == "per_batch") return StatsMode::PerBatch;
  if (text == "running") return StatsMode::Running;
  throw ConfigError("invalid stats mode '" + std::string(text) + "' (expected per_batch or running)");
}

std::string_view to_string(StatsMode mode) { return mode == StatsMode::PerBatch ? "per_batch" : "running"; }

TargetStats estimate_target_stats(const Tensor& targets) {
  if (!targets.defined() || targets.size() == 0) throw DimensionError("estimate_target_stats: empty batch");
  const auto v = targets.data();
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  const double mu = s / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return {mu, std::sqrt(ss / n)};
}

TargetStats RunningStats::update(const TargetStats& batch) {
  if (!initialized_) {
    stats_ = batch;
    initialized_ = true;
  } else {
    stats_.mean = momentum_ * stats_.mean + (1.0 - momentum_) * batch.mean;
    stats_.stddev = momentum_ * stats_.stddev + (1.0 - momentum_) * batch.stddev;
  }
  return stats_;
}

Perturbation sample_perturbation(const Shape& shape, const TargetStats& stats, Rng& rng) {
  if (!std::isfinite(stats.mean) || !std::isfinite(stats.stddev) || stats.stddev < 0.0) {
    throw DimensionError("sample_perturbation: statistics must be finite with stddev >= 0");
  }
  Perturbation p{Tensor::zeros(shape), Tensor::zeros(shape)};
  for (auto& a : p.alpha.data()) a = rng.normal(1.0, stats.stddev);
  for (auto& b : p.beta.data()) b = rng.normal(stats.mean, stats.stddev);
  return p;
}

Tensor apply_perturbation(const Tensor& targets, const Perturbation& noise) {
  return add(mul(targets, noise.alpha), noise.beta);
}

Tensor perturb(const Tensor& targets, const TargetStats& stats, Rng& rng) {
  return apply_perturbation(targets, sample_perturbation(targets.shape(), stats, rng));
}

Tensor retrieval_loss(const Tensor& queries, const Tensor& targets, double tau, NegativesMode mode) {
  if (queries.rank() != 2 || queries.shape() != targets.shape()) {
    throw DimensionError("retrieval_loss: queries " + shape_string(queries.shape()) + " vs targets " +
                         shape_string(targets.shape()));
  }
  if (queries.rows() < 2) throw DimensionError("retrieval_loss needs a batch of at least 2");
  if (mode == NegativesMode::InBatch) return contrastive_rows(scale(matmul_nt(queries, targets), 1.0 / tau));
  std::vector<Tensor> sims;
  sims.reserve(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) sims.push_back(dot(row(queries, i), row(targets, i)));
  return contrastive_matched(reshape(scale(stack(sims), 1.0 / tau), {queries.rows()}));
}

Tensor loss_res(const Tensor& queries, const Tensor& targets, const Tensor& perturbed_targets, double tau,
                double lambda2, NegativesMode mode) {
  if (!(lambda2 >= 0.0 && lambda2 <= 1.0)) {
    throw ConfigError("loss_res: lambda2 = " + std::to_string(lambda2) + " outside [0, 1]");
  }
  Tensor early = retrieval_loss(queries, targets, tau, mode);
  Tensor uncertainty = retrieval_loss(queries, perturbed_targets, tau, mode);
  return add(scale(early, lambda2), scale(uncertainty, 1.0 - lambda2));
}

Tensor prompt_embed(const Tensor& prompt, const std::vector<std::size_t>& tokens, const TextEncoder& text_encoder) {
  if (!prompt.defined()) throw DimensionError("prompt_embed: missing prompt state");
  return text_encoder.encode_with_prompt(prompt, tokens).pooled;
}

Tensor loss_pi(const Tensor& prompt_embeddings, const Tensor& targets, double tau, NegativesMode mode) {
  return retrieval_loss(prompt_embeddings, targets, tau, mode);
}

Tensor loss_arm(const Tensor& res, const Tensor& pi) { return sum_defined(res, pi); }

Tensor loss_total(const Tensor& esam, const Tensor& arm) { return sum_defined(esam, arm); }

}  // namespace farnet::arm
