// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "farnet/arm.hpp"
#include "farnet/contrastive.hpp"
#include "farnet/data.hpp"
#include "farnet/model.hpp"

namespace farnet {

/// Upper bound on modification-text length; the text encoder also sees the
/// region prompt, so its positional table spans regions + this many tokens.
inline constexpr std::size_t kMaxModificationWords = 16;

/// Constant, or linear warmup followed by cosine decay to zero.
enum class LrSchedule { Constant, Cosine };
LrSchedule parse_lr_schedule(std::string_view text);
std::string_view to_string(LrSchedule schedule);
/// Learning rate for 0-based `step` of `total_steps`.
double scheduled_lr(double peak, LrSchedule schedule, std::size_t warmup_steps, std::size_t step,
                    std::size_t total_steps);

/// Every knob of a run. Loaded from flat `key = value` text; `#` starts a comment.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string dataset = "data";
  std::string out = "runs";

  // Dataset generation.
  std::size_t n_triplets = 640;
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  double test_ratio = 0.1;
  std::size_t image_size = 32;

  // Model.
  std::size_t embed_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t patch_size = 8;
  std::size_t mlp_ratio = 4;
  bool share_image_encoders = true;

  // Objective.
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double tau = 0.07;
  NegativesMode negatives_mode = NegativesMode::InBatch;
  NegativesMode attention_negatives = NegativesMode::AsWritten;
  arm::StatsMode stats_mode = arm::StatsMode::PerBatch;
  bool use_late = true;
  bool use_attention = true;
  bool use_res = true;
  bool use_pi = true;

  // Optimization.
  double lr = 1e-3;
  LrSchedule lr_schedule = LrSchedule::Constant;
  std::size_t warmup_steps = 0;
  double weight_decay = 0.05;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;

  // Evaluation.
  QuerySource query_source = QuerySource::U;
  std::string eval_split = "val";
  std::size_t ablation_seeds = 3;

  /// Throws ConfigError on the first invalid field.
  void validate() const;
  /// Canonical text: every key in declaration order, doubles round-trippable.
  std::string to_text() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Applies one `key`/`value` pair; unknown keys are rejected.
  void set(const std::string& key, const std::string& value);

  data::SplitRatios ratios() const { return {train_ratio, val_ratio, test_ratio}; }
  LossSwitches switches() const { return {use_late, use_attention, use_res, use_pi}; }
  LossSettings loss_settings() const;
  /// Model shape given the dataset's vocabulary size.
  ModelConfig model_config(std::size_t vocab_size) const;

  bool operator==(const RunConfig&) const = default;
};

}  // namespace farnet
