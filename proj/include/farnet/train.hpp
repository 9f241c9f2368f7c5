// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "farnet/checkpoint.hpp"
#include "farnet/config.hpp"
#include "farnet/data.hpp"
#include "farnet/model.hpp"
#include "farnet/retrieval.hpp"

// Training loop, evaluation, ablation sweep and attention export.
namespace farnet {

/// One metrics-log record. Epoch 0 is the untrained model.
struct EpochRecord {
  std::size_t epoch = 0;
  double late = 0.0, attention = 0.0, res = 0.0, pi = 0.0, total = 0.0;
  double val_recall_at_1 = 0.0;

  std::string to_json() const;
  static EpochRecord from_json(const std::string& line);
  bool operator==(const EpochRecord&) const = default;
};

std::string metrics_csv(const std::vector<EpochRecord>& history);

std::vector<Example> make_examples(const data::Dataset& dataset, const std::vector<std::size_t>& triplet_ids);
/// Gallery id -> subset group.
std::map<std::size_t, std::size_t> gallery_groups(const data::DatasetManifest& manifest);
retrieval::EmbeddingIndex build_gallery_index(const FarNetModel& model, const data::Dataset& dataset);

struct Evaluation {
  retrieval::RecallReport report;
  retrieval::Rankings rankings;
  std::vector<std::size_t> truths;
};

/// Ranks the full gallery for every query of `triplet_ids`.
Evaluation evaluate(const FarNetModel& model, const data::Dataset& dataset, const std::vector<std::size_t>& triplet_ids,
                    QuerySource source, double lambda1);
Evaluation evaluate(const FarNetModel& model, const data::Dataset& dataset, data::Split split, QuerySource source,
                    double lambda1);

/// Throws ConfigError when the dataset cannot feed the configured model.
void check_compatible(const RunConfig& config, const data::DatasetManifest& manifest);

struct TrainResult {
  FarNetModel model;
  std::vector<EpochRecord> history;
  Checkpoint checkpoint;
};

/// Trains from scratch. When `out_dir` is non-empty, writes metrics.jsonl
/// (one line per epoch, flushed as produced), metrics.csv and model.ckpt.
TrainResult train(const RunConfig& config, const data::Dataset& dataset, const std::filesystem::path& out_dir,
                  std::ostream* progress = nullptr);

/// Rebuilds the model a checkpoint was taken from.
FarNetModel model_from_checkpoint(const Checkpoint& checkpoint, const data::Dataset& dataset);
RunConfig config_from_checkpoint(const Checkpoint& checkpoint);

struct AblationVariant {
  std::string label;
  LossSwitches use;
};

/// The seven rows, in table order: the four single-loss removals, the two
/// module-only settings and the full model.
const std::vector<AblationVariant>& ablation_variants();

struct AblationRow {
  AblationVariant variant;
  std::vector<std::uint64_t> seeds;
  std::vector<double> recall_at_1;
  std::vector<double> recall_at_5;
  double mean_recall_at_1 = 0.0;
  double mean_recall_at_5 = 0.0;
};

/// Trains every variant for seeds config.seed .. config.seed + ablation_seeds - 1.
/// Each run writes into `out_dir/<slug>/seed_<n>/` when `out_dir` is non-empty.
std::vector<AblationRow> run_ablation(const RunConfig& config, const data::Dataset& dataset,
                                      const std::filesystem::path& out_dir, std::ostream* progress = nullptr);
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Writes `attention_<triplet id>.csv` (regions x tokens, row-major) per query.
std::vector<std::filesystem::path> export_attention(const FarNetModel& model, const data::Dataset& dataset,
                                                    const std::vector<std::size_t>& triplet_ids,
                                                    const std::filesystem::path& out_dir);
Tensor read_attention_csv(const std::filesystem::path& path);

/// Share of attention on foreground regions: each token's column is normalized
/// to a distribution over regions, then the foreground mass is averaged over tokens.
double foreground_attention_mass(const Tensor& map, const std::vector<bool>& foreground_regions);

}  // namespace farnet
