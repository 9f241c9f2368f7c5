// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "farnet/tensor.hpp"

namespace farnet::retrieval {

/// Immutable gallery of unit-norm embeddings keyed by id.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  /// `embeddings` is [G x d]. Rejects duplicate ids and rows off the unit sphere.
  EmbeddingIndex(std::vector<std::size_t> ids, Tensor embeddings);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::size_t>& ids() const { return ids_; }
  const Tensor& embeddings() const { return embeddings_; }
  bool contains(std::size_t id) const;

 private:
  std::vector<std::size_t> ids_;
  Tensor embeddings_;
  std::size_t dim_ = 0;
};

/// Tolerance on the unit norm of indexed rows.
inline constexpr double kUnitNormTolerance = 1e-9;

/// Gallery ids by descending dot product with `query`, ties by ascending id.
std::vector<std::size_t> rank(const Tensor& query, const EmbeddingIndex& index);

using Rankings = std::vector<std::vector<std::size_t>>;

/// Fraction of queries whose truth is among the first `k` ranked ids.
double recall_at_k(const Rankings& rankings, const std::vector<std::size_t>& truths, std::size_t k);

/// Recall after restricting each ranking to the gallery ids sharing the
/// truth's subset group. `groups` maps every gallery id to its group.
double subset_recall_at_k(const Rankings& rankings, const std::vector<std::size_t>& truths,
                          const std::map<std::size_t, std::size_t>& groups, std::size_t k);

struct RecallReport {
  std::map<std::size_t, double> recall_at;
  std::map<std::size_t, double> subset_recall_at;
  double avg = 0.0;

  /// Single-line JSON object with fixed key names.
  std::string to_json() const;
  static RecallReport from_json(const std::string& text);
  bool operator==(const RecallReport&) const = default;
};

inline constexpr std::size_t kRecallKs[] = {1, 5, 10, 50};
inline constexpr std::size_t kSubsetKs[] = {1, 2, 3};

/// Builds the standard report; avg = (R@5 + subset R@1) / 2.
RecallReport make_report(const Rankings& rankings, const std::vector<std::size_t>& truths,
                         const std::map<std::size_t, std::size_t>& groups);

}  // namespace farnet::retrieval
