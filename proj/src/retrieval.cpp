// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "farnet/errors.hpp"

namespace farnet::retrieval {

EmbeddingIndex::EmbeddingIndex(std::vector<std::size_t> ids, Tensor embeddings)
    : ids_(std::move(ids)), embeddings_(std::move(embeddings)) {
  if (!embeddings_.defined() || embeddings_.rank() != 2) throw DimensionError("embedding index needs a matrix");
  if (embeddings_.rows() != ids_.size()) {
    throw DimensionError("embedding index: " + std::to_string(ids_.size()) + " ids for " +
                         std::to_string(embeddings_.rows()) + " rows");
  }
  dim_ = embeddings_.cols();
  std::set<std::size_t> seen;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (!seen.insert(ids_[r]).second) throw IndexError("embedding index: duplicate id " + std::to_string(ids_[r]));
    double norm2 = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) norm2 += embeddings_.at(r, c) * embeddings_.at(r, c);
    if (std::abs(std::sqrt(norm2) - 1.0) > kUnitNormTolerance) {
      throw DegenerateVectorError("embedding index: row for id " + std::to_string(ids_[r]) + " is not unit norm");
    }
  }
}

bool EmbeddingIndex::contains(std::size_t id) const {
  return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

std::vector<std::size_t> rank(const Tensor& query, const EmbeddingIndex& index) {
  if (index.size() == 0) throw IndexError("rank: empty index");
  if (query.size() != index.dim()) {
    throw DimensionError("rank: query of size " + std::to_string(query.size()) + " vs index dim " +
                         std::to_string(index.dim()));
  }
  const std::size_t g = index.size(), d = index.dim();
  std::vector<double> scores(g, 0.0);
  const auto emb = index.embeddings().data();
  const auto q = query.data();
  for (std::size_t r = 0; r < g; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += q[c] * emb[r * d + c];
    scores[r] = s;
  }
  std::vector<std::size_t> order(g);
  std::iota(order.begin(), order.end(), 0);
  const auto& ids = index.ids();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  std::vector<std::size_t> out(g);
  for (std::size_t i = 0; i < g; ++i) out[i] = ids[order[i]];
  return out;
}

namespace {

void check_inputs(const Rankings& rankings, const std::vector<std::size_t>& truths, std::size_t k) {
  if (k == 0) throw ConfigError("recall: K must be at least 1");
  if (rankings.size() != truths.size()) {
    throw DimensionError("recall: " + std::to_string(rankings.size()) + " rankings for " +
                         std::to_string(truths.size()) + " truths");
  }
  if (rankings.empty()) throw DimensionError("recall: no queries");
}

bool hit(const std::vector<std::size_t>& ranking, std::size_t truth, std::size_t k) {
  const auto it = std::find(ranking.begin(), ranking.end(), truth);
  if (it == ranking.end()) throw IndexError("recall: truth id " + std::to_string(truth) + " absent from gallery");
  return static_cast<std::size_t>(it - ranking.begin()) < k;
}

}  // namespace

double recall_at_k(const Rankings& rankings, const std::vector<std::size_t>& truths, std::size_t k) {
  check_inputs(rankings, truths, k);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) hits += hit(rankings[q], truths[q], k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double subset_recall_at_k(const Rankings& rankings, const std::vector<std::size_t>& truths,
                          const std::map<std::size_t, std::size_t>& groups, std::size_t k) {
  check_inputs(rankings, truths, k);
  std::map<std::size_t, std::size_t> group_sizes;
  for (const auto& [id, g] : groups) ++group_sizes[g];
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto found = groups.find(truths[q]);
    if (found == groups.end()) throw IndexError("subset recall: truth id " + std::to_string(truths[q]) + " has no group");
    const std::size_t group = found->second;
    if (group_sizes[group] < 2) throw DataError("subset recall: group " + std::to_string(group) + " is a singleton");
    std::vector<std::size_t> filtered;
    for (auto id : rankings[q]) {
      const auto g = groups.find(id);
      if (g != groups.end() && g->second == group) filtered.push_back(id);
    }
    hits += hit(filtered, truths[q], k) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

std::string RecallReport::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : recall_at) j["recall@" + std::to_string(k)] = v;
  for (const auto& [k, v] : subset_recall_at) j["subset_recall@" + std::to_string(k)] = v;
  j["avg"] = avg;
  return j.dump();
}

RecallReport RecallReport::from_json(const std::string& text) {
  RecallReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object() || !j.contains("avg")) throw DataError("report: missing 'avg'");
    for (const auto& [key, value] : j.items()) {
      if (key == "avg") {
        r.avg = value.get<double>();
      } else if (key.rfind("subset_recall@", 0) == 0) {
        r.subset_recall_at[std::stoul(key.substr(14))] = value.get<double>();
      } else if (key.rfind("recall@", 0) == 0) {
        r.recall_at[std::stoul(key.substr(7))] = value.get<double>();
      } else {
        throw DataError("report: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  return r;
}

RecallReport make_report(const Rankings& rankings, const std::vector<std::size_t>& truths,
                         const std::map<std::size_t, std::size_t>& groups) {
  RecallReport r;
  for (auto k : kRecallKs) r.recall_at[k] = recall_at_k(rankings, truths, k);
  for (auto k : kSubsetKs) r.subset_recall_at[k] = subset_recall_at_k(rankings, truths, groups, k);
  r.avg = (r.recall_at.at(5) + r.subset_recall_at.at(1)) / 2.0;
  return r;
}

}  // namespace farnet::retrieval
