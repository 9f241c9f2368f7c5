// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "farnet/image.hpp"

// Synthetic composed-retrieval data: rendered attribute scenes, templated
// single-attribute edits, and the on-disk dataset directory.
namespace farnet::data {

enum class Attribute : std::uint8_t { Shape = 0, Color, Size, Position, Background };
inline constexpr std::size_t kAttributeCount = 5;

std::string_view attribute_name(Attribute attribute);
/// Number of values an attribute can take.
std::size_t value_count(Attribute attribute);
std::string_view value_name(Attribute attribute, std::size_t value);
/// Inverse of value_name; throws DataError for unknown names.
std::size_t value_index(Attribute attribute, std::string_view name);
Attribute attribute_from_name(std::string_view name);

/// One value index per attribute, in Attribute order.
struct SceneSpec {
  std::array<std::uint8_t, kAttributeCount> values{};

  std::size_t get(Attribute a) const { return values[static_cast<std::size_t>(a)]; }
  SceneSpec with(Attribute a, std::size_t value) const;
  /// Mixed-radix index in [0, scene_space_size()).
  std::size_t code() const;
  static SceneSpec from_code(std::size_t code);
  std::string describe() const;

  auto operator<=>(const SceneSpec&) const = default;
};

std::size_t scene_space_size();

struct Edit {
  Attribute attribute = Attribute::Shape;
  std::size_t value = 0;
  bool operator==(const Edit&) const = default;
};

/// Templated modification text for an edit; `variant` selects one of the phrasings.
std::vector<std::string> modification_words(const Edit& edit, std::size_t variant);
inline constexpr std::size_t kTemplateVariants = 2;

/// Closed vocabulary covering every template word and value name, sorted.
std::vector<std::string> build_vocabulary();

/// Deterministic RGB raster of a scene. Sizes must be multiples of 4 in [4, 64].
Image render(const SceneSpec& spec, std::size_t size);
/// Per-pixel object mask matching render(), row-major.
std::vector<bool> foreground_mask(const SceneSpec& spec, std::size_t size);
/// Per-patch flag: patch contains at least one object pixel. Row-major over the patch grid.
std::vector<bool> foreground_patches(const SceneSpec& spec, std::size_t size, std::size_t patch);

struct GalleryItem {
  std::size_t id = 0;
  SceneSpec scene;
  std::size_t group = 0;
  std::uint64_t checksum = 0;
  bool operator==(const GalleryItem&) const = default;
};

struct Triplet {
  std::size_t id = 0;
  std::size_t reference_id = 0;  // gallery ids
  std::size_t target_id = 0;
  Edit edit;
  std::vector<std::string> words;
  std::size_t subset_group = 0;
  bool operator==(const Triplet&) const = default;
};

enum class Split { Train, Val, Test };
std::string_view split_name(Split split);
Split split_from_name(std::string_view name);

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::uint64_t seed = 0;
  std::size_t image_size = 32;
  std::vector<std::size_t> patch_sizes;  // patch sizes dividing image_size
  std::vector<std::string> vocabulary;   // token id = position
  std::vector<GalleryItem> gallery;      // gallery id = position
  std::vector<Triplet> triplets;         // triplet id = position
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  const std::vector<std::size_t>& split(Split s) const;
  std::size_t token_id(std::string_view word) const;
  std::vector<std::size_t> tokenize(const std::vector<std::string>& words) const;
  const SceneSpec& scene(std::size_t gallery_id) const { return gallery.at(gallery_id).scene; }
  /// Gallery ids per subset group.
  std::vector<std::vector<std::size_t>> groups() const;

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Image> images;                    // by gallery id
  std::vector<std::vector<std::size_t>> tokens;  // by triplet id

  bool operator==(const Dataset&) const = default;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Pure function of its arguments. Throws DataError on invalid ratios, n < 10,
/// or when disjoint subset groups cannot be placed.
Dataset generate_dataset(std::uint64_t seed, std::size_t n_triplets, SplitRatios ratios = {},
                         std::size_t image_size = 32);

/// Writes manifest.json and images/<id>.ppm; the directory is created if needed.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Verifies version and every image checksum before returning.
Dataset load_dataset(const std::filesystem::path& dir);

std::string image_file_name(std::size_t gallery_id);

}  // namespace farnet::data
