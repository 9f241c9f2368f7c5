// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "farnet/data.hpp"
#include "farnet/errors.hpp"
#include "farnet/image.hpp"

namespace farnet::data {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("farnet_test_data_" + name);
  fs::remove_all(dir);
  return dir;
}

SceneSpec spec(std::size_t shape, std::size_t color, std::size_t size, std::size_t position, std::size_t background) {
  SceneSpec s;
  s.values = {static_cast<std::uint8_t>(shape), static_cast<std::uint8_t>(color), static_cast<std::uint8_t>(size),
              static_cast<std::uint8_t>(position), static_cast<std::uint8_t>(background)};
  return s;
}

TEST(Render, IsDeterministic) {
  const SceneSpec s = spec(0, 0, 1, 0, 0);  // circle red large center black
  EXPECT_EQ(encode_ppm(render(s, 32)), encode_ppm(render(s, 32)));
}

TEST(Render, ColorChangeOnlyTouchesForegroundPixels) {
  const SceneSpec red = spec(1, 0, 1, 3, 1);
  const SceneSpec blue = red.with(Attribute::Color, 2);
  const Image a = render(red, 32), b = render(blue, 32);
  const auto mask = foreground_mask(red, 32);
  std::size_t changed = 0;
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 32; ++x) {
      bool differs = false;
      for (std::size_t c = 0; c < 3; ++c) differs |= a.at(x, y, c) != b.at(x, y, c);
      EXPECT_EQ(differs, static_cast<bool>(mask[y * 32 + x])) << x << "," << y;
      changed += differs ? 1 : 0;
    }
  }
  EXPECT_GT(changed, 0u);
}

TEST(Render, CornerShowsBackground) {
  const Image black = render(spec(2, 4, 0, 1, 0), 32);
  const Image gray = render(spec(2, 4, 0, 1, 1), 32);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(black.at(0, 0, c), 0);
    EXPECT_EQ(gray.at(31, 31, c), 110);
  }
}

TEST(Render, UnsupportedSizeThrows) {
  EXPECT_THROW(render(spec(0, 0, 0, 0, 0), 30), Error);
  EXPECT_THROW(render(spec(0, 0, 0, 0, 0), 128), Error);
}

TEST(Render, ForegroundPatchesFollowMask) {
  const SceneSpec s = spec(0, 1, 0, 3, 0);  // small circle on the left
  const auto mask = foreground_mask(s, 32);
  const auto patches = foreground_patches(s, 32, 8);
  ASSERT_EQ(patches.size(), 16u);
  for (std::size_t gy = 0; gy < 4; ++gy) {
    for (std::size_t gx = 0; gx < 4; ++gx) {
      bool any = false;
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) any |= mask[(gy * 8 + y) * 32 + gx * 8 + x];
      EXPECT_EQ(static_cast<bool>(patches[gy * 4 + gx]), any);
    }
  }
  EXPECT_GT(std::count(patches.begin(), patches.end(), true), 0);
  EXPECT_LT(std::count(patches.begin(), patches.end(), true), 16);
}

TEST(SceneSpec, CodeRoundTripsOverWholeSpace) {
  std::set<std::size_t> codes;
  for (std::size_t c = 0; c < scene_space_size(); ++c) {
    EXPECT_EQ(SceneSpec::from_code(c).code(), c);
    codes.insert(c);
  }
  EXPECT_EQ(scene_space_size(), 400u);
}

TEST(Vocabulary, IsSortedAndCoversTemplates) {
  const auto vocab = build_vocabulary();
  EXPECT_TRUE(std::is_sorted(vocab.begin(), vocab.end()));
  const std::set<std::string> words(vocab.begin(), vocab.end());
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    const auto attr = static_cast<Attribute>(a);
    for (std::size_t v = 0; v < value_count(attr); ++v) {
      for (std::size_t variant = 0; variant < kTemplateVariants; ++variant) {
        for (const auto& w : modification_words({attr, v}, variant)) EXPECT_TRUE(words.count(w)) << w;
      }
    }
  }
}

TEST(Generate, SameSeedGivesIdenticalDataset) {
  EXPECT_EQ(generate_dataset(7, 100), generate_dataset(7, 100));
  EXPECT_NE(generate_dataset(7, 100).manifest, generate_dataset(8, 100).manifest);
}

TEST(Generate, SplitSizesFollowRatios) {
  const auto ds = generate_dataset(3, 100, {0.8, 0.1, 0.1});
  EXPECT_EQ(ds.manifest.train.size(), 80u);
  EXPECT_EQ(ds.manifest.val.size(), 10u);
  EXPECT_EQ(ds.manifest.test.size(), 10u);
}

TEST(Generate, EveryTripletChangesExactlyTheEditedAttribute) {
  const auto ds = generate_dataset(11, 640);
  const auto& m = ds.manifest;
  ASSERT_EQ(m.triplets.size(), 640u);
  for (const auto& t : m.triplets) {
    const SceneSpec& ref = m.scene(t.reference_id);
    const SceneSpec& tgt = m.scene(t.target_id);
    std::size_t differing = 0;
    for (std::size_t a = 0; a < kAttributeCount; ++a) differing += ref.values[a] != tgt.values[a] ? 1 : 0;
    EXPECT_EQ(differing, 1u);
    EXPECT_EQ(tgt.get(t.edit.attribute), t.edit.value);
    EXPECT_NE(ref.get(t.edit.attribute), t.edit.value);
    const std::string value(value_name(t.edit.attribute, t.edit.value));
    EXPECT_NE(std::find(t.words.begin(), t.words.end(), value), t.words.end());
    const std::string old_value(value_name(t.edit.attribute, ref.get(t.edit.attribute)));
    EXPECT_EQ(std::find(t.words.begin(), t.words.end(), old_value), t.words.end());
    EXPECT_EQ(m.gallery[t.reference_id].group, t.subset_group);
    EXPECT_EQ(m.gallery[t.target_id].group, t.subset_group);
  }
}

TEST(Generate, GalleryHasNoDuplicatesAndGroupsPartitionIt) {
  const auto ds = generate_dataset(5, 640);
  const auto& m = ds.manifest;
  std::set<std::size_t> codes;
  for (const auto& g : m.gallery) EXPECT_TRUE(codes.insert(g.scene.code()).second);
  std::set<std::size_t> seen;
  for (const auto& group : m.groups()) {
    EXPECT_GE(group.size(), 2u);
    for (auto id : group) EXPECT_TRUE(seen.insert(id).second);
  }
  EXPECT_EQ(seen.size(), m.gallery.size());
}

TEST(Generate, InvalidInputsThrow) {
  EXPECT_THROW(generate_dataset(1, 100, {0.5, 0.1, 0.1}), DataError);
  EXPECT_THROW(generate_dataset(1, 100, {1.2, -0.1, -0.1}), DataError);
  EXPECT_THROW(generate_dataset(1, 5), DataError);
  EXPECT_THROW(generate_dataset(1, 100000), DataError);
}

TEST(Persistence, SaveLoadRoundTrip) {
  const auto dir = fresh_dir("roundtrip");
  const auto ds = generate_dataset(2, 60);
  save_dataset(ds, dir);
  EXPECT_EQ(load_dataset(dir), ds);
  EXPECT_TRUE(fs::exists(dir / "images" / "000000.ppm"));
  fs::remove_all(dir);
}

TEST(Persistence, TruncatedImageNamesTheFile) {
  const auto dir = fresh_dir("truncated");
  save_dataset(generate_dataset(2, 30), dir);
  const auto victim = dir / "images" / image_file_name(3);
  fs::resize_file(victim, fs::file_size(victim) - 10);
  try {
    load_dataset(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(image_file_name(3)), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Persistence, ForeignVersionIsRejected) {
  const auto dir = fresh_dir("version");
  save_dataset(generate_dataset(2, 30), dir);
  auto bytes = read_file_bytes(dir / "manifest.json");
  std::string text(bytes.begin(), bytes.end());
  const auto pos = text.find("\"format_version\": 1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 19, "\"format_version\": 2");
  write_file_bytes(dir / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
  try {
    load_dataset(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("format_version"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Persistence, MissingDirectoryIsDataError) {
  EXPECT_THROW(load_dataset(fresh_dir("absent")), DataError);
}

TEST(Image, PpmRoundTrip) {
  const Image img = render(spec(3, 3, 1, 4, 1), 16);
  EXPECT_EQ(decode_ppm(encode_ppm(img), "mem"), img);
  auto bytes = encode_ppm(img);
  bytes.pop_back();
  EXPECT_THROW(decode_ppm(bytes, "mem"), DataError);
}

TEST(Image, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64({}), 0xcbf29ce484222325ULL);
  const std::string a = "a";
  EXPECT_EQ(fnv1a64(std::vector<std::uint8_t>(a.begin(), a.end())), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace farnet::data
