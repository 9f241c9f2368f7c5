// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "farnet/errors.hpp"
#include "farnet/rng.hpp"

namespace farnet::data {

namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {"shape", "color", "size", "position",
                                                                          "background"};

const std::array<std::vector<std::string_view>, kAttributeCount> kValueNames = {{
    {"circle", "square", "triangle", "cross"},
    {"red", "green", "blue", "yellow", "white"},
    {"small", "large"},
    {"center", "top", "bottom", "left", "right"},
    {"black", "gray"},
}};

// Phrasings per attribute; "{}" marks the value slot.
const std::array<std::array<std::string_view, kTemplateVariants>, kAttributeCount> kTemplates = {{
    {"change the shape to {}", "make it a {}"},
    {"make the color {}", "turn it {}"},
    {"make it {}", "change the size to {}"},
    {"move it to the {}", "place it at the {}"},
    {"make the background {}", "use a {} background"},
}};

constexpr std::array<std::array<std::uint8_t, 3>, 5> kObjectColors = {{
    {220, 40, 40},
    {40, 200, 60},
    {40, 80, 230},
    {230, 220, 40},
    {245, 245, 245},
}};
constexpr std::array<std::array<std::uint8_t, 3>, 2> kBackgroundColors = {{{0, 0, 0}, {110, 110, 110}}};

// Object centres in unit coordinates, indexed by position value.
constexpr std::array<std::array<double, 2>, 5> kCentres = {{
    {0.5, 0.5},
    {0.5, 0.27},
    {0.5, 0.73},
    {0.27, 0.5},
    {0.73, 0.5},
}};
constexpr std::array<double, 2> kRadii = {0.12, 0.22};

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

bool covers(const SceneSpec& spec, double px, double py) {
  const auto& c = kCentres[spec.get(Attribute::Position)];
  const double r = kRadii[spec.get(Attribute::Size)];
  const double dx = px - c[0];
  const double dy = py - c[1];
  switch (spec.get(Attribute::Shape)) {
    case 0:  // circle
      return dx * dx + dy * dy <= r * r;
    case 1:  // square
      return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
    case 2:  // triangle, apex up
      return dy >= -r && dy <= r && std::abs(dx) <= 0.5 * (dy + r);
    default:  // cross
      return (std::abs(dx) <= r / 3.0 && std::abs(dy) <= r) || (std::abs(dy) <= r / 3.0 && std::abs(dx) <= r);
  }
}

void check_render_size(std::size_t size) {
  if (size < 4 || size > 64 || size % 4 != 0) {
    throw DataError("unsupported image size " + std::to_string(size) + " (need a multiple of 4 in [4, 64])");
  }
}

json scene_json(const SceneSpec& s) {
  json j;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    j[std::string(kAttributeNames[a])] = std::string(kValueNames[a][s.values[a]]);
  }
  return j;
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    s.values[a] = static_cast<std::uint8_t>(
        value_index(static_cast<Attribute>(a), j.at(std::string(kAttributeNames[a])).get<std::string>()));
  }
  return s;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::string_view attribute_name(Attribute attribute) { return kAttributeNames[static_cast<std::size_t>(attribute)]; }

std::size_t value_count(Attribute attribute) { return kValueNames[static_cast<std::size_t>(attribute)].size(); }

std::string_view value_name(Attribute attribute, std::size_t value) {
  const auto& names = kValueNames[static_cast<std::size_t>(attribute)];
  if (value >= names.size()) throw DataError("value index out of range for " + std::string(attribute_name(attribute)));
  return names[value];
}

std::size_t value_index(Attribute attribute, std::string_view name) {
  const auto& names = kValueNames[static_cast<std::size_t>(attribute)];
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw DataError("unknown " + std::string(attribute_name(attribute)) + " value '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - names.begin());
}

Attribute attribute_from_name(std::string_view name) {
  auto it = std::find(kAttributeNames.begin(), kAttributeNames.end(), name);
  if (it == kAttributeNames.end()) throw DataError("unknown attribute '" + std::string(name) + "'");
  return static_cast<Attribute>(it - kAttributeNames.begin());
}

SceneSpec SceneSpec::with(Attribute a, std::size_t value) const {
  if (value >= value_count(a)) throw DataError("value index out of range for " + std::string(attribute_name(a)));
  SceneSpec out = *this;
  out.values[static_cast<std::size_t>(a)] = static_cast<std::uint8_t>(value);
  return out;
}

std::size_t SceneSpec::code() const {
  std::size_t c = 0;
  for (std::size_t a = 0; a < kAttributeCount; ++a) c = c * kValueNames[a].size() + values[a];
  return c;
}

SceneSpec SceneSpec::from_code(std::size_t code) {
  SceneSpec s;
  for (std::size_t a = kAttributeCount; a-- > 0;) {
    s.values[a] = static_cast<std::uint8_t>(code % kValueNames[a].size());
    code /= kValueNames[a].size();
  }
  return s;
}

std::string SceneSpec::describe() const {
  std::string out;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    if (a) out += ' ';
    out += kValueNames[a][values[a]];
  }
  return out;
}

std::size_t scene_space_size() {
  std::size_t n = 1;
  for (const auto& v : kValueNames) n *= v.size();
  return n;
}

std::vector<std::string> modification_words(const Edit& edit, std::size_t variant) {
  const auto tmpl = kTemplates[static_cast<std::size_t>(edit.attribute)][variant % kTemplateVariants];
  std::string text(tmpl);
  text.replace(text.find("{}"), 2, value_name(edit.attribute, edit.value));
  return split_words(text);
}

std::vector<std::string> build_vocabulary() {
  std::set<std::string> words;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    for (auto t : kTemplates[a]) {
      for (auto& w : split_words(t)) {
        if (w != "{}") words.insert(w);
      }
    }
    for (auto v : kValueNames[a]) words.insert(std::string(v));
  }
  return {words.begin(), words.end()};
}

Image render(const SceneSpec& spec, std::size_t size) {
  check_render_size(size);
  Image img;
  img.width = img.height = size;
  img.channels = 3;
  img.pixels.resize(size * size * 3);
  const auto mask = foreground_mask(spec, size);
  const auto& fg = kObjectColors[spec.get(Attribute::Color)];
  const auto& bg = kBackgroundColors[spec.get(Attribute::Background)];
  for (std::size_t i = 0; i < size * size; ++i) {
    const auto& c = mask[i] ? fg : bg;
    std::copy(c.begin(), c.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3));
  }
  return img;
}

std::vector<bool> foreground_mask(const SceneSpec& spec, std::size_t size) {
  check_render_size(size);
  std::vector<bool> mask(size * size);
  const double inv = 1.0 / static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      mask[y * size + x] = covers(spec, (static_cast<double>(x) + 0.5) * inv, (static_cast<double>(y) + 0.5) * inv);
    }
  }
  return mask;
}

std::vector<bool> foreground_patches(const SceneSpec& spec, std::size_t size, std::size_t patch) {
  if (patch == 0 || size % patch != 0) throw DataError("patch size must divide image size");
  const auto mask = foreground_mask(spec, size);
  const std::size_t grid = size / patch;
  std::vector<bool> out(grid * grid, false);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      if (mask[y * size + x]) out[(y / patch) * grid + x / patch] = true;
  return out;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    default:
      return "test";
  }
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw DataError("unknown split '" + std::string(name) + "'");
}

const std::vector<std::size_t>& DatasetManifest::split(Split s) const {
  switch (s) {
    case Split::Train:
      return train;
    case Split::Val:
      return val;
    default:
      return test;
  }
}

std::size_t DatasetManifest::token_id(std::string_view word) const {
  auto it = std::find(vocabulary.begin(), vocabulary.end(), word);
  if (it == vocabulary.end()) throw DataError("word '" + std::string(word) + "' not in vocabulary");
  return static_cast<std::size_t>(it - vocabulary.begin());
}

std::vector<std::size_t> DatasetManifest::tokenize(const std::vector<std::string>& words) const {
  std::vector<std::size_t> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(token_id(w));
  return ids;
}

std::vector<std::vector<std::size_t>> DatasetManifest::groups() const {
  std::size_t n = 0;
  for (const auto& g : gallery) n = std::max(n, g.group + 1);
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& g : gallery) out[g.group].push_back(g.id);
  return out;
}

std::string image_file_name(std::size_t gallery_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.ppm", gallery_id);
  return buf;
}

Dataset generate_dataset(std::uint64_t seed, std::size_t n_triplets, SplitRatios ratios, std::size_t image_size) {
  if (n_triplets < 10) throw DataError("need at least 10 triplets, got " + std::to_string(n_triplets));
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw DataError("split ratios must be non-negative and sum to 1");
  }
  check_render_size(image_size);

  Rng rng(seed);
  DatasetManifest m;
  m.seed = seed;
  m.image_size = image_size;
  for (std::size_t p = 1; p <= image_size; ++p)
    if (image_size % p == 0) m.patch_sizes.push_back(p);
  m.vocabulary = build_vocabulary();

  // Subset groups: every value of one attribute over a fixed setting of the
  // others. Groups are disjoint, so together they partition the gallery.
  // Many-valued attributes are placed first, then the two-valued ones; any
  // shortfall moves to the many-valued attributes.
  std::vector<bool> used(scene_space_size(), false);
  struct Pending {
    std::size_t ref, tgt;
    Edit edit;
    std::size_t variant;
    std::size_t group;
  };
  // Two-valued attributes yield two triplets per group, so their share is
  // capped at n/8 each; the remaining triplets split evenly.
  std::array<std::size_t, kAttributeCount> quota{};
  std::size_t rest = n_triplets, many = 0;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    if (value_count(static_cast<Attribute>(a)) <= 2) {
      quota[a] = n_triplets / 8;
      rest -= quota[a];
    } else {
      ++many;
    }
  }
  for (std::size_t a = 0, k = 0; a < kAttributeCount; ++a) {
    if (value_count(static_cast<Attribute>(a)) > 2) quota[a] = rest / many + (k++ < rest % many ? 1 : 0);
  }
  std::array<std::vector<Pending>, kAttributeCount> per_attr;
  std::size_t group_id = 0;
  // Opens a group for `attr` at a uniformly chosen free base; false when none is left.
  auto open_group = [&](Attribute attr) {
    std::vector<std::size_t> bases;
    for (std::size_t code = 0; code < scene_space_size(); ++code) {
      const SceneSpec base = SceneSpec::from_code(code);
      if (base.values[static_cast<std::size_t>(attr)] != 0) continue;
      bool free = true;
      for (std::size_t v = 0; v < value_count(attr) && free; ++v) free = !used[base.with(attr, v).code()];
      if (free) bases.push_back(code);
    }
    if (bases.empty()) return false;
    const SceneSpec base = SceneSpec::from_code(bases[rng.below(bases.size())]);
    const std::size_t first_id = m.gallery.size();
    for (std::size_t v = 0; v < value_count(attr); ++v) {
      const SceneSpec member = base.with(attr, v);
      used[member.code()] = true;
      m.gallery.push_back({m.gallery.size(), member, group_id, 0});
    }
    std::vector<Pending> group;
    for (std::size_t i = 0; i < value_count(attr); ++i) {
      for (std::size_t j = 0; j < value_count(attr); ++j) {
        if (i != j) group.push_back({first_id + i, first_id + j, Edit{attr, j}, 0, group_id});
      }
    }
    rng.shuffle(group);
    auto& list = per_attr[static_cast<std::size_t>(attr)];
    list.insert(list.end(), group.begin(), group.end());
    ++group_id;
    return true;
  };
  std::vector<Attribute> order;
  for (std::size_t a = 0; a < kAttributeCount; ++a) order.push_back(static_cast<Attribute>(a));
  std::stable_sort(order.begin(), order.end(),
                   [](Attribute x, Attribute y) { return value_count(x) > value_count(y); });
  std::size_t shortfall = 0;
  for (std::size_t pass = 0; pass < 2; ++pass) {
    for (auto attr : order) {
      const auto a = static_cast<std::size_t>(attr);
      if (pass == 1) {
        if (value_count(attr) <= 2 || shortfall == 0) continue;
        quota[a] += shortfall;
        shortfall = 0;
      }
      while (per_attr[a].size() < quota[a] && open_group(attr)) {
      }
      if (per_attr[a].size() < quota[a]) {
        shortfall += quota[a] - per_attr[a].size();
        quota[a] = per_attr[a].size();
      }
    }
  }
  if (shortfall > 0) {
    throw DataError("cannot place " + std::to_string(n_triplets) +
                    " triplets in disjoint subset groups; scene space exhausted");
  }
  std::vector<Pending> pairs;
  for (auto attr : order) {
    const auto a = static_cast<std::size_t>(attr);
    for (std::size_t i = 0; i < quota[a]; ++i) {
      Pending p = per_attr[a][i];
      p.variant = rng.below(kTemplateVariants);
      pairs.push_back(p);
    }
  }
  rng.shuffle(pairs);

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    m.triplets.push_back({i, p.ref, p.tgt, p.edit, modification_words(p.edit, p.variant), p.group});
  }

  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n_triplets)));
  const auto n_val = std::min(n_triplets - n_train,
                              static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(n_triplets))));
  for (std::size_t i = 0; i < n_triplets; ++i) {
    if (i < n_train) {
      m.train.push_back(i);
    } else if (i < n_train + n_val) {
      m.val.push_back(i);
    } else {
      m.test.push_back(i);
    }
  }

  Dataset ds;
  for (auto& g : m.gallery) {
    ds.images.push_back(render(g.scene, image_size));
    g.checksum = fnv1a64(encode_ppm(ds.images.back()));
  }
  for (const auto& t : m.triplets) ds.tokens.push_back(m.tokenize(t.words));
  ds.manifest = std::move(m);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  const auto& m = dataset.manifest;
  std::filesystem::create_directories(dir / "images");
  json j;
  j["format_version"] = m.format_version;
  j["seed"] = m.seed;
  j["image_size"] = m.image_size;
  j["patch_sizes"] = m.patch_sizes;
  j["vocabulary"] = m.vocabulary;
  json gallery = json::array();
  for (const auto& g : m.gallery) {
    gallery.push_back({{"id", g.id},
                       {"scene", scene_json(g.scene)},
                       {"group", g.group},
                       {"file", "images/" + image_file_name(g.id)},
                       {"fnv1a64", hex64(g.checksum)}});
  }
  j["gallery"] = std::move(gallery);
  json triplets = json::array();
  for (const auto& t : m.triplets) {
    triplets.push_back({{"id", t.id},
                        {"reference", t.reference_id},
                        {"target", t.target_id},
                        {"edit", {{"attribute", std::string(attribute_name(t.edit.attribute))},
                                  {"value", std::string(value_name(t.edit.attribute, t.edit.value))}}},
                        {"text", join_words(t.words)},
                        {"group", t.subset_group}});
  }
  j["triplets"] = std::move(triplets);
  j["splits"] = {{"train", m.train}, {"val", m.val}, {"test", m.test}};

  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    write_file_bytes(dir / "images" / image_file_name(i), encode_ppm(dataset.images[i]));
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << j.dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const auto bytes = read_file_bytes(manifest_path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  auto& m = ds.manifest;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != DatasetManifest::kFormatVersion) {
      throw DataError(manifest_path.string() + ": unsupported format_version " + std::to_string(m.format_version) +
                      " (expected " + std::to_string(DatasetManifest::kFormatVersion) + ")");
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.image_size = j.at("image_size").get<std::size_t>();
    m.patch_sizes = j.at("patch_sizes").get<std::vector<std::size_t>>();
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    for (const auto& g : j.at("gallery")) {
      GalleryItem item;
      item.id = g.at("id").get<std::size_t>();
      if (item.id != m.gallery.size()) throw DataError(manifest_path.string() + ": gallery ids must be contiguous");
      item.scene = scene_from_json(g.at("scene"));
      item.group = g.at("group").get<std::size_t>();
      item.checksum = std::stoull(g.at("fnv1a64").get<std::string>(), nullptr, 16);
      m.gallery.push_back(item);
    }
    for (const auto& t : j.at("triplets")) {
      Triplet trip;
      trip.id = t.at("id").get<std::size_t>();
      if (trip.id != m.triplets.size()) throw DataError(manifest_path.string() + ": triplet ids must be contiguous");
      trip.reference_id = t.at("reference").get<std::size_t>();
      trip.target_id = t.at("target").get<std::size_t>();
      if (trip.reference_id >= m.gallery.size() || trip.target_id >= m.gallery.size()) {
        throw DataError(manifest_path.string() + ": triplet " + std::to_string(trip.id) + " references unknown image");
      }
      const auto attr = attribute_from_name(t.at("edit").at("attribute").get<std::string>());
      trip.edit = Edit{attr, value_index(attr, t.at("edit").at("value").get<std::string>())};
      trip.words = split_words(t.at("text").get<std::string>());
      trip.subset_group = t.at("group").get<std::size_t>();
      m.triplets.push_back(std::move(trip));
    }
    m.train = j.at("splits").at("train").get<std::vector<std::size_t>>();
    m.val = j.at("splits").at("val").get<std::vector<std::size_t>>();
    m.test = j.at("splits").at("test").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }

  for (const auto* split : {&m.train, &m.val, &m.test}) {
    for (auto id : *split) {
      if (id >= m.triplets.size()) throw DataError(manifest_path.string() + ": split references unknown triplet");
    }
  }

  for (const auto& g : m.gallery) {
    const auto path = dir / "images" / image_file_name(g.id);
    const auto raw = read_file_bytes(path);
    if (fnv1a64(raw) != g.checksum) throw DataError("checksum mismatch: " + path.string());
    ds.images.push_back(decode_ppm(raw, path.string()));
  }
  for (const auto& t : m.triplets) ds.tokens.push_back(m.tokenize(t.words));
  return ds;
}

}  // namespace farnet::data
