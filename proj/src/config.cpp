// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "farnet/errors.hpp"

namespace farnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  errno = 0;
  const unsigned long long x = std::strtoull(v.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(key + ": integer out of range '" + v + "'");
  return x;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x)) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// One entry per key, in canonical order.
struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(const char* key, T RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_u64(key, v)); },
          [=](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(const char* key, double RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = parse_double(key, v); },
          [=](const RunConfig& c) { return format_double(c.*member); }};
}

Field bool_field(const char* key, bool RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
          [=](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field string_field(const char* key, std::string RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = v; },
          [=](const RunConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      size_field("seed", &RunConfig::seed),
      string_field("dataset", &RunConfig::dataset),
      string_field("out", &RunConfig::out),
      size_field("n_triplets", &RunConfig::n_triplets),
      double_field("train_ratio", &RunConfig::train_ratio),
      double_field("val_ratio", &RunConfig::val_ratio),
      double_field("test_ratio", &RunConfig::test_ratio),
      size_field("image_size", &RunConfig::image_size),
      size_field("embed_dim", &RunConfig::embed_dim),
      size_field("layers", &RunConfig::layers),
      size_field("heads", &RunConfig::heads),
      size_field("patch_size", &RunConfig::patch_size),
      size_field("mlp_ratio", &RunConfig::mlp_ratio),
      bool_field("share_image_encoders", &RunConfig::share_image_encoders),
      double_field("lambda1", &RunConfig::lambda1),
      double_field("lambda2", &RunConfig::lambda2),
      double_field("tau", &RunConfig::tau),
      {"negatives_mode",
       [](RunConfig& c, const std::string& v) { c.negatives_mode = parse_negatives_mode(v); },
       [](const RunConfig& c) { return std::string(to_string(c.negatives_mode)); }},
      {"attention_negatives",
       [](RunConfig& c, const std::string& v) { c.attention_negatives = parse_negatives_mode(v); },
       [](const RunConfig& c) { return std::string(to_string(c.attention_negatives)); }},
      {"stats_mode", [](RunConfig& c, const std::string& v) { c.stats_mode = arm::parse_stats_mode(v); },
       [](const RunConfig& c) { return std::string(arm::to_string(c.stats_mode)); }},
      bool_field("use_late", &RunConfig::use_late),
      bool_field("use_attention", &RunConfig::use_attention),
      bool_field("use_res", &RunConfig::use_res),
      bool_field("use_pi", &RunConfig::use_pi),
      double_field("lr", &RunConfig::lr),
      {"lr_schedule", [](RunConfig& c, const std::string& v) { c.lr_schedule = parse_lr_schedule(v); },
       [](const RunConfig& c) { return std::string(to_string(c.lr_schedule)); }},
      size_field("warmup_steps", &RunConfig::warmup_steps),
      double_field("weight_decay", &RunConfig::weight_decay),
      size_field("batch_size", &RunConfig::batch_size),
      size_field("epochs", &RunConfig::epochs),
      {"query_source", [](RunConfig& c, const std::string& v) { c.query_source = parse_query_source(v); },
       [](const RunConfig& c) { return std::string(to_string(c.query_source)); }},
      string_field("eval_split", &RunConfig::eval_split),
      size_field("ablation_seeds", &RunConfig::ablation_seeds),
  };
  return table;
}

}  // namespace

LrSchedule parse_lr_schedule(std::string_view text) {
  if (text == "constant") return LrSchedule::Constant;
  if (text == "cosine") return LrSchedule::Cosine;
  throw ConfigError("invalid lr_schedule '" + std::string(text) + "' (expected constant or cosine)");
}

std::string_view to_string(LrSchedule schedule) { return schedule == LrSchedule::Constant ? "constant" : "cosine"; }

double scheduled_lr(double peak, LrSchedule schedule, std::size_t warmup_steps, std::size_t step,
                    std::size_t total_steps) {
  if (step < warmup_steps) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  if (schedule == LrSchedule::Constant || total_steps <= warmup_steps) return peak;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  if (dataset.empty()) throw ConfigError("dataset: path must not be empty");
  if (out.empty()) throw ConfigError("out: path must not be empty");
  if (n_triplets < 10) throw ConfigError("n_triplets: need at least 10");
  for (double r : {train_ratio, val_ratio, test_ratio}) {
    if (r < 0.0 || r > 1.0) throw ConfigError("split ratios must lie in [0, 1]");
  }
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (image_size < 4 || image_size > 64 || image_size % 4 != 0) {
    throw ConfigError("image_size: must be a multiple of 4 in [4, 64]");
  }
  if (patch_size == 0 || image_size % patch_size != 0) {
    throw ConfigError("patch_size " + std::to_string(patch_size) + " does not divide image_size " +
                      std::to_string(image_size));
  }
  if (embed_dim == 0 || layers == 0 || heads == 0 || mlp_ratio == 0) {
    throw ConfigError("embed_dim, layers, heads and mlp_ratio must be positive");
  }
  if (embed_dim % heads != 0) throw ConfigError("embed_dim must be divisible by heads");
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw ConfigError("lambda1 must lie in [0, 1]");
  if (!(lambda2 >= 0.0 && lambda2 <= 1.0)) throw ConfigError("lambda2 must lie in [0, 1]");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(use_late || use_attention || use_res || use_pi)) throw ConfigError("at least one loss must be enabled");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (eval_split != "train" && eval_split != "val" && eval_split != "test") {
    throw ConfigError("eval_split must be train, val or test");
  }
  if (ablation_seeds == 0) throw ConfigError("ablation_seeds must be positive");
}

std::string RunConfig::to_text() const {
  std::string text;
  for (const auto& f : fields()) text += std::string(f.key) + " = " + f.get(*this) + "\n";
  return text;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

LossSettings RunConfig::loss_settings() const {
  return {lambda1, lambda2, tau, negatives_mode, attention_negatives, switches()};
}

ModelConfig RunConfig::model_config(std::size_t vocab_size) const {
  ModelConfig m;
  m.embed_dim = embed_dim;
  m.layers = layers;
  m.heads = heads;
  m.patch_size = patch_size;
  m.image_size = image_size;
  m.mlp_ratio = mlp_ratio;
  m.vocab_size = vocab_size;
  const std::size_t grid = image_size / patch_size;
  m.max_text_length = grid * grid + kMaxModificationWords;
  m.share_image_encoders = share_image_encoders;
  return m;
}

}  // namespace farnet
