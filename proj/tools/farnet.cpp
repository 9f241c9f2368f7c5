// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

// farnet: generate-data | train | eval | ablate | export-attention
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 checkpoint error, 1 other.
// Failures print exactly one line to stderr: "error[<kind>]: <message>".

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "farnet/checkpoint.hpp"
#include "farnet/config.hpp"
#include "farnet/data.hpp"
#include "farnet/errors.hpp"
#include "farnet/train.hpp"

namespace fs = std::filesystem;
using namespace farnet;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

struct EvalFlags {
  std::string checkpoint;
  std::string split;
  std::string dataset;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value config file");
  cmd->add_option("--seed", flags.seed, "overrides the config seed");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_flag("--quiet", flags.quiet, "suppress progress output");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig config = flags.config_path.empty() ? RunConfig{} : RunConfig::load(flags.config_path);
  if (flags.seed) config.seed = *flags.seed;
  config.validate();
  return config;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

int cmd_generate(const CommonFlags& flags) {
  const RunConfig config = resolve_config(flags);
  const fs::path dir = flags.out.empty() ? fs::path(config.dataset) : fs::path(flags.out);
  const auto dataset = data::generate_dataset(config.seed, config.n_triplets, config.ratios(), config.image_size);
  data::save_dataset(dataset, dir);
  const auto& m = dataset.manifest;
  std::cout << "dataset " << dir.string() << ": gallery " << m.gallery.size() << ", groups " << m.groups().size()
            << ", triplets " << m.triplets.size() << " (train " << m.train.size() << ", val " << m.val.size()
            << ", test " << m.test.size() << "), vocabulary " << m.vocabulary.size() << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  RunConfig config = resolve_config(flags);
  if (!flags.out.empty()) config.out = flags.out;
  const auto dataset = data::load_dataset(config.dataset);
  const auto result = train(config, dataset, config.out, flags.quiet ? nullptr : &std::cout);
  const auto& last = result.history.back();
  std::cout << "trained " << config.epochs << " epochs; val recall@1 " << last.val_recall_at_1 << "; checkpoint "
            << (fs::path(config.out) / "model.ckpt").string() << "\n";
  return 0;
}

struct Loaded {
  RunConfig config;
  data::Dataset dataset;
  FarNetModel model;
  data::Split split;
};

Loaded load_for_eval(const CommonFlags& flags, const EvalFlags& eval) {
  if (eval.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const Checkpoint ckpt = Checkpoint::load(eval.checkpoint);
  Loaded l;
  l.config = flags.config_path.empty() ? config_from_checkpoint(ckpt) : resolve_config(flags);
  const std::string dataset_dir = eval.dataset.empty() ? l.config.dataset : eval.dataset;
  l.dataset = data::load_dataset(dataset_dir);
  l.split = data::split_from_name(eval.split.empty() ? l.config.eval_split : eval.split);
  if (l.dataset.manifest.split(l.split).empty()) {
    throw DataError("split '" + std::string(data::split_name(l.split)) + "' has no triplets");
  }
  l.model = model_from_checkpoint(ckpt, l.dataset);
  return l;
}

int cmd_eval(const CommonFlags& flags, const EvalFlags& eval) {
  const Loaded l = load_for_eval(flags, eval);
  const QuerySource source = effective_query_source(l.config.query_source, l.config.switches());
  const auto report = evaluate(l.model, l.dataset, l.split, source, l.config.lambda1).report;
  const fs::path out = flags.out.empty() ? fs::path(l.config.out) : fs::path(flags.out);
  fs::create_directories(out);
  const fs::path file = out / ("report_" + std::string(data::split_name(l.split)) + ".json");
  write_file(file, report.to_json() + "\n");
  std::cout << report.to_json() << "\n";
  return 0;
}

int cmd_ablate(const CommonFlags& flags) {
  RunConfig config = resolve_config(flags);
  if (!flags.out.empty()) config.out = flags.out;
  const auto dataset = data::load_dataset(config.dataset);
  const auto rows = run_ablation(config, dataset, config.out, flags.quiet ? nullptr : &std::cout);
  std::cout << ablation_csv(rows);
  return 0;
}

int cmd_export(const CommonFlags& flags, const EvalFlags& eval) {
  const Loaded l = load_for_eval(flags, eval);
  const fs::path out = flags.out.empty() ? fs::path(l.config.out) / "attention" : fs::path(flags.out);
  const auto paths = export_attention(l.model, l.dataset, l.dataset.manifest.split(l.split), out);
  std::cout << "wrote " << paths.size() << " attention maps to " << out.string() << "\n";
  return 0;
}

int fail(const char* kind, const std::string& message, int code) {
  std::string line = message;
  for (auto& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error[" << kind << "]: " << line << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FAR-Net composed image retrieval on synthetic scenes"};
  app.require_subcommand(1);
  CommonFlags flags;
  EvalFlags eval;

  auto* gen = app.add_subcommand("generate-data", "render the synthetic dataset directory");
  add_common(gen, flags);
  auto* tr = app.add_subcommand("train", "train a model and write metrics and a checkpoint");
  add_common(tr, flags);
  auto* ev = app.add_subcommand("eval", "recall report for a checkpoint on one split");
  add_common(ev, flags);
  auto* ab = app.add_subcommand("ablate", "train every loss ablation over several seeds");
  add_common(ab, flags);
  auto* ex = app.add_subcommand("export-attention", "write per-query attention maps as CSV");
  add_common(ex, flags);
  for (auto* cmd : {ev, ex}) {
    cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
    cmd->add_option("--split", eval.split, "train, val or test");
    cmd->add_option("--dataset", eval.dataset, "dataset directory (defaults to the config's)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), 2);
  }

  try {
    if (gen->parsed()) return cmd_generate(flags);
    if (tr->parsed()) return cmd_train(flags);
    if (ev->parsed()) return cmd_eval(flags, eval);
    if (ab->parsed()) return cmd_ablate(flags);
    return cmd_export(flags, eval);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::Config:
        return fail("config", e.what(), 2);
      case ErrorKind::Data:
        return fail("data", e.what(), 3);
      case ErrorKind::Checkpoint:
        return fail("checkpoint", e.what(), 4);
      default:
        return fail("internal", e.what(), 1);
    }
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
