// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/train.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "farnet/adamw.hpp"
#include "farnet/errors.hpp"
#include "farnet/ops.hpp"

namespace farnet {

namespace {

// Substream ids under Rng(seed).
constexpr std::uint64_t kTrainStream = 7;
constexpr std::uint64_t kEpochZeroStream = 8;
constexpr std::uint64_t kNoiseStream = 9;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t>& order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    if (end - i < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

struct LossSums {
  double late = 0, attention = 0, res = 0, pi = 0, total = 0;
  std::size_t batches = 0;

  void add(const BatchLosses& l) {
    late += BatchLosses::value(l.late);
    attention += BatchLosses::value(l.attention);
    res += BatchLosses::value(l.res);
    pi += BatchLosses::value(l.pi);
    total += BatchLosses::value(l.total);
    ++batches;
  }
  EpochRecord record(std::size_t epoch, double r1) const {
    const double n = static_cast<double>(std::max<std::size_t>(batches, 1));
    return {epoch, late / n, attention / n, res / n, pi / n, total / n, r1};
  }
};

std::vector<Example> gather(const std::vector<Example>& all, const std::vector<std::size_t>& positions) {
  std::vector<Example> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(all[p]);
  return out;
}

std::string snapshot_text(const RunConfig& config) {
  // The output location is not part of the run's identity.
  RunConfig snapshot = config;
  snapshot.out = RunConfig{}.out;
  return snapshot.to_text();
}

QuerySource resolved_query_source(const RunConfig& config) {
  return effective_query_source(config.query_source, config.switches());
}

}  // namespace

std::string EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["L_Late"] = late;
  j["L_Attention"] = attention;
  j["L_Res"] = res;
  j["L_PI"] = pi;
  j["L_Total"] = total;
  j["val_recall@1"] = val_recall_at_1;
  return j.dump();
}

EpochRecord EpochRecord::from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    return {j.at("epoch").get<std::size_t>(),   j.at("L_Late").get<double>(), j.at("L_Attention").get<double>(),
            j.at("L_Res").get<double>(),        j.at("L_PI").get<double>(),   j.at("L_Total").get<double>(),
            j.at("val_recall@1").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics record: ") + e.what());
  }
}

std::string metrics_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,L_Late,L_Attention,L_Res,L_PI,L_Total,val_recall@1\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.late) + "," + format_double(r.attention) + "," +
           format_double(r.res) + "," + format_double(r.pi) + "," + format_double(r.total) + "," +
           format_double(r.val_recall_at_1) + "\n";
  }
  return out;
}

std::vector<Example> make_examples(const data::Dataset& dataset, const std::vector<std::size_t>& triplet_ids) {
  std::vector<Example> out;
  out.reserve(triplet_ids.size());
  for (auto id : triplet_ids) {
    if (id >= dataset.manifest.triplets.size()) throw IndexError("unknown triplet id " + std::to_string(id));
    const auto& t = dataset.manifest.triplets[id];
    out.push_back({&dataset.images.at(t.reference_id), &dataset.images.at(t.target_id), &dataset.tokens.at(id)});
  }
  return out;
}

std::map<std::size_t, std::size_t> gallery_groups(const data::DatasetManifest& manifest) {
  std::map<std::size_t, std::size_t> out;
  for (const auto& g : manifest.gallery) out[g.id] = g.group;
  return out;
}

retrieval::EmbeddingIndex build_gallery_index(const FarNetModel& model, const data::Dataset& dataset) {
  std::vector<std::size_t> ids;
  std::vector<Tensor> rows;
  for (const auto& g : dataset.manifest.gallery) {
    ids.push_back(g.id);
    rows.push_back(model.gallery_embedding(dataset.images.at(g.id)));
  }
  NoGradScope no_grad;
  return {std::move(ids), stack(rows)};
}

Evaluation evaluate(const FarNetModel& model, const data::Dataset& dataset, const std::vector<std::size_t>& triplet_ids,
                    QuerySource source, double lambda1) {
  if (triplet_ids.empty()) throw DataError("evaluation split has no triplets");
  const auto index = build_gallery_index(model, dataset);
  Evaluation ev;
  const auto examples = make_examples(dataset, triplet_ids);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    ev.rankings.push_back(retrieval::rank(model.query_embedding(examples[i], source, lambda1), index));
    ev.truths.push_back(dataset.manifest.triplets[triplet_ids[i]].target_id);
  }
  ev.report = retrieval::make_report(ev.rankings, ev.truths, gallery_groups(dataset.manifest));
  return ev;
}

Evaluation evaluate(const FarNetModel& model, const data::Dataset& dataset, data::Split split, QuerySource source,
                    double lambda1) {
  return evaluate(model, dataset, dataset.manifest.split(split), source, lambda1);
}

void check_compatible(const RunConfig& config, const data::DatasetManifest& manifest) {
  if (manifest.image_size != config.image_size) {
    throw ConfigError("dataset images are " + std::to_string(manifest.image_size) + " px but config image_size is " +
                      std::to_string(config.image_size));
  }
  if (manifest.image_size % config.patch_size != 0) {
    throw ConfigError("patch_size " + std::to_string(config.patch_size) + " does not divide dataset image size " +
                      std::to_string(manifest.image_size));
  }
  for (const auto& t : manifest.triplets) {
    if (t.words.size() > kMaxModificationWords) {
      throw ConfigError("triplet " + std::to_string(t.id) + " text exceeds " + std::to_string(kMaxModificationWords) +
                        " tokens");
    }
  }
}

TrainResult train(const RunConfig& config, const data::Dataset& dataset, const std::filesystem::path& out_dir,
                  std::ostream* progress) {
  config.validate();
  const auto& manifest = dataset.manifest;
  check_compatible(config, manifest);
  if (manifest.train.size() < 2) throw DataError("training split needs at least 2 triplets");
  if (manifest.val.empty()) throw DataError("validation split is empty");

  TrainResult result;
  result.model = FarNetModel(config.model_config(manifest.vocabulary.size()), config.seed);
  const FarNetModel& model = result.model;
  auto params = model.parameter_tensors();
  AdamWState optimizer = AdamWState::for_parameters(params);
  AdamWConfig adamw{config.lr, config.weight_decay};
  const LossSettings settings = config.loss_settings();
  const QuerySource source = resolved_query_source(config);
  Rng rng = Rng(config.seed).substream(kTrainStream);
  arm::RunningStats running;
  arm::RunningStats* running_ptr = config.stats_mode == arm::StatsMode::Running ? &running : nullptr;
  const auto train_examples = make_examples(dataset, manifest.train);

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw DataError("cannot write " + (out_dir / "metrics.jsonl").string());
  }
  auto emit = [&](const EpochRecord& r) {
    result.history.push_back(r);
    if (log.is_open()) log << r.to_json() << '\n' << std::flush;
    if (progress != nullptr) *progress << r.to_json() << '\n' << std::flush;
  };
  auto val_r1 = [&] { return evaluate(model, dataset, data::Split::Val, source, config.lambda1).report.recall_at.at(1); };

  {
    // Epoch 0: losses of the untrained model over the training split, in order.
    NoGradScope no_grad;
    Rng noise = Rng(config.seed).substream(kEpochZeroStream);
    arm::RunningStats probe;
    std::vector<std::size_t> order(train_examples.size());
    std::iota(order.begin(), order.end(), 0);
    LossSums sums;
    for (const auto& b : batches_of(order, config.batch_size)) {
      const auto batch = gather(train_examples, b);
      sums.add(model.forward(batch, settings, &noise, nullptr, running_ptr ? &probe : nullptr));
    }
    emit(sums.record(0, val_r1()));
  }

  const Rng noise_root = Rng(config.seed).substream(kNoiseStream);
  const std::size_t steps_per_epoch = batches_of(std::vector<std::size_t>(train_examples.size()), config.batch_size).size();
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(train_examples.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    LossSums sums;
    for (const auto& b : batches_of(order, config.batch_size)) {
      const auto batch = gather(train_examples, b);
      Rng noise = noise_root.substream(step);
      Tape tape;
      BatchLosses losses;
      {
        TapeScope scope(tape);
        losses = model.forward(batch, settings, &noise, nullptr, running_ptr);
      }
      tape.backward(losses.total);
      adamw.lr = scheduled_lr(config.lr, config.lr_schedule, config.warmup_steps, step, total_steps);
      adamw_step(params, optimizer, adamw);
      ++step;
      model.zero_grad();
      sums.add(losses);
    }
    emit(sums.record(epoch, val_r1()));
  }

  Checkpoint& ckpt = result.checkpoint;
  ckpt.config_text = snapshot_text(config);
  ckpt.parameters = Checkpoint::capture(model.parameters());
  ckpt.optimizer = optimizer;
  ckpt.epoch = config.epochs;
  ckpt.rng_seed = rng.seed();
  ckpt.rng_counter = rng.counter();
  ckpt.stats_initialized = running.initialized();
  ckpt.running_stats = running.current();
  if (!out_dir.empty()) {
    write_text(out_dir / "metrics.csv", metrics_csv(result.history));
    ckpt.save(out_dir / "model.ckpt");
  }
  return result;
}

RunConfig config_from_checkpoint(const Checkpoint& checkpoint) {
  try {
    return RunConfig::parse(checkpoint.config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config snapshot: ") + e.what());
  }
}

FarNetModel model_from_checkpoint(const Checkpoint& checkpoint, const data::Dataset& dataset) {
  const RunConfig config = config_from_checkpoint(checkpoint);
  check_compatible(config, dataset.manifest);
  FarNetModel model(config.model_config(dataset.manifest.vocabulary.size()), config.seed);
  checkpoint.restore_parameters(model.parameters());
  return model;
}

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> variants = {
      {"w/o L_Late", {false, true, true, true}},   {"w/o L_Attention", {true, false, true, true}},
      {"w/o L_PI", {true, true, true, false}},     {"w/o L_Res", {true, true, false, true}},
      {"ESAM only", {true, true, false, false}},   {"ARM only", {false, false, true, true}},
      {"FAR-Net", {true, true, true, true}},
  };
  return variants;
}

namespace {

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& config, const data::Dataset& dataset,
                                      const std::filesystem::path& out_dir, std::ostream* progress) {
  std::vector<AblationRow> rows;
  for (const auto& variant : ablation_variants()) {
    AblationRow row;
    row.variant = variant;
    for (std::size_t s = 0; s < config.ablation_seeds; ++s) {
      RunConfig run = config;
      run.seed = config.seed + s;
      run.use_late = variant.use.late;
      run.use_attention = variant.use.attention;
      run.use_res = variant.use.res;
      run.use_pi = variant.use.pi;
      const auto dir = out_dir.empty() ? out_dir : out_dir / slug(variant.label) / ("seed_" + std::to_string(run.seed));
      if (progress != nullptr) *progress << "# " << variant.label << " seed " << run.seed << '\n';
      const TrainResult trained = train(run, dataset, dir, progress);
      const auto report = evaluate(trained.model, dataset, data::Split::Val, resolved_query_source(run), run.lambda1).report;
      row.seeds.push_back(run.seed);
      row.recall_at_1.push_back(report.recall_at.at(1));
      row.recall_at_5.push_back(report.recall_at.at(5));
    }
    const double n = static_cast<double>(row.seeds.size());
    row.mean_recall_at_1 = std::accumulate(row.recall_at_1.begin(), row.recall_at_1.end(), 0.0) / n;
    row.mean_recall_at_5 = std::accumulate(row.recall_at_5.begin(), row.recall_at_5.end(), 0.0) / n;
    rows.push_back(std::move(row));
  }
  if (!out_dir.empty()) write_text(out_dir / "ablation.csv", ablation_csv(rows));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "setting,L_Late,L_Attention,L_Res,L_PI,seeds,mean_recall@1,mean_recall@5,recall@1_per_seed\n";
  auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
  for (const auto& r : rows) {
    std::string per_seed;
    for (std::size_t i = 0; i < r.recall_at_1.size(); ++i) {
      if (i) per_seed += ';';
      per_seed += format_double(r.recall_at_1[i]);
    }
    const auto& u = r.variant.use;
    out += r.variant.label + "," + flag(u.late) + "," + flag(u.attention) + "," + flag(u.res) + "," + flag(u.pi) + "," +
           std::to_string(r.seeds.size()) + "," + format_double(r.mean_recall_at_1) + "," +
           format_double(r.mean_recall_at_5) + "," + per_seed + "\n";
  }
  return out;
}

std::vector<std::filesystem::path> export_attention(const FarNetModel& model, const data::Dataset& dataset,
                                                    const std::vector<std::size_t>& triplet_ids,
                                                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto examples = make_examples(dataset, triplet_ids);
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Tensor map = model.reference_attention(examples[i]);
    std::string text;
    for (std::size_t r = 0; r < map.rows(); ++r) {
      for (std::size_t c = 0; c < map.cols(); ++c) {
        if (c) text += ',';
        text += format_double(map.at(r, c));
      }
      text += '\n';
    }
    char name[48];
    std::snprintf(name, sizeof name, "attention_%06zu.csv", triplet_ids[i]);
    paths.push_back(out_dir / name);
    write_text(paths.back(), text);
  }
  return paths;
}

Tensor read_attention_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') throw DataError("malformed attention cell in " + path.string());
      values.push_back(v);
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw DataError("ragged attention matrix in " + path.string());
    ++rows;
  }
  if (rows == 0) throw DataError("empty attention matrix in " + path.string());
  return Tensor::matrix(rows, cols, std::move(values));
}

double foreground_attention_mass(const Tensor& map, const std::vector<bool>& foreground_regions) {
  if (map.rank() != 2 || map.rows() != foreground_regions.size()) {
    throw DimensionError("attention map " + shape_string(map.shape()) + " vs " +
                         std::to_string(foreground_regions.size()) + " regions");
  }
  double mass = 0.0;
  for (std::size_t t = 0; t < map.cols(); ++t) {
    double column = 0.0, fg = 0.0;
    for (std::size_t r = 0; r < map.rows(); ++r) {
      column += map.at(r, t);
      if (foreground_regions[r]) fg += map.at(r, t);
    }
    if (!(column > 0.0)) throw DegenerateVectorError("attention column " + std::to_string(t) + " has no mass");
    mass += fg / column;
  }
  return mass / static_cast<double>(map.cols());
}

}  // namespace farnet
