// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "farnet/errors.hpp"
#include "farnet/ops.hpp"
#include "farnet/train.hpp"

namespace farnet {
namespace {

namespace fs = std::filesystem;

constexpr double kUnitTol = 1e-9;
constexpr double kRecomposeTol = 1e-12;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("farnet_pipeline_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig tiny_config() {
  RunConfig c;
  c.seed = 9;
  c.n_triplets = 48;
  c.image_size = 16;
  c.patch_size = 8;
  c.embed_dim = 8;
  c.layers = 1;
  c.heads = 2;
  c.batch_size = 8;
  c.epochs = 2;
  return c;
}

struct Fixture : ::testing::Test {
  RunConfig config = tiny_config();
  data::Dataset ds = data::generate_dataset(config.seed, config.n_triplets, config.ratios(), config.image_size);
  FarNetModel model{config.model_config(ds.manifest.vocabulary.size()), config.seed};
  std::vector<Example> batch() const {
    auto ex = make_examples(ds, ds.manifest.train);
    ex.resize(config.batch_size);
    return ex;
  }
};

double norm(const Tensor& t) {
  double s = 0.0;
  for (double x : t.data()) s += x * x;
  return std::sqrt(s);
}

TEST(EffectiveQuerySource, FallsBackToATrainedHead) {
  const LossSwitches all{}, esam_only{true, true, false, false}, arm_only{false, false, true, true};
  const LossSwitches no_res{true, true, false, true}, no_late{false, true, true, true};
  EXPECT_EQ(effective_query_source(QuerySource::U, all), QuerySource::U);
  EXPECT_EQ(effective_query_source(QuerySource::U, esam_only), QuerySource::MlpFu);
  EXPECT_EQ(effective_query_source(QuerySource::U, no_res), QuerySource::MeanUUprime);
  EXPECT_EQ(effective_query_source(QuerySource::MlpFu, arm_only), QuerySource::U);
  EXPECT_EQ(effective_query_source(QuerySource::MlpFu, no_late), QuerySource::U);
  EXPECT_EQ(effective_query_source(QuerySource::MeanUUprime, esam_only), QuerySource::MlpFu);
  EXPECT_EQ(parse_query_source(to_string(QuerySource::MeanUUprime)), QuerySource::MeanUUprime);
  EXPECT_THROW(parse_query_source("v"), ConfigError);
}

TEST_F(Fixture, ForwardRecomposesAndNormalizes) {
  Rng noise(1);
  const auto ex = batch();
  const auto out = model.forward(ex, config.loss_settings(), &noise);
  EXPECT_NEAR(out.esam.item(), out.late.item() + out.attention.item(), kRecomposeTol);
  EXPECT_NEAR(out.arm.item(), out.res.item() + out.pi.item(), kRecomposeTol);
  EXPECT_NEAR(out.total.item(), out.esam.item() + out.arm.item(), kRecomposeTol);
  for (const Tensor* m : {&out.targets, &out.queries, &out.prompts, &out.projected}) {
    for (std::size_t i = 0; i < m->rows(); ++i) {
      if (m == &out.projected) continue;  // raw MLP output; cosine normalizes it
      EXPECT_NEAR(norm(row(*m, i)), 1.0, kUnitTol);
    }
  }
  for (const auto& p : out.attention_pairs) {
    for (const Tensor* map : {&p.reference, &p.target}) {
      for (std::size_t r = 0; r < map->rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < map->cols(); ++c) s += map->data()[r * map->cols() + c];
        EXPECT_NEAR(s, 1.0, kUnitTol);
      }
    }
  }
}

TEST_F(Fixture, DisabledTermsAreUndefined) {
  Rng noise(1);
  const auto ex = batch();
  for (const auto& v : ablation_variants()) {
    LossSettings s = config.loss_settings();
    s.use = v.use;
    const auto out = model.forward(ex, s, &noise);
    EXPECT_EQ(out.late.defined(), v.use.late) << v.label;
    EXPECT_EQ(out.attention.defined(), v.use.attention) << v.label;
    EXPECT_EQ(out.res.defined(), v.use.res) << v.label;
    EXPECT_EQ(out.pi.defined(), v.use.pi) << v.label;
    const double sum = BatchLosses::value(out.late) + BatchLosses::value(out.attention) +
                       BatchLosses::value(out.res) + BatchLosses::value(out.pi);
    EXPECT_NEAR(out.total.item(), sum, kRecomposeTol) << v.label;
  }
}

TEST_F(Fixture, ForwardWithoutNoiseSourceIsConfigError) {
  const auto ex = batch();
  EXPECT_THROW(model.forward(ex, config.loss_settings(), nullptr), ConfigError);
  EXPECT_THROW(model.forward(std::span(ex).first(1), config.loss_settings(), nullptr), DimensionError);
}

TEST_F(Fixture, QueryAndGalleryEmbeddingsAreUnitNorm) {
  const auto ex = batch();
  for (auto source : {QuerySource::U, QuerySource::MlpFu, QuerySource::MeanUUprime}) {
    EXPECT_NEAR(norm(model.query_embedding(ex[0], source, config.lambda1)), 1.0, kUnitTol);
  }
  EXPECT_NEAR(norm(model.gallery_embedding(ds.images[0])), 1.0, kUnitTol);
}

TEST_F(Fixture, ParameterNamesAreUniqueAndStable) {
  const auto params = model.parameters();
  std::set<std::string> names;
  for (const auto& [n, t] : params) EXPECT_TRUE(names.insert(n).second) << n;
  const FarNetModel again(config.model_config(ds.manifest.vocabulary.size()), config.seed);
  const auto params2 = again.parameters();
  ASSERT_EQ(params.size(), params2.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(params[i].first, params2[i].first);
    EXPECT_EQ(std::vector<double>(params[i].second.data().begin(), params[i].second.data().end()),
              std::vector<double>(params2[i].second.data().begin(), params2[i].second.data().end()));
  }
}

TEST(Compatibility, MismatchedDatasetIsConfigError) {
  RunConfig c = tiny_config();
  const auto ds = data::generate_dataset(1, 20, c.ratios(), 32);
  EXPECT_THROW(check_compatible(c, ds.manifest), ConfigError);
}

TEST(EpochRecord, JsonKeysAndRoundTrip) {
  const EpochRecord r{3, 0.1, 0.2, 0.3, 0.4, 1.0, 0.5};
  const auto j = nlohmann::json::parse(r.to_json());
  for (const char* key : {"epoch", "L_Late", "L_Attention", "L_Res", "L_PI", "L_Total", "val_recall@1"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(EpochRecord::from_json(r.to_json()), r);
  EXPECT_EQ(metrics_csv({r}).substr(0, metrics_csv({r}).find('\n')),
            "epoch,L_Late,L_Attention,L_Res,L_PI,L_Total,val_recall@1");
}

TEST(Train, IsByteDeterministicAcrossOutputDirectories) {
  const RunConfig c = tiny_config();
  const auto ds = data::generate_dataset(c.seed, c.n_triplets, c.ratios(), c.image_size);
  const fs::path a = scratch_dir("a"), b = scratch_dir("b");
  train(c, ds, a);
  train(c, ds, b);
  for (const char* f : {"metrics.jsonl", "metrics.csv", "model.ckpt"}) {
    const auto ta = read_text(a / f);
    EXPECT_FALSE(ta.empty()) << f;
    EXPECT_EQ(ta, read_text(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Train, LogHasOneRecordPerEpochIncludingUntrained) {
  RunConfig c = tiny_config();
  c.epochs = 3;
  const auto ds = data::generate_dataset(c.seed, c.n_triplets, c.ratios(), c.image_size);
  const fs::path dir = scratch_dir("log");
  const auto result = train(c, ds, dir);
  ASSERT_EQ(result.history.size(), 4u);
  std::istringstream lines(read_text(dir / "metrics.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(EpochRecord::from_json(line), result.history[n]);
    EXPECT_EQ(result.history[n].epoch, n);
    ++n;
  }
  EXPECT_EQ(n, 4u);
  const auto& e0 = result.history[0];
  EXPECT_NEAR(e0.total, e0.late + e0.attention + e0.res + e0.pi, 1e-9);
  fs::remove_all(dir);
}

TEST(Train, UntrainedTotalIsNearFourLogB) {
  // Default dimensions, B = 32: four near-uniform contrastive terms.
  const RunConfig c;
  const auto ds = data::generate_dataset(c.seed, 64, c.ratios(), c.image_size);
  const FarNetModel m(c.model_config(ds.manifest.vocabulary.size()), c.seed);
  auto ex = make_examples(ds, ds.manifest.train);
  ex.resize(c.batch_size);
  Rng noise(3);
  NoGradScope no_grad;
  const double total = m.forward(ex, c.loss_settings(), &noise).total.item();
  const double expected = 4.0 * std::log(32.0);
  EXPECT_NEAR(total, expected, 0.2 * expected);
}

TEST(Train, DifferentSeedsDiffer) {
  RunConfig c = tiny_config();
  const auto ds = data::generate_dataset(c.seed, c.n_triplets, c.ratios(), c.image_size);
  const auto a = train(c, ds, "");
  c.seed += 1;
  const auto b = train(c, ds, "");
  EXPECT_NE(a.checkpoint.parameters, b.checkpoint.parameters);
}

TEST(Ablation, VariantTableAndCsv) {
  const auto& v = ablation_variants();
  ASSERT_EQ(v.size(), 7u);
  EXPECT_EQ(v.front().label, "w/o L_Late");
  EXPECT_EQ(v.back().label, "FAR-Net");
  EXPECT_EQ(v.back().use, LossSwitches{});
  EXPECT_EQ(v[4].use, (LossSwitches{true, true, false, false}));
  EXPECT_EQ(v[5].use, (LossSwitches{false, false, true, true}));
  AblationRow row{v.back(), {0, 1}, {0.5, 0.75}, {1.0, 1.0}, 0.625, 1.0};
  const std::string csv = ablation_csv({row});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "setting,L_Late,L_Attention,L_Res,L_PI,seeds,mean_recall@1,mean_recall@5,recall@1_per_seed");
  EXPECT_NE(csv.find("FAR-Net"), std::string::npos);
}

TEST(Ablation, RunsEveryVariantPerSeed) {
  RunConfig c = tiny_config();
  c.epochs = 1;
  c.ablation_seeds = 2;
  const auto ds = data::generate_dataset(c.seed, c.n_triplets, c.ratios(), c.image_size);
  const fs::path dir = scratch_dir("ablation");
  const auto rows = run_ablation(c, ds, dir);
  ASSERT_EQ(rows.size(), 7u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{c.seed, c.seed + 1}));
    EXPECT_NEAR(r.mean_recall_at_1, (r.recall_at_1[0] + r.recall_at_1[1]) / 2.0, 1e-15);
  }
  EXPECT_TRUE(fs::exists(dir / "ablation.csv"));
  fs::remove_all(dir);
}

TEST_F(Fixture, AttentionExportRoundTrips) {
  const fs::path dir = scratch_dir("attention");
  const auto files = export_attention(model, ds, ds.manifest.val, dir);
  ASSERT_EQ(files.size(), ds.manifest.val.size());
  const auto ex = make_examples(ds, {ds.manifest.val[0]});
  const Tensor expected = model.reference_attention(ex[0]);
  const Tensor back = read_attention_csv(files[0]);
  ASSERT_EQ(back.shape(), expected.shape());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back.data()[i], expected.data()[i]);
  fs::remove_all(dir);
  EXPECT_THROW(read_attention_csv(dir / "missing.csv"), DataError);
}

TEST(ForegroundMass, HandExample) {
  // Two regions, two tokens; column 0 puts 3/4 of its mass on region 0.
  const Tensor map = Tensor::matrix(2, 2, {0.6, 0.5, 0.2, 0.5});
  EXPECT_NEAR(foreground_attention_mass(map, {true, false}), (0.75 + 0.5) / 2.0, 1e-15);
  EXPECT_NEAR(foreground_attention_mass(map, {true, true}), 1.0, 1e-15);
  EXPECT_THROW(foreground_attention_mass(map, {true}), DimensionError);
}

}  // namespace
}  // namespace farnet
