// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#ifndef FARNET_CLI_PATH
#error "FARNET_CLI_PATH must point at the farnet executable"
#endif

namespace {

namespace fs = std::filesystem;

const fs::path kRoot = fs::temp_directory_path() / "farnet_cli_test";

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::string& args) {
  const fs::path out = kRoot / "stdout.txt", err = kRoot / "stderr.txt";
  const std::string cmd = std::string(FARNET_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(out), read_text(err)};
}

void expect_single_error_line(const Result& r, const std::string& kind) {
  EXPECT_EQ(r.err.rfind("error[" + kind + "]: ", 0), 0u) << r.err;
  ASSERT_FALSE(r.err.empty());
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1) << r.err;
}

const char* kTinyConfig =
    "n_triplets = 48\nimage_size = 16\npatch_size = 8\nembed_dim = 8\nlayers = 1\nheads = 2\n"
    "batch_size = 8\nepochs = 2\nseed = 4\n";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    write_text(kRoot / "tiny.cfg", std::string(kTinyConfig) + "dataset = " + (kRoot / "data").string() + "\n");
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }
  static std::string cfg() { return "--config " + (kRoot / "tiny.cfg").string(); }
  static void ensure_data() {
    if (!fs::exists(kRoot / "data" / "manifest.json")) ASSERT_EQ(run("generate-data " + cfg()).code, 0);
  }
  static void ensure_model() {
    ensure_data();
    if (!fs::exists(kRoot / "run" / "model.ckpt")) {
      ASSERT_EQ(run("train --quiet " + cfg() + " --out " + (kRoot / "run").string()).code, 0);
    }
  }
};

TEST_F(Cli, MissingSubcommandIsConfigError) {
  const auto r = run("");
  EXPECT_EQ(r.code, 2);
  expect_single_error_line(r, "config");
}

TEST_F(Cli, UnknownConfigKeyIsConfigError) {
  write_text(kRoot / "bad.cfg", "seed = 1\nbogus_key = 3\n");
  const auto r = run("train --config " + (kRoot / "bad.cfg").string());
  EXPECT_EQ(r.code, 2);
  expect_single_error_line(r, "config");
  EXPECT_NE(r.err.find("bogus_key"), std::string::npos);
}

TEST_F(Cli, MissingConfigFileIsConfigError) {
  const auto r = run("generate-data --config " + (kRoot / "nope.cfg").string());
  EXPECT_EQ(r.code, 2);
  expect_single_error_line(r, "config");
}

TEST_F(Cli, InvalidRatiosLeaveNoOutput) {
  write_text(kRoot / "ratios.cfg", "train_ratio = 0.9\nval_ratio = 0.2\ntest_ratio = 0.1\n");
  const fs::path out = kRoot / "ratio_data";
  const auto r = run("generate-data --config " + (kRoot / "ratios.cfg").string() + " --out " + out.string());
  EXPECT_EQ(r.code, 2);
  expect_single_error_line(r, "config");
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(Cli, GenerateDataIsByteDeterministic) {
  const fs::path a = kRoot / "gen_a", b = kRoot / "gen_b", c = kRoot / "gen_c";
  ASSERT_EQ(run("generate-data " + cfg() + " --out " + a.string()).code, 0);
  ASSERT_EQ(run("generate-data " + cfg() + " --out " + b.string()).code, 0);
  ASSERT_EQ(run("generate-data " + cfg() + " --seed 99 --out " + c.string()).code, 0);
  EXPECT_EQ(read_text(a / "manifest.json"), read_text(b / "manifest.json"));
  EXPECT_NE(read_text(a / "manifest.json"), read_text(c / "manifest.json"));
  std::size_t images = 0;
  for (const auto& e : fs::directory_iterator(a / "images")) {
    EXPECT_EQ(read_text(e.path()), read_text(b / "images" / e.path().filename()));
    ++images;
  }
  EXPECT_GT(images, 0u);
  const auto manifest = nlohmann::json::parse(read_text(a / "manifest.json"));
  EXPECT_EQ(manifest.at("format_version"), 1);
}

TEST_F(Cli, TrainOnMissingDatasetIsDataError) {
  write_text(kRoot / "nodata.cfg", std::string(kTinyConfig) + "dataset = " + (kRoot / "absent").string() + "\n");
  const auto r = run("train --quiet --config " + (kRoot / "nodata.cfg").string() + " --out " +
                     (kRoot / "unused").string());
  EXPECT_EQ(r.code, 3);
  expect_single_error_line(r, "data");
}

TEST_F(Cli, CorruptImageIsDataError) {
  const fs::path dir = kRoot / "corrupt";
  ASSERT_EQ(run("generate-data " + cfg() + " --out " + dir.string()).code, 0);
  const fs::path img = *fs::directory_iterator(dir / "images");
  std::string bytes = read_text(img);
  bytes.back() = static_cast<char>(bytes.back() ^ 0x5a);
  write_text(img, bytes);
  write_text(kRoot / "corrupt.cfg", std::string(kTinyConfig) + "dataset = " + dir.string() + "\n");
  const auto r = run("train --quiet --config " + (kRoot / "corrupt.cfg").string() + " --out " +
                     (kRoot / "unused").string());
  EXPECT_EQ(r.code, 3);
  expect_single_error_line(r, "data");
}

TEST_F(Cli, BadCheckpointIsCheckpointError) {
  ensure_data();
  write_text(kRoot / "junk.ckpt", "FARNjunk");
  for (const fs::path& p : {kRoot / "junk.ckpt", kRoot / "missing.ckpt"}) {
    const auto r = run("eval " + cfg() + " --checkpoint " + p.string() + " --out " + (kRoot / "ev").string());
    EXPECT_EQ(r.code, 4) << p;
    expect_single_error_line(r, "checkpoint");
  }
}

TEST_F(Cli, TrainIsByteDeterministic) {
  ensure_model();
  const fs::path again = kRoot / "run_again";
  ASSERT_EQ(run("train --quiet " + cfg() + " --out " + again.string()).code, 0);
  for (const char* f : {"metrics.jsonl", "metrics.csv", "model.ckpt"}) {
    EXPECT_EQ(read_text(kRoot / "run" / f), read_text(again / f)) << f;
  }
}

TEST_F(Cli, SeedFlagOverridesConfig) {
  ensure_model();
  const fs::path other = kRoot / "run_seed";
  ASSERT_EQ(run("train --quiet " + cfg() + " --seed 5 --out " + other.string()).code, 0);
  EXPECT_NE(read_text(kRoot / "run" / "model.ckpt"), read_text(other / "model.ckpt"));
}

TEST_F(Cli, EvalWritesReport) {
  ensure_model();
  const fs::path out = kRoot / "eval";
  const auto r = run("eval --checkpoint " + (kRoot / "run" / "model.ckpt").string() + " --dataset " +
                     (kRoot / "data").string() + " --split val --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(read_text(out / "report_val.json"));
  for (const char* key : {"recall@1", "recall@5", "recall@10", "recall@50", "subset_recall@1", "subset_recall@2",
                          "subset_recall@3", "avg"}) {
    EXPECT_TRUE(report.contains(key)) << key;
  }
  const auto bad = run("eval --checkpoint " + (kRoot / "run" / "model.ckpt").string() + " --dataset " +
                       (kRoot / "data").string() + " --split holdout");
  EXPECT_NE(bad.code, 0);
  ASSERT_FALSE(bad.err.empty());
  EXPECT_EQ(bad.err.find('\n'), bad.err.size() - 1);
}

TEST_F(Cli, ExportAttentionWritesOneCsvPerQuery) {
  ensure_model();
  const fs::path out = kRoot / "attention";
  const auto r = run("export-attention --checkpoint " + (kRoot / "run" / "model.ckpt").string() + " --dataset " +
                     (kRoot / "data").string() + " --split val --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = nlohmann::json::parse(read_text(kRoot / "data" / "manifest.json"));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(out)) files += e.path().extension() == ".csv";
  EXPECT_EQ(files, manifest.at("splits").at("val").size());
}

TEST_F(Cli, AblateWritesTable) {
  ensure_data();
  write_text(kRoot / "ablate.cfg", std::string(kTinyConfig) + "epochs = 1\nablation_seeds = 1\ndataset = " +
                                       (kRoot / "data").string() + "\n");
  const fs::path out = kRoot / "ablate";
  const auto r = run("ablate --quiet --config " + (kRoot / "ablate.cfg").string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_text(out / "ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

}  // namespace
