/* Copyright 2026 The BCDE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bcde/commands.hpp"
#include "bcde/config.hpp"
#include "json.hpp"
#include "synthetic.hpp"

namespace bcde {
namespace {

namespace fs = std::filesystem;

TEST(ConfigTest, ParsesKeysCommentsAndDefaults) {
  const RunConfig c = parse_config(
      "# desk run\n"
      "task = quadrant2\n"
      "n_l = 1000   # labeled pairs\n"
      "hidden = 128,128\n"
      "mode = hybrid-factored\n"
      "seeds = 0,1\n"
      "\n",
      std::string("/data"));
  EXPECT_EQ(c.task, "quadrant2");
  EXPECT_EQ(c.n_l, 1000u);
  EXPECT_EQ(c.hidden, (std::vector<std::size_t>{128, 128}));
  EXPECT_EQ(c.mode, TrainMode::hybrid_factored);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(c.data_dir, "/data");
  EXPECT_DOUBLE_EQ(c.alpha, 0.5);
  EXPECT_DOUBLE_EQ(c.lambda, 1e-2);
  EXPECT_EQ(c.batch, 64u);
  EXPECT_EQ(c.patience, 20u);
  EXPECT_EQ(c.max_epochs, 500u);
  EXPECT_DOUBLE_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.model_config(3, 4, 1).inference, InferenceMode::factored);
}

TEST(ConfigTest, RejectsUnknownKeyByName) {
  try {
    parse_config("lamda = 0.1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown config key 'lamda'"), std::string::npos);
  }
}

TEST(ConfigTest, RejectsDuplicatesEmptyAndMalformed) {
  EXPECT_THROW(parse_config("n_l = 5\nn_l = 6\n"), ConfigError);
  EXPECT_THROW(parse_config("n_l =\n"), ConfigError);
  EXPECT_THROW(parse_config("n_l 5\n"), ConfigError);
  EXPECT_THROW(parse_config("n_l = five\n"), ConfigError);
  EXPECT_THROW(parse_config("alpha = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("mode = joint\n"), ConfigError);
  EXPECT_THROW(parse_config("task = quadrant9\n"), ConfigError);
}

TEST(ConfigTest, DumpRoundTrips) {
  RunConfig c = parse_config("task = shift-invariant\nlambda = 0.123456789012345\nn_u = 77\nhidden = none\n");
  c.seeds = {4, 9};
  c.tie_init = false;
  EXPECT_EQ(parse_config(dump_config(c)), c);
  const RunConfig d = parse_config("");
  EXPECT_EQ(parse_config(dump_config(d)), d);
}

TEST(ConfigTest, ShiftTasksDefaultToLargerLambda) {
  EXPECT_DOUBLE_EQ(parse_config("task = shift-sensitive\n").lambda, 0.1);
  EXPECT_DOUBLE_EQ(parse_config("task = shift-sensitive\nlambda = 0.5\n").lambda, 0.5);
  EXPECT_DOUBLE_EQ(parse_config("task = quadrant1\n").lambda, 1e-2);
}

TEST(ConfigTest, ArtifactPaths) {
  const RunConfig c = parse_config("out_dir = /tmp/r\n");
  EXPECT_EQ(c.cache_path(), "/tmp/r/split.bin");
  EXPECT_EQ(c.checkpoint_path(2), "/tmp/r/seed2/checkpoint.bin");
  EXPECT_EQ(c.log_path(2), "/tmp/r/seed2/log.csv");
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = synthetic::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    synthetic::write_mnist_like(dir_ + "/mnist", 120, 30, 8, 8);
  }

  std::string write_config(const std::string& extra = "") {
    std::ofstream out(dir_ + "/run.cfg");
    out << "task = quadrant2\n"
           "n_l = 40\nn_u = 40\nval_size = 20\ntest_size = 20\n"
           "latent_dim = 2\nhidden = 8\nbatch = 16\nmax_epochs = 3\npretrain_max_epochs = 2\n"
           "iw_eval = 5\nseeds = 0,1\nexport_count = 3\n"
        << "data_dir = " << dir_ << "/mnist\n"
        << "out_dir = " << dir_ << "/out\n"
        << extra;
    return dir_ + "/run.cfg";
  }

  int run(const std::string& cmd, CommandOptions o) {
    out_.str("");
    err_.str("");
    o.out = &out_;
    o.err = &err_;
    return run_command(cmd, o);
  }

  std::string dir_;
  std::ostringstream out_, err_;
};

TEST_F(PipelineTest, PrepareTrainEvalExport) {
  CommandOptions o;
  o.config_path = write_config();
  ASSERT_EQ(run("prepare", o), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ + "/out/split.bin"));
  EXPECT_TRUE(fs::exists(dir_ + "/out/split.bin.config.txt"));

  ASSERT_EQ(run("train", o), kExitOk) << err_.str();
  for (const char* seed : {"seed0", "seed1"}) {
    EXPECT_TRUE(fs::exists(dir_ + "/out/" + seed + "/checkpoint.bin"));
    EXPECT_TRUE(fs::exists(dir_ + "/out/" + seed + "/checkpoint.bin.last"));
    EXPECT_TRUE(fs::exists(dir_ + "/out/" + seed + "/config.txt"));
    std::ifstream log(dir_ + "/out/" + std::string(seed) + "/log.csv");
    std::string header;
    std::getline(log, header);
    EXPECT_EQ(header, "epoch,mode,train_objective,val_bound_iw1,seconds");
  }

  ASSERT_EQ(run("eval", o), kExitOk) << err_.str();
  const auto j = nlohmann::ordered_json::parse(out_.str());
  const std::vector<std::string> keys = {"test_bound_iw5", "stderr", "epochs", "seed"};
  std::vector<std::string> got;
  for (const auto& [k, v] : j.items()) got.push_back(k);
  EXPECT_EQ(got, keys);
  EXPECT_GT(j["test_bound_iw5"].get<double>(), 0.0);
  EXPECT_EQ(j["epochs"].get<int>(), 3);
  EXPECT_TRUE(fs::exists(dir_ + "/out/metrics.json"));
  EXPECT_TRUE(fs::exists(dir_ + "/out/seed0/checkpoint.bin.metrics.json"));

  o.checkpoint = dir_ + "/out/seed1/checkpoint.bin";
  ASSERT_EQ(run("eval", o), kExitOk) << err_.str();
  EXPECT_EQ(nlohmann::ordered_json::parse(out_.str())["seed"].get<int>(), 1);

  o.what = "samples";
  ASSERT_EQ(run("export", o), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ + "/out/seed1/checkpoint_samples.pgm"));
  o.what = "latents";
  ASSERT_EQ(run("export", o), kExitOk) << err_.str();
  std::ifstream csv(dir_ + "/out/seed1/checkpoint_latents.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "index,label,shift,mu_1,mu_2");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 20u);
}

TEST_F(PipelineTest, PrepareIsDeterministic) {
  CommandOptions o;
  o.config_path = write_config();
  ASSERT_EQ(run("prepare", o), kExitOk);
  const fs::path first = dir_ + "/first.bin";
  fs::copy_file(dir_ + "/out/split.bin", first);
  ASSERT_EQ(run("prepare", o), kExitOk);
  std::ifstream a(first, std::ios::binary), b(dir_ + "/out/split.bin", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), {}), bb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(ba, bb);
}

TEST_F(PipelineTest, ResumeContinuesFromLastEpoch) {
  CommandOptions o;
  o.config_path = write_config("");
  ASSERT_EQ(run("prepare", o), kExitOk);
  ASSERT_EQ(run("train", o), kExitOk);
  // Extend the budget and resume.
  std::string text;
  {
    std::ifstream in(o.config_path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  text.replace(text.find("max_epochs = 3"), 14, "max_epochs = 5");
  std::ofstream(o.config_path) << text;
  o.resume = true;
  ASSERT_EQ(run("train", o), kExitOk) << err_.str();
  std::ifstream log(dir_ + "/out/seed0/log.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(log, line);
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, 5u);
  EXPECT_EQ(err_.str().find("seed 0 1,"), std::string::npos);  // epoch 1 not rerun
  EXPECT_NE(err_.str().find("seed 0 4,"), std::string::npos);
}

TEST_F(PipelineTest, ExitCodes) {
  CommandOptions o;
  o.config_path = dir_ + "/absent.cfg";
  EXPECT_EQ(run("prepare", o), kExitUsage);

  {
    std::ofstream(dir_ + "/bad.cfg") << "lamda = 1\n";
  }
  o.config_path = dir_ + "/bad.cfg";
  EXPECT_EQ(run("train", o), kExitUsage);
  EXPECT_NE(err_.str().find("lamda"), std::string::npos);

  o.config_path = write_config();
  EXPECT_EQ(run("train", o), kExitData);  // no cache yet

  {
    std::ofstream(dir_ + "/nodata.cfg") << "data_dir = " << dir_ << "/nowhere\nout_dir = " << dir_ << "/o2\n";
  }
  o.config_path = dir_ + "/nodata.cfg";
  EXPECT_EQ(run("prepare", o), kExitData);

  o.config_path = write_config();
  ASSERT_EQ(run("prepare", o), kExitOk);
  o.config_path = write_config("data_seed = 5\n");
  EXPECT_EQ(run("train", o), kExitUsage);  // cache prepared for another seed

  o.config_path = write_config();
  o.what = "movie";
  EXPECT_EQ(run("export", o), kExitUsage);
  EXPECT_EQ(run("frobnicate", o), kExitUsage);
}

TEST_F(PipelineTest, CorruptCheckpointIsDataError) {
  CommandOptions o;
  o.config_path = write_config();
  ASSERT_EQ(run("prepare", o), kExitOk);
  std::ofstream(dir_ + "/junk.bin") << "BCDE0garbage";
  o.checkpoint = dir_ + "/junk.bin";
  EXPECT_EQ(run("eval", o), kExitData);
  EXPECT_NE(err_.str().find("version mismatch"), std::string::npos);
}

TEST(CliBinaryTest, UsageErrorsExitWithOne) {
  const std::string bin = BCDE_CLI_PATH;
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " > /dev/null 2>&1").c_str())), 1);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " train > /dev/null 2>&1").c_str())), 1);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " bogus --config x > /dev/null 2>&1").c_str())), 1);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " --help > /dev/null 2>&1").c_str())), 0);
}

TEST(CliBinaryTest, DiagnosticsPass) {
  const std::string dir = synthetic::temp_dir("diag");
  std::ofstream(dir + "/d.cfg") << "out_dir = " << dir << "\n";
  const std::string bin = BCDE_CLI_PATH;
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " diag --config " + dir + "/d.cfg > " + dir + "/out.txt 2>&1").c_str())),
            0);
  std::ifstream in(dir + "/out.txt");
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text.find("FAIL"), std::string::npos) << text;
  EXPECT_NE(text.find("PASS"), std::string::npos);
}

}  // namespace
}  // namespace bcde
