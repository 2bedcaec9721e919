// Copyright 2026 The Endpointer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the command-line binary end to end on a tiny configuration.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "endpointer/eval.hpp"

#ifndef ENDPOINTER_CLI
#error "ENDPOINTER_CLI must point at the command-line binary"
#endif

namespace ep {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "endpointer_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "cfg.json") << R"({
      "corpus": {"n_dialogues": 18, "turns_per_dialogue": [2, 4], "turn_duration_ms": [800, 2500]},
      "model": {"proj_dim": 8, "hidden_dim": 8},
      "train": {"epochs": 2, "batch_size": 4},
      "duplex": {"threshold": 0.5}
    })";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  // Runs the CLI with `args`; returns the exit code and captures stderr.
  static int run(const std::string& args, std::string* err = nullptr) {
    const auto err_path = dir_ / "stderr.txt";
    const std::string cmd = std::string("cd '") + dir_.string() + "' && '" + ENDPOINTER_CLI + "' " + args +
                            " 2> '" + err_path.string() + "'";
    const int rc = std::system(cmd.c_str());
    if (err) *err = slurp(err_path);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static inline fs::path dir_;
};

TEST_F(Cli, BadUsageIsOneMachineParsableLine) {
  std::string err;
  EXPECT_NE(run("sweep --no-such-flag", &err), 0);
  EXPECT_EQ(err.rfind("error kind=usage message=", 0), 0u) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
  EXPECT_NE(run("frobnicate", &err), 0);
  EXPECT_EQ(err.rfind("error kind=", 0), 0u) << err;
  EXPECT_NE(run("eval --ckpt missing.epck", &err), 0);
  EXPECT_EQ(err.rfind("error kind=config", 0), 0u) << err;
  EXPECT_NE(run("gen-corpus --config missing.json", &err), 0);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, SeedPropagatesToEveryConsumer) {
  ASSERT_EQ(run("gen-corpus --config cfg.json --seed 5 --out a.json"), 0);
  ASSERT_EQ(run("gen-corpus --config cfg.json --seed 5 --out b.json"), 0);
  ASSERT_EQ(run("gen-corpus --config cfg.json --seed 6 --out c.json"), 0);
  EXPECT_EQ(slurp(dir_ / "a.json"), slurp(dir_ / "b.json"));
  EXPECT_NE(slurp(dir_ / "a.json"), slurp(dir_ / "c.json"));

  for (const char* d : {"fa", "fb"}) {
    ASSERT_EQ(run(std::string("extract-features --config cfg.json --seed 5 --out ") + d), 0);
  }
  EXPECT_EQ(slurp(dir_ / "fa/train/d00000.epf1"), slurp(dir_ / "fb/train/d00000.epf1"));

  for (const char* m : {"ma.epck", "mb.epck"}) {
    ASSERT_EQ(run(std::string("train --config cfg.json --features fa --seed 5 --out ") + m), 0);
  }
  EXPECT_EQ(slurp(dir_ / "ma.epck"), slurp(dir_ / "mb.epck"));
  ASSERT_EQ(run("train --config cfg.json --features fa --seed 6 --out mc.epck"), 0);
  EXPECT_NE(slurp(dir_ / "ma.epck"), slurp(dir_ / "mc.epck"));

  for (const char* o : {"da.json", "db.json"}) {
    ASSERT_EQ(run(std::string("simulate-duplex --config cfg.json --seed 5 --n 12 --out-json ") + o), 0);
  }
  EXPECT_EQ(slurp(dir_ / "da.json"), slurp(dir_ / "db.json"));
}

TEST_F(Cli, FullPipeline) {
  ASSERT_EQ(run("gen-corpus --config cfg.json --out corpus.json --stats stats.json"), 0);
  ASSERT_EQ(run("extract-features --config cfg.json --corpus corpus.json --mode two --out f2"), 0);
  ASSERT_EQ(run("train --config cfg.json --features f2 --arch two --tau 2 --out two.epck --log log.jsonl"), 0);
  ASSERT_EQ(run("sweep --ckpt two.epck --features f2 --out sweep.csv --curve curve.csv "
                "--operating-points ops.json"),
            0);
  const auto csv = slurp(dir_ / "sweep.csv");
  EXPECT_EQ(csv.rfind(std::string(kMetricsCsvHeader) + "\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);  // header + 0.70..0.99
  ASSERT_EQ(run("eval --ckpt two.epck --features f2 --threshold 0.8 --out eval.csv --turns turns.csv"), 0);
  EXPECT_EQ(slurp(dir_ / "eval.csv").rfind(kMetricsCsvHeader, 0), 0u);
  ASSERT_EQ(run("error-bins --ckpt two.epck --features f2 --out bins.csv"), 0);
  EXPECT_EQ(slurp(dir_ / "bins.csv").rfind("bin,lo_ms,hi_ms,count\n", 0), 0u);
  ASSERT_EQ(run("simulate-duplex --config cfg.json --mode endpointer --ckpt two.epck --n 10 "
                "--out-json dup.json --out-csv dup.csv"),
            0);
  EXPECT_NE(slurp(dir_ / "dup.json").find("\"mode\": \"endpointer\""), std::string::npos);

  ASSERT_EQ(run("extract-features --config cfg.json --corpus corpus.json --out f1"), 0);
  ASSERT_EQ(run("train-rvq --features f1 --nq 2 --k 8 --iters 5 --out codec.json"), 0);
  ASSERT_EQ(run("entropy --codec codec.json --features f1 --out ent.json --plot-csv ent.csv"), 0);
  EXPECT_NE(slurp(dir_ / "ent.json").find("mean_entropy_silence"), std::string::npos);
  ASSERT_EQ(run("extract-features --config cfg.json --corpus corpus.json --codec codec.json --out fq"), 0);

  std::string err;
  EXPECT_NE(run("train --config cfg.json --features f2 --arch single --out bad.epck", &err), 0);
  EXPECT_EQ(err.rfind("error kind=config", 0), 0u) << err;
}

}  // namespace
}  // namespace ep
