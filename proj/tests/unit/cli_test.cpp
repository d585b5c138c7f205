// Copyright 2026 The FusionPool Authors
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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "fusionpool.hpp"
#include "support/corpus.hpp"
#include "unit/test_util.hpp"

namespace fs = std::filesystem;
using namespace fusionpool;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const fs::path& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const auto cmd = std::string("cd '") + dir.string() + "' && '" + FP_CLI_PATH + "' " + args + " >'" +
                   out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = fptest::read_text(out.string());
  r.err = fptest::read_text(err.string());
  return r;
}

// Clips of solid-ish colour frames, one directory per clip, plus a manifest.
void write_dataset(const fs::path& root, const std::string& name, std::uint32_t task,
                   const std::vector<fptest::ClassRecipe>& classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ofstream manifest(root / (name + ".txt"));
  manifest << "!interval=2\n";
  for (const auto& cls : classes) {
    for (int clip = 0; clip < cls.count; ++clip) {
      const auto rel = name + "/" + cls.name + "_" + std::to_string(clip);
      fs::create_directories(root / rel);
      for (int f = 0; f < 4; ++f) {
        char file[32];
        std::snprintf(file, sizeof file, "frame%02d.png", f);
        write_png((root / rel / file).string(), fptest::jittered_frame(rng, cls.colour, 6, 4, 20));
      }
      manifest << rel << "\t" << cls.name << "\t" << task << "\n";
    }
  }
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fptest::temp_dir(std::string("cli-") +
                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    write_dataset(dir_, "ucf", 0, {{"normal", {120, 120, 120}, 4}, {"shoplifting", {200, 40, 40}, 4}}, 1);
    write_dataset(dir_, "rlvs", 1, {{"Normal", {120, 120, 120}, 4}, {"violence", {30, 60, 220}, 4}}, 2);
    write_dataset(dir_, "movies", 2, {{"normal", {120, 120, 120}, 3}, {"fighting", {40, 210, 60}, 3}}, 3);
    std::ofstream(dir_ / "run.ini") << "[pipeline]\njobs = 2\n\n[backbones]\nalpha = synthetic:7\n"
                                       "beta = synthetic:8\n\n[synthetic]\ninput_size = 16\nmap_count = 6\n"
                                       "map_height = 3\nmap_width = 3\n\n[head]\nepochs = 150\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult cli(const std::string& args) { return run_cli(dir_, args); }

  void extract_both() {
    ASSERT_EQ(cli("extract --config run.ini --manifest ucf.txt --out ucf.fpl").code, 0);
    ASSERT_EQ(cli("extract --config run.ini --manifest rlvs.txt --out rlvs.fpl").code, 0);
  }

  fs::path dir_;
};

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && ext != ".png" && e.path().filename() != "stdout.txt" &&
        e.path().filename() != "stderr.txt") {
      files[fs::relative(e.path(), dir).string()] = fptest::read_text(e.path().string());
    }
  }
  return files;
}

}  // namespace

TEST_F(Cli, IngestListsSampledFrames) {
  const auto r = cli("ingest --manifest ucf.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  // 8 clips of 4 frames at interval 2.
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n') >= 16, true) << r.out;
  EXPECT_NE(r.out.find("shoplifting"), std::string::npos);
}

TEST_F(Cli, ExtractWritesPoolAndProvenance) {
  const auto r = cli("extract --config run.ini --manifest ucf.txt --out ucf.fpl");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pool = load_pool((dir_ / "ucf.fpl").string());
  EXPECT_EQ(pool.size(), 16u);
  EXPECT_EQ(pool.dim(), 12u);
  EXPECT_EQ(pool.schema.at(0).backbone, "alpha");
  const auto prov = fptest::read_text((dir_ / "ucf.fpl.provenance.txt").string());
  EXPECT_NE(prov.find("command=extract"), std::string::npos);
  EXPECT_NE(prov.find("input.ucf.txt=crc32:"), std::string::npos);
}

TEST_F(Cli, FuseMergesIntoThreeClasses) {
  extract_both();
  const auto r = cli("fuse --pool ucf.fpl --pool rlvs.fpl --out merged.fpl");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pool = load_pool((dir_ / "merged.fpl").string());
  EXPECT_EQ(pool.labels.classes, (std::vector<std::string>{"normal", "shoplifting", "violence"}));
  EXPECT_EQ(pool.size(), 32u);
  EXPECT_EQ(pool.tasks.size(), 2u);
}

TEST_F(Cli, AddTaskFromManifest) {
  extract_both();
  ASSERT_EQ(cli("fuse --pool ucf.fpl --pool rlvs.fpl --out merged.fpl").code, 0);
  const auto r = cli("add-task --config run.ini --pool merged.fpl --manifest movies.txt --out three.fpl");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto before = load_pool((dir_ / "merged.fpl").string());
  const auto after = load_pool((dir_ / "three.fpl").string());
  EXPECT_EQ(after.tasks.size(), 3u);
  EXPECT_EQ(after.labels.size(), 4u);
  ASSERT_EQ(after.size(), before.size() + 12);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(after.records[i], before.records[i]);
  EXPECT_EQ(cli("add-task --config run.ini --pool three.fpl --manifest movies.txt --out again.fpl").code,
            10 + static_cast<int>(ErrorCode::kTaskReuse));
}

TEST_F(Cli, PerfectHeadReportsFullAccuracy) {
  extract_both();
  ASSERT_EQ(cli("fuse --pool ucf.fpl --pool rlvs.fpl --out merged.fpl").code, 0);
  ASSERT_EQ(cli("train --pool merged.fpl --kind knn --k 1 --out h.head").code, 0);
  const auto r = cli("eval --head h.head --pool merged.fpl");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("accuracy  100.00"), std::string::npos) << r.out;
}

TEST_F(Cli, PipelineIsReproducible) {
  const std::string steps[] = {
      "extract --config run.ini --seed 42 --manifest ucf.txt --out out/ucf.fpl",
      "extract --config run.ini --seed 42 --manifest rlvs.txt --out out/rlvs.fpl",
      "fuse --seed 42 --pool out/ucf.fpl --pool out/rlvs.fpl --out out/merged.fpl",
      "train --config run.ini --seed 42 --pool out/merged.fpl --kind softmax --out out/softmax.head",
      "train --config run.ini --seed 42 --pool out/merged.fpl --kind adaboost --out out/adaboost.head",
      "eval --seed 42 --head out/softmax.head --pool out/merged.fpl --out out/eval-softmax",
      "eval --seed 42 --head out/adaboost.head --pool out/merged.fpl --out out/eval-adaboost",
      "embed --seed 42 --pool out/merged.fpl --perplexity 5 --iterations 300 --out out/embed",
  };
  std::map<std::string, std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(dir_ / "out");
    fs::create_directories(dir_ / "out");
    for (const auto& s : steps) {
      const auto r = cli(s);
      ASSERT_EQ(r.code, 0) << s << "\n" << r.err;
    }
    auto files = snapshot(dir_ / "out");
    for (const auto& png : {"embed/embedding.png"}) {
      files[png] = fptest::read_text((dir_ / "out" / png).string());
    }
    if (pass == 0) {
      first = files;
      EXPECT_TRUE(first.count("eval-softmax/report.txt"));
      EXPECT_TRUE(first.count("eval-softmax/metrics.csv"));
      EXPECT_TRUE(first.count("embed/embedding.csv"));
    } else {
      EXPECT_EQ(files.size(), first.size());
      for (const auto& [name, bytes] : first) EXPECT_EQ(files[name], bytes) << name;
    }
  }
}

TEST_F(Cli, ExplainWritesHeatmaps) {
  ASSERT_EQ(cli("extract --config run.ini --manifest ucf.txt --out ucf.fpl").code, 0);
  ASSERT_EQ(cli("train --config run.ini --pool ucf.fpl --kind logreg --out lr.head").code, 0);
  auto r = cli("explain --config run.ini --head lr.head --manifest ucf.txt --limit 3 --out cams");
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "cams")) pngs += e.path().extension() == ".png";
  EXPECT_GT(pngs, 0u);
  EXPECT_TRUE(fs::exists(dir_ / "cams" / "index.csv"));
  ASSERT_EQ(cli("train --config run.ini --pool ucf.fpl --kind nb --out nb.head").code, 0);
  r = cli("explain --config run.ini --head nb.head --manifest ucf.txt --out cams2");
  EXPECT_EQ(r.code, 10 + static_cast<int>(ErrorCode::kUnsupportedHead)) << r.err;
}

TEST_F(Cli, ReportDescribesPoolAndHead) {
  ASSERT_EQ(cli("extract --config run.ini --manifest ucf.txt --out ucf.fpl").code, 0);
  ASSERT_EQ(cli("train --config run.ini --pool ucf.fpl --kind svm --out svm.head").code, 0);
  const auto r = cli("report --pool ucf.fpl --head svm.head");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("shoplifting"), std::string::npos);
  EXPECT_NE(r.out.find("svm"), std::string::npos);
}

TEST_F(Cli, DistinctExitCodes) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("train --bogus-flag").code, 2);
  EXPECT_EQ(cli("ingest --manifest missing.txt").code, 10 + static_cast<int>(ErrorCode::kIo));
  std::ofstream(dir_ / "dup.txt") << "ucf/normal_0\tnormal\t0\nucf/normal_0\tnormal\t0\n";
  EXPECT_EQ(cli("ingest --manifest dup.txt").code, 10 + static_cast<int>(ErrorCode::kDuplicate));

  ASSERT_EQ(cli("extract --config run.ini --manifest ucf.txt --out ucf.fpl").code, 0);
  auto bytes = fusionpool::detail::read_file((dir_ / "ucf.fpl").string());
  bytes[bytes.size() - 20] ^= 0x10;
  fusionpool::detail::write_file((dir_ / "bad.fpl").string(), bytes);
  EXPECT_EQ(cli("train --pool bad.fpl --kind knn --out x.head").code, 10 + static_cast<int>(ErrorCode::kChecksum));
  EXPECT_EQ(cli("train --pool ucf.fpl --kind forest --out x.head").code,
            10 + static_cast<int>(ErrorCode::kInvalidArgument));
  ASSERT_EQ(cli("extract --config run.ini --manifest rlvs.txt --out rlvs.fpl").code, 0);
  ASSERT_EQ(cli("train --pool ucf.fpl --kind knn --out ucf.head").code, 0);
  EXPECT_EQ(cli("eval --head ucf.head --pool rlvs.fpl").code, 10 + static_cast<int>(ErrorCode::kUnknownLabel));
  EXPECT_EQ(cli("embed --pool ucf.fpl --perplexity 50 --out e").code,
            10 + static_cast<int>(ErrorCode::kInfeasible));
}
