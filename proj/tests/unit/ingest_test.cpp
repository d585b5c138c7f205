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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fusionpool/image.hpp"
#include "fusionpool/ingest.hpp"
#include "support/corpus.hpp"
#include "unit/test_util.hpp"

namespace fs = std::filesystem;
using namespace fusionpool;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

BackboneSpec spec_with(int input, Normalization n) {
  auto s = fptest::synthetic_spec("b", 1, input);
  s.normalization = n;
  return s;
}

}  // namespace

TEST(SampleFrames, FixedInterval) {
  EXPECT_EQ(sample_frames(25, 10), (std::vector<std::int64_t>{0, 10, 20}));
  EXPECT_EQ(sample_frames(60, 10).size(), 6u);
  EXPECT_TRUE(sample_frames(0, 10).empty());
  EXPECT_EQ(sample_frames(3, 5), (std::vector<std::int64_t>{0}));
}

TEST(SampleFrames, IntervalOneTakesEveryFrame) {
  const auto idx = sample_frames(7, 1);
  ASSERT_EQ(idx.size(), 7u);
  for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], static_cast<std::int64_t>(i));
}

TEST(SampleFrames, RejectsBadArguments) {
  EXPECT_FP_ERROR(sample_frames(10, 0), ErrorCode::kInvalidArgument);
  EXPECT_FP_ERROR(sample_frames(-1, 1), ErrorCode::kInvalidArgument);
}

TEST(Manifest, ParsesEntriesAndDirectives) {
  const auto m = parse_manifest(
      "# comment\n!interval=5\n!exclude=a.png@3\n!exclude=b\na.png\tnormal\t2\nb\tFight\t2\n", "ds");
  EXPECT_EQ(m.dataset_name, "ds");
  EXPECT_EQ(m.task_id, 2u);
  EXPECT_EQ(m.sampling_interval, 5);
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[1].class_name, "Fight");
  EXPECT_TRUE(m.is_excluded("a.png", 3));
  EXPECT_FALSE(m.is_excluded("a.png", 4));
  EXPECT_TRUE(m.is_excluded("b", 17));
}

TEST(Manifest, RoundTripsThroughFile) {
  const auto dir = fptest::temp_dir("manifest");
  DatasetManifest m;
  m.dataset_name = "clips";
  m.task_id = 4;
  m.sampling_interval = 3;
  m.entries = {{"x/one", "normal"}, {"x/two", "shoplifting"}};
  m.excluded.insert({"x/two", 6});
  save_manifest(m, (dir / "clips.txt").string());
  const auto back = load_manifest((dir / "clips.txt").string());
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.base_dir, dir.string());
  fs::remove_all(dir);
}

TEST(Manifest, EmptyEntriesAreValid) {
  const auto m = parse_manifest("# nothing here\n", "empty");
  EXPECT_TRUE(m.entries.empty());
}

TEST(Manifest, DuplicatePathNamesThePath) {
  try {
    parse_manifest("clip7\tnormal\t0\nclip7\tviolence\t0\n", "ds");
    FAIL() << "duplicate accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicate);
    EXPECT_NE(std::string(e.what()).find("clip7"), std::string::npos);
  }
}

TEST(Manifest, MalformedLines) {
  EXPECT_FP_ERROR(parse_manifest("a\tb\n", "ds"), ErrorCode::kFormat);
  EXPECT_FP_ERROR(parse_manifest("a\tb\tx\n", "ds"), ErrorCode::kFormat);
  EXPECT_FP_ERROR(parse_manifest("a\tb\t0\nc\td\t1\n", "ds"), ErrorCode::kFormat);
  EXPECT_FP_ERROR(parse_manifest("!interval=0\n", "ds"), ErrorCode::kFormat);
  EXPECT_FP_ERROR(parse_manifest("!bogus=1\n", "ds"), ErrorCode::kFormat);
  EXPECT_FP_ERROR(load_manifest("/nonexistent/manifest.txt"), ErrorCode::kIo);
}

TEST(SampleId, StableAndDistinct) {
  const auto a = make_sample_id("ucf", "clip/1", 0);
  EXPECT_EQ(a, make_sample_id("ucf", "clip/1", 0));
  EXPECT_NE(a, make_sample_id("ucf", "clip/1", 10));
  EXPECT_NE(a, make_sample_id("rlvs", "clip/1", 0));
  EXPECT_NE(make_sample_id("ab", "c", 0), make_sample_id("a", "bc", 0));
}

TEST(Preprocess, OutputShapeFollowsSpec) {
  RgbImage img(640, 360, 3, 10);
  const auto t = preprocess_frame(img, spec_with(224, Normalization::kScalePm1));
  EXPECT_EQ(t.height, 224);
  EXPECT_EQ(t.width, 224);
  EXPECT_EQ(t.channels, 3);
  EXPECT_EQ(t.values.size(), 224u * 224u * 3u);
}

TEST(Preprocess, ConstantImageStaysConstant) {
  RgbImage img(9, 5, 3, 128);
  const auto t = preprocess_frame(img, spec_with(6, Normalization::kScalePm1));
  for (float v : t.values) EXPECT_FLOAT_EQ(v, static_cast<float>(128.0 / 127.5 - 1.0));
  RgbImage black(3, 3, 3, 0), white(3, 3, 3, 255);
  EXPECT_FLOAT_EQ(preprocess_frame(black, spec_with(2, Normalization::kScalePm1)).values[0], -1.0f);
  EXPECT_FLOAT_EQ(preprocess_frame(white, spec_with(2, Normalization::kScalePm1)).values[0], 1.0f);
}

TEST(Preprocess, MatchesReferenceResize) {
  const auto img = read_png(fptest::fixture("frame_7x5.png"));
  ASSERT_EQ(img.width, 7);
  ASSERT_EQ(img.height, 5);
  const std::pair<Normalization, const char*> cases[] = {
      {Normalization::kScalePm1, "frame_7x5_pm1.txt"},
      {Normalization::kImagenetStandard, "frame_7x5_imagenet.txt"}};
  for (const auto& [norm, file] : cases) {
    const auto want = fptest::read_numbers(fptest::fixture(file));
    const auto got = preprocess_frame(img, spec_with(4, norm));
    ASSERT_EQ(got.values.size(), want.size()) << file;
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_NEAR(got.values[i], want[i], 1e-5) << file << " element " << i;
    }
  }
}

TEST(Preprocess, GreyAndAlphaInputs) {
  RgbImage grey(4, 4, 1, 51);
  const auto g = preprocess_frame(grey, spec_with(4, Normalization::kScalePm1));
  for (float v : g.values) EXPECT_FLOAT_EQ(v, static_cast<float>(51 / 127.5 - 1.0));
  RgbImage rgba(2, 2, 4, 255);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) rgba.at(x, y, 3) = 0;
  }
  const auto a = preprocess_frame(rgba, spec_with(2, Normalization::kScalePm1));
  for (float v : a.values) EXPECT_FLOAT_EQ(v, 1.0f);
}

TEST(Preprocess, DeterministicAndSourceTagged) {
  std::mt19937_64 rng(3);
  const auto img = fptest::jittered_frame(rng, {90, 140, 200}, 5, 20, 13);
  const auto spec = spec_with(8, Normalization::kImagenetStandard);
  const auto a = preprocess_frame(img, spec, 99);
  const auto b = preprocess_frame(img, spec, 99);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.source_id, 99u);
}

TEST(Preprocess, RejectsEmptyImage) {
  RgbImage img;
  EXPECT_FP_ERROR(preprocess_frame(img, spec_with(4, Normalization::kScalePm1)),
                  ErrorCode::kInvalidArgument);
}

TEST(Png, RoundTrip) {
  const auto dir = fptest::temp_dir("png");
  std::mt19937_64 rng(5);
  const auto img = fptest::jittered_frame(rng, {10, 200, 90}, 10, 30, 6);
  write_png((dir / "x.png").string(), img);
  const auto back = read_png((dir / "x.png").string());
  EXPECT_EQ(back.width, img.width);
  EXPECT_EQ(back.height, img.height);
  EXPECT_EQ(back.pixels, img.pixels);
  write_text(dir / "bad.png", "not a png");
  EXPECT_FP_ERROR(read_png((dir / "bad.png").string()), ErrorCode::kFormat);
  EXPECT_FP_ERROR(read_png((dir / "missing.png").string()), ErrorCode::kIo);
  fs::remove_all(dir);
}

TEST(PlanFrames, SamplesDirectoriesAndHonoursExclusions) {
  const auto dir = fptest::temp_dir("plan");
  fs::create_directories(dir / "clipA");
  RgbImage img(4, 4, 3, 7);
  for (int i = 0; i < 12; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "f%03d.png", i);
    write_png((dir / "clipA" / name).string(), img);
  }
  write_png((dir / "still.png").string(), img);
  write_text(dir / "m.txt", "!interval=5\n!exclude=clipA@5\nclipA\tnormal\t1\nstill.png\tfight\t1\n");
  const auto m = load_manifest((dir / "m.txt").string());
  const auto plan = plan_frames(m);
  ASSERT_EQ(plan.size(), 3u);
  EXPECT_EQ(plan[0].frame_index, 0);
  EXPECT_EQ(plan[1].frame_index, 10);
  EXPECT_EQ(fs::path(plan[1].frame_file).filename(), "f010.png");
  EXPECT_EQ(plan[2].class_name, "fight");
  EXPECT_EQ(plan[2].task_id, 1u);
  EXPECT_EQ(plan[0].sample_id, make_sample_id("m", "clipA", 0));

  write_text(dir / "m2.txt", "!exclude=clipA\nclipA\tnormal\t1\n");
  EXPECT_TRUE(plan_frames(load_manifest((dir / "m2.txt").string())).empty());
  write_text(dir / "m3.txt", "gone\tnormal\t1\n");
  EXPECT_FP_ERROR(plan_frames(load_manifest((dir / "m3.txt").string())), ErrorCode::kIo);
  fs::remove_all(dir);
}
