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

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "fusionpool/extraction.hpp"
#include "support/corpus.hpp"
#include "unit/test_util.hpp"

using namespace fusionpool;

namespace {

bool update_goldens() {
  const char* v = std::getenv("FUSIONPOOL_UPDATE_GOLDENS");
  return v && *v && std::string(v) != "0";
}

FrameTensor zero_frame(int size) {
  FrameTensor f;
  f.height = f.width = size;
  f.values.assign(static_cast<std::size_t>(size) * size * 3, 0.0f);
  return f;
}

FrameTensor random_frame(std::uint64_t seed, int size) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  auto f = zero_frame(size);
  for (auto& v : f.values) v = u(rng);
  return f;
}

}  // namespace

TEST(SyntheticExtractor, ReportsDeclaredDims) {
  const auto ex = load_backbone(fptest::synthetic_spec("s", 3, 12, 8, 3, 3));
  EXPECT_EQ(ex.feature_dim(), 8);
  const auto fm = ex.extract_one(random_frame(1, 12));
  EXPECT_EQ(fm.map_count, 8);
  EXPECT_EQ(fm.map_height, 3);
  EXPECT_EQ(fm.map_width, 3);
  EXPECT_EQ(fm.maps.size(), 72u);
  EXPECT_EQ(fm.pooled.size(), 8u);
}

TEST(SyntheticExtractor, PooledIsGlobalAverageOfMaps) {
  const auto fm = synthetic_extract(11, random_frame(2, 10), 5, 4, 3);
  for (int k = 0; k < 5; ++k) {
    double s = 0;
    for (float v : fm.map(k)) s += v;
    EXPECT_NEAR(fm.pooled[k], s / 12.0, 1e-6);
  }
}

TEST(SyntheticExtractor, Deterministic) {
  const auto f = random_frame(4, 9);
  const auto a = synthetic_extract(7, f, 6, 3, 3);
  const auto b = synthetic_extract(7, f, 6, 3, 3);
  EXPECT_EQ(a.maps, b.maps);
  EXPECT_EQ(a.pooled, b.pooled);
}

TEST(SyntheticExtractor, SeedChangesOutput) {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto f = random_frame(100 + trial, 8);
    EXPECT_NE(synthetic_extract(7, f, 4, 2, 2).maps, synthetic_extract(8, f, 4, 2, 2).maps);
  }
}

TEST(SyntheticExtractor, OnePixelChangesPooledVector) {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    auto f = random_frame(200 + trial, 8);
    const auto a = synthetic_extract(5, f, 4, 2, 2);
    const auto pixel = static_cast<std::size_t>(trial * 7 % 64) * 3 + trial % 3;
    f.values[pixel] += 0.25f;
    EXPECT_NE(a.pooled, synthetic_extract(5, f, 4, 2, 2).pooled) << "trial " << trial;
  }
}

TEST(SyntheticExtractor, ZeroFrameSeedZeroGolden) {
  const auto fm = synthetic_extract(0, zero_frame(8), 8, 3, 3);
  const auto path = fptest::fixture("synthetic_seed0_zero_frame.txt");
  if (update_goldens()) {
    std::ofstream out(path);
    char buf[32];
    for (std::size_t i = 0; i < fm.maps.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", fm.maps[i]);
      out << buf << ((i + 1) % 9 == 0 ? "\n" : " ");
    }
  }
  const auto want = fptest::read_numbers(path);
  ASSERT_EQ(want.size(), fm.maps.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(fm.maps[i], static_cast<float>(want[i])) << i;
}

TEST(SyntheticExtractor, ExtractPreservesOrderAcrossJobs) {
  const auto ex = load_backbone(fptest::synthetic_spec("s", 9, 8, 4, 2, 2));
  std::vector<FrameTensor> frames;
  for (std::uint64_t i = 0; i < 9; ++i) frames.push_back(random_frame(i, 8));
  const auto serial = ex.extract(frames, 1);
  const auto threaded = ex.extract(frames, 4);
  ASSERT_EQ(serial.size(), frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(serial[i].maps, threaded[i].maps);
    EXPECT_EQ(serial[i].pooled, ex.extract_one(frames[i]).pooled);
  }
  EXPECT_TRUE(ex.extract({}, 2).empty());
}

TEST(SyntheticExtractor, RejectsWrongFrameSize) {
  const auto ex = load_backbone(fptest::synthetic_spec("s", 1, 8, 4, 2, 2));
  EXPECT_FP_ERROR(ex.extract_one(zero_frame(9)), ErrorCode::kDimensionMismatch);
}

TEST(BackboneSpec, Validation) {
  auto s = fptest::synthetic_spec("s", 1);
  s.feature_dim = 7;
  EXPECT_FP_ERROR(load_backbone(s), ErrorCode::kDimensionMismatch);
  s = fptest::synthetic_spec("", 1);
  EXPECT_FP_ERROR(load_backbone(s), ErrorCode::kInvalidArgument);
  s = fptest::synthetic_spec("s", 1);
  s.source = "synthetic:abc";
  EXPECT_FP_ERROR(load_backbone(s), ErrorCode::kInvalidArgument);
  EXPECT_FP_ERROR(parse_normalization("zscore"), ErrorCode::kInvalidArgument);
}
