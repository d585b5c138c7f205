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

#include <filesystem>

#include "fusionpool/detail/binary_io.hpp"
#include "fusionpool/fusion_pool.hpp"
#include "support/corpus.hpp"
#include "unit/test_util.hpp"

namespace fs = std::filesystem;
using namespace fusionpool;

namespace {

const Schema kSchema{{"a", 2}, {"b", 1}};

std::vector<LabeledFeatures> samples(std::uint32_t task, const std::vector<std::string>& labels,
                                     std::uint64_t first_id) {
  std::vector<LabeledFeatures> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const float v = static_cast<float>(first_id + i);
    out.push_back({first_id + i, task, labels[i], {v, -v, v * 0.5f}});
  }
  return out;
}

FeaturePool task_pool(std::uint32_t task, const std::string& dataset,
                      const std::vector<std::string>& labels, std::uint64_t first_id) {
  const auto s = samples(task, labels, first_id);
  return build_pool(kSchema, LabelSpace::first_seen(labels), {TaskInfo{task, dataset}}, s);
}

std::vector<std::string> repeated(const std::vector<std::string>& names, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(names[i % names.size()]);
  return out;
}

}  // namespace

TEST(Fuse, ConcatenatesInSchemaOrder) {
  const Schema s{{"x", 2}, {"y", 1}, {"z", 2}};
  EXPECT_EQ(fuse({{1, 2}, {3}, {4, 5}}, s), (std::vector<float>{1, 2, 3, 4, 5}));
  const Schema one{{"x", 3}};
  EXPECT_EQ(fuse({{7, 8, 9}}, one), (std::vector<float>{7, 8, 9}));
}

TEST(Fuse, FourBackboneWidth) {
  const Schema s{{"MobileNetV2", 1280}, {"ResNet50", 2048}, {"InceptionV3", 1536}, {"Xception", 2048}};
  EXPECT_EQ(schema_dim(s), 6912u);
  EXPECT_EQ(schema_offset(s, "InceptionV3"), 3328u);
  EXPECT_FP_ERROR(schema_offset(s, "VGG16"), ErrorCode::kSchemaMismatch);
}

TEST(Fuse, DimensionChecks) {
  EXPECT_FP_ERROR(fuse({{1, 2}}, kSchema), ErrorCode::kDimensionMismatch);
  EXPECT_FP_ERROR(fuse({{1}, {2}}, kSchema), ErrorCode::kDimensionMismatch);
}

TEST(BuildPool, FromTwoSyntheticBackbones) {
  const auto e1 = load_backbone(fptest::synthetic_spec("s1", 1, 8, 4, 2, 2));
  const auto e2 = load_backbone(fptest::synthetic_spec("s2", 2, 8, 4, 2, 2));
  const Schema schema{{"s1", 4}, {"s2", 4}};
  std::vector<ExtractedSample> ex;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    const auto img = fptest::jittered_frame(rng, {100, 100, 100}, 10, 10, 8);
    ExtractedSample s;
    s.sample_id = 1000 + i;
    s.label = i % 2 ? "violence" : "normal";
    s.per_backbone = {e1.extract_one(preprocess_frame(img, e1.spec())),
                      e2.extract_one(preprocess_frame(img, e2.spec()))};
    ex.push_back(std::move(s));
  }
  LabelSpace labels;
  labels.add("normal");
  labels.add("violence");
  const auto pool = build_pool(schema, ex, TaskInfo{0, "rlvs"}, labels);
  EXPECT_EQ(pool.size(), 10u);
  EXPECT_EQ(pool.dim(), 8u);
  EXPECT_EQ(pool.records[3].global_class, 1u);
  EXPECT_EQ(std::vector<float>(pool.records[0].features.begin() + 4, pool.records[0].features.end()),
            ex[0].per_backbone[1].pooled);

  ex[0].per_backbone.pop_back();
  EXPECT_FP_ERROR(build_pool(schema, ex, TaskInfo{0, "rlvs"}, labels), ErrorCode::kDimensionMismatch);
}

TEST(BuildPool, EmptyAndUnknownLabel) {
  const auto empty = build_pool(kSchema, LabelSpace{}, {TaskInfo{0, "d"}}, {});
  EXPECT_TRUE(empty.empty());
  EXPECT_EQ(empty.dim(), 3u);
  LabelSpace ls;
  ls.add("normal");
  const auto s = samples(0, {"normal", "arson"}, 1);
  EXPECT_FP_ERROR(build_pool(kSchema, ls, {TaskInfo{0, "d"}}, s), ErrorCode::kUnknownLabel);
}

TEST(BuildPool, RejectsCollisionsAndNonFinite) {
  auto s = samples(0, {"a", "b"}, 1);
  s[1].sample_id = s[0].sample_id;
  EXPECT_FP_ERROR(build_pool(kSchema, LabelSpace::first_seen(std::vector<std::string>{"a", "b"}),
                             {TaskInfo{0, "d"}}, s),
                  ErrorCode::kCollision);
  s = samples(0, {"a"}, 1);
  s[0].features[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FP_ERROR(build_pool(kSchema, LabelSpace::first_seen(std::vector<std::string>{"a"}),
                             {TaskInfo{0, "d"}}, s),
                  ErrorCode::kNonFinite);
}

TEST(LabelSpace, CaseInsensitiveFirstSeen) {
  const auto ls = LabelSpace::first_seen(std::vector<std::string>{"Normal", "fight", "NORMAL"});
  EXPECT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls.index_of("normal"), 0u);
  EXPECT_EQ(ls.classes[0], "Normal");
}

TEST(MergePools, SharedNormalClass) {
  const auto ucf = task_pool(0, "ucf", repeated({"normal", "shoplifting"}, 100), 1);
  const auto rlvs = task_pool(1, "rlvs", repeated({"Normal", "violence"}, 200), 10000);
  const auto merged = merge_pools(ucf, rlvs);
  EXPECT_EQ(merged.labels.classes, (std::vector<std::string>{"normal", "shoplifting", "violence"}));
  EXPECT_EQ(merged.size(), 300u);
  EXPECT_EQ(merged.tasks.size(), 2u);
  for (std::size_t i = 0; i < ucf.size(); ++i) EXPECT_EQ(merged.records[i], ucf.records[i]);
  EXPECT_EQ(merged.records[100].global_class, 0u);
  EXPECT_EQ(merged.records[101].global_class, 2u);
  EXPECT_EQ(merged.task_classes(1), (std::vector<std::uint32_t>{0, 2}));
}

TEST(MergePools, AliasPolicy) {
  const auto a = task_pool(0, "ucf", {"normal", "shoplifting"}, 1);
  const auto b = task_pool(1, "rlvs", {"nonviolence", "violence"}, 50);
  MergePolicy p;
  p.alias("NonViolence", "normal");
  const auto merged = merge_pools(a, b, p);
  EXPECT_EQ(merged.labels.size(), 3u);
  EXPECT_EQ(merged.records[2].global_class, 0u);
  MergePolicy bad;
  bad.alias("ghost", "normal");
  EXPECT_FP_ERROR(merge_pools(a, b, bad), ErrorCode::kUnknownLabel);
}

TEST(MergePools, WithEmptyPoolKeepsRecords) {
  const auto a = task_pool(0, "ucf", {"normal", "shoplifting", "normal"}, 1);
  const auto empty = build_pool(kSchema, LabelSpace::first_seen(std::vector<std::string>{"arson"}),
                                {TaskInfo{5, "other"}}, {});
  const auto merged = merge_pools(a, empty);
  EXPECT_EQ(merged.records, a.records);
  EXPECT_EQ(merged.labels.size(), 3u);
}

TEST(MergePools, Conflicts) {
  const auto a = task_pool(0, "ucf", {"normal"}, 1);
  EXPECT_FP_ERROR(merge_pools(a, task_pool(1, "rlvs", {"normal"}, 1)), ErrorCode::kCollision);
  EXPECT_FP_ERROR(merge_pools(a, task_pool(0, "rlvs", {"normal"}, 9)), ErrorCode::kTaskReuse);
  auto other = a;
  other.schema = {{"a", 2}, {"c", 1}};
  EXPECT_FP_ERROR(merge_pools(a, other), ErrorCode::kSchemaMismatch);
}

TEST(AddTask, MatchesRebuildFromScratch) {
  const auto ucf_s = samples(0, repeated({"normal", "shoplifting"}, 100), 1);
  const auto rlvs_s = samples(1, repeated({"normal", "violence"}, 200), 1000);
  const auto new_s = samples(2, repeated({"vandalism"}, 50), 5000);
  const auto two = merge_pools(fptest::pool_of(kSchema, {0, "ucf"}, ucf_s),
                               fptest::pool_of(kSchema, {1, "rlvs"}, rlvs_s));
  const auto three = add_task(two, new_s, TaskInfo{2, "movies"});
  EXPECT_EQ(three.tasks.size(), 3u);
  EXPECT_EQ(three.size(), 350u);
  for (std::size_t i = 0; i < two.size(); ++i) EXPECT_EQ(three.records[i], two.records[i]);

  std::vector<LabeledFeatures> all = ucf_s;
  all.insert(all.end(), rlvs_s.begin(), rlvs_s.end());
  all.insert(all.end(), new_s.begin(), new_s.end());
  std::vector<std::string> names;
  for (const auto& s : all) names.push_back(s.label);
  const auto scratch = build_pool(kSchema, LabelSpace::first_seen(names),
                                  {{0, "ucf"}, {1, "rlvs"}, {2, "movies"}}, all);
  EXPECT_EQ(three, scratch);
  EXPECT_EQ(serialize_pool(three), serialize_pool(scratch));
}

TEST(AddTask, EmptyAndReusedTask) {
  const auto a = task_pool(0, "ucf", {"normal", "shoplifting"}, 1);
  const auto b = add_task(a, {}, TaskInfo{1, "rlvs"});
  EXPECT_EQ(b.records, a.records);
  EXPECT_EQ(b.labels, a.labels);
  EXPECT_EQ(b.tasks.size(), 2u);
  const auto s = samples(0, {"x"}, 77);
  EXPECT_FP_ERROR(add_task(a, s, TaskInfo{0, "again"}), ErrorCode::kTaskReuse);
  EXPECT_FP_ERROR(add_task(a, s, TaskInfo{3, "mislabelled"}), ErrorCode::kInvalidArgument);
}

TEST(PoolFile, RoundTrip) {
  const auto dir = fptest::temp_dir("pool");
  const auto pool = task_pool(3, "ucf", {"normal", "shoplifting", "normal"}, 42);
  const auto path = (dir / "p.fpl").string();
  save_pool(pool, path);
  const auto back = load_pool(path);
  EXPECT_EQ(back, pool);
  EXPECT_EQ(back.checksum, pool.checksum);
  fs::remove_all(dir);
}

TEST(PoolFile, Layout) {
  const auto bytes = serialize_pool(task_pool(0, "d", {"a"}, 1));
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FPL1");
  EXPECT_EQ(bytes[4], 1u);  // version, little-endian
  const auto crc = fusionpool::detail::crc32(std::span<const std::uint8_t>(bytes.data() + 4, bytes.size() - 8));
  const std::uint32_t stored = bytes[bytes.size() - 4] | (bytes[bytes.size() - 3] << 8) |
                               (bytes[bytes.size() - 2] << 16) |
                               (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24);
  EXPECT_EQ(crc, stored);
}

TEST(PoolFile, CorruptionIsDetected) {
  auto bytes = serialize_pool(task_pool(0, "d", {"a", "b", "a"}, 1));
  auto flipped = bytes;
  flipped[bytes.size() - 10] ^= 0x40;  // inside the last feature value
  EXPECT_FP_ERROR(deserialize_pool(flipped), ErrorCode::kChecksum);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_FP_ERROR(deserialize_pool(magic), ErrorCode::kFormat);
  auto version = bytes;
  version[4] = 9;
  EXPECT_FP_ERROR(deserialize_pool(version), ErrorCode::kVersion);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 9);
  EXPECT_FP_ERROR(deserialize_pool(cut), ErrorCode::kTruncated);
  EXPECT_FP_ERROR(load_pool("/nonexistent/pool.fpl"), ErrorCode::kIo);
}
