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
#include <random>

#include "fusionpool/heads.hpp"
#include "support/corpus.hpp"
#include "unit/test_util.hpp"

namespace fs = std::filesystem;
using namespace fusionpool;

namespace {

constexpr HeadKind kAllKinds[] = {HeadKind::kKnn,      HeadKind::kLogReg,   HeadKind::kSoftMax,
                                  HeadKind::kSvm,      HeadKind::kAdaBoost, HeadKind::kNaiveBayes};

FeaturePool pool_from(const std::vector<std::vector<float>>& points,
                      const std::vector<std::string>& labels) {
  Schema schema{{"f", static_cast<std::uint32_t>(points.at(0).size())}};
  std::vector<LabeledFeatures> s;
  for (std::size_t i = 0; i < points.size(); ++i) s.push_back({i + 1, 0, labels[i], points[i]});
  return build_pool(schema, LabelSpace::first_seen(labels), {TaskInfo{0, "toy"}}, s);
}

HeadConfig config_for(HeadKind kind) {
  HeadConfig c;
  c.kind = kind;
  c.epochs = 200;
  c.rounds = 20;
  return c;
}

double accuracy(const TrainedHead& h, const FeaturePool& p) {
  const auto pred = predict(h, p);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += pred[i] == p.records[i].global_class;
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

// Class A on x1 < 0, class B on x1 > 0.
FeaturePool separable_2d(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.2f, 3.0f), v(-2.0f, 2.0f);
  std::vector<std::vector<float>> pts;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const bool b = i % 2 == 1;
    pts.push_back({b ? u(rng) : -u(rng), v(rng)});
    labels.push_back(b ? "B" : "A");
  }
  return pool_from(pts, labels);
}

}  // namespace

TEST(Knn, NearestNeighbour) {
  const auto pool = pool_from({{0, 0}, {10, 10}}, {"A", "B"});
  auto cfg = config_for(HeadKind::kKnn);
  cfg.k = 1;
  const auto head = train(pool, cfg);
  EXPECT_EQ(predict(head, std::vector<float>{1, 1}), 0u);
  EXPECT_EQ(predict(head, std::vector<float>{9, 8}), 1u);
  EXPECT_EQ(head.knn.points.size(), 2u);
}

TEST(Knn, StoresThePoolAndVotes) {
  const auto pool = pool_from({{0}, {1}, {2}, {3}, {4}}, {"A", "A", "A", "B", "B"});
  auto cfg = config_for(HeadKind::kKnn);
  cfg.k = 5;
  const auto head = train(pool, cfg);
  ASSERT_EQ(head.knn.points.size(), pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_EQ(head.knn.points[i], pool.records[i].features);
  const auto s = predict_scores(head, std::vector<float>{2.2f});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0], 0.6);
  EXPECT_DOUBLE_EQ(s[1], 0.4);
}

TEST(Knn, KLargerThanPool) {
  const auto pool = pool_from({{0}, {1}, {5}}, {"A", "B", "B"});
  auto cfg = config_for(HeadKind::kKnn);
  cfg.k = 50;
  const auto s = predict_scores(train(pool, cfg), std::vector<float>{0});
  EXPECT_NEAR(s[0], 1.0 / 3.0, 1e-15);
}

TEST(NaiveBayes, SymmetricTieGoesToLowerIndex) {
  const auto pool = pool_from({{-2}, {0}, {0}, {2}}, {"A", "A", "B", "B"});
  const auto head = train(pool, config_for(HeadKind::kNaiveBayes));
  const auto s = predict_scores(head, std::vector<float>{0});
  EXPECT_DOUBLE_EQ(s[0], s[1]);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_EQ(predict(head, std::vector<float>{0}), 0u);
  EXPECT_EQ(predict(head, std::vector<float>{1.5f}), 1u);
}

TEST(NaiveBayes, DegenerateData) {
  const auto flat = pool_from({{1, 1}, {1, 1}, {1, 1}, {1, 1}}, {"A", "A", "B", "B"});
  EXPECT_FP_ERROR(train(flat, config_for(HeadKind::kNaiveBayes)), ErrorCode::kDegenerate);
  // A class with zero variance in one dimension needs the floor.
  const auto pool = pool_from({{0, 1}, {0, 2}, {3, 5}, {4, 7}}, {"A", "A", "B", "B"});
  auto cfg = config_for(HeadKind::kNaiveBayes);
  cfg.var_floor = 0;
  EXPECT_FP_ERROR(train(pool, cfg), ErrorCode::kDegenerate);
  cfg.var_floor = 1e-9;
  const auto head = train(pool, cfg);
  EXPECT_EQ(accuracy(head, pool), 1.0);
}

TEST(SoftMax, ZeroWeightsGiveUniformScores) {
  for (std::size_t classes : {2u, 3u}) {
    std::mt19937_64 rng(classes);
    const auto pool = fptest::gaussian_pool(rng, 6, 4, classes, 3.0);
    auto head = train(pool, config_for(HeadKind::kSoftMax));
    std::fill(head.linear.weights.begin(), head.linear.weights.end(), 0.0);
    std::fill(head.linear.bias.begin(), head.linear.bias.end(), 0.0);
    const auto s = predict_scores(head, pool.records[0].features);
    for (double v : s) EXPECT_DOUBLE_EQ(v, 1.0 / static_cast<double>(classes));
    EXPECT_NEAR(head.diagnostics.loss_history.at(0), std::log(static_cast<double>(classes)), 1e-12);
  }
}

TEST(SoftMax, IdenticalToLogRegForTwoClasses) {
  std::mt19937_64 rng(11);
  const auto pool = fptest::gaussian_pool(rng, 30, 5, 2, 1.0);
  const auto a = train(pool, config_for(HeadKind::kSoftMax));
  const auto b = train(pool, config_for(HeadKind::kLogReg));
  EXPECT_EQ(a.linear, b.linear);
  EXPECT_EQ(predict(a, pool), predict(b, pool));
}

TEST(LogReg, SeparableToyReachesFullTrainingAccuracy) {
  const auto pool = separable_2d(3, 20);
  EXPECT_EQ(accuracy(train(pool, config_for(HeadKind::kLogReg)), pool), 1.0);
}

TEST(LinearHeads, LossNeverIncreases) {
  std::mt19937_64 rng(21);
  const auto pool = fptest::gaussian_pool(rng, 25, 6, 3, 1.5);
  for (auto kind : {HeadKind::kLogReg, HeadKind::kSoftMax, HeadKind::kSvm}) {
    auto cfg = config_for(kind);
    cfg.learning_rate = 0.05;
    const auto head = train(pool, cfg);
    const auto& h = head.diagnostics.loss_history;
    ASSERT_EQ(h.size(), cfg.epochs + 1);
    for (std::size_t i = 1; i < h.size(); ++i) {
      EXPECT_LE(h[i], h[i - 1] + 1e-12) << head_kind_name(kind) << " epoch " << i;
    }
  }
}

TEST(LinearHeads, NonConvergenceIsFlagged) {
  std::mt19937_64 rng(2);
  const auto pool = fptest::gaussian_pool(rng, 20, 3, 2, 0.5);
  auto cfg = config_for(HeadKind::kLogReg);
  cfg.epochs = 1;
  const auto head = train(pool, cfg);
  ASSERT_FALSE(head.warnings.empty());
  EXPECT_NE(head.warnings.back().find("not converged"), std::string::npos);
}

TEST(LinearHeads, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const auto pool = fptest::gaussian_pool(rng, 7, 4, 3, 1.0);  // 21 samples
  for (auto kind : {HeadKind::kSoftMax, HeadKind::kLogReg, HeadKind::kSvm}) {
    auto cfg = config_for(kind);
    cfg.lambda = 0.01;
    EXPECT_LT(gradient_check(kind, pool, cfg), 1e-4) << head_kind_name(kind);
  }
  EXPECT_FP_ERROR(gradient_check(HeadKind::kKnn, pool, config_for(HeadKind::kKnn)),
                  ErrorCode::kUnsupportedHead);
}

TEST(LinearHeads, EmptyBatchGradientIsPenalty) {
  heads::Design empty;
  empty.d = 3;
  empty.classes = 2;
  LinearParams p{2, 3, {0, 0, 0, 1.5, -2, 0.25}, {0, 0.5}};
  const double lambda = 0.1;
  for (auto model : {heads::LinearModel::kReferenceSoftmax, heads::LinearModel::kOvrLogistic,
                     heads::LinearModel::kOvrSquaredHinge}) {
    const auto g = heads::loss_and_gradient(model, empty, p, lambda);
    for (std::size_t i = 3; i < 6; ++i) EXPECT_DOUBLE_EQ(g.grad_w[i], lambda * p.weights[i]);
    EXPECT_DOUBLE_EQ(g.grad_b[1], 0.0);
  }
}

TEST(LinearHeads, HingePlateauHasZeroDataGradient) {
  heads::Design data;
  data.n = 2;
  data.d = 1;
  data.classes = 2;
  data.z = {2.0, -2.0};
  data.y = {1, 0};
  LinearParams p{2, 1, {-1.0, 1.0}, {0.0, 0.0}};  // margins of 2 on both samples
  const auto g = heads::loss_and_gradient(heads::LinearModel::kOvrSquaredHinge, data, p, 0.0);
  EXPECT_EQ(g.loss, 0.0);
  for (double v : g.grad_w) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_b) EXPECT_EQ(v, 0.0);
}

TEST(AdaBoost, ThresholdDataIsPerfectAfterOneRound) {
  std::vector<std::vector<float>> pts;
  std::vector<std::string> labels;
  for (int i = -10; i <= 10; ++i) {
    if (i == 0) continue;
    pts.push_back({static_cast<float>(i) * 0.37f});
    labels.push_back(i < 0 ? "A" : "B");
  }
  const auto pool = pool_from(pts, labels);
  const auto head = train(pool, config_for(HeadKind::kAdaBoost));
  ASSERT_EQ(head.adaboost.stumps.size(), 1u);
  EXPECT_EQ(head.diagnostics.stage_errors.at(0), 0.0);
  EXPECT_EQ(accuracy(head, pool), 1.0);

  // Brute force over every threshold confirms a zero-error split exists and
  // the chosen one is a zero-error split.
  const auto& st = head.adaboost.stumps[0];
  std::size_t wrong = 0;
  for (const auto& r : pool.records) {
    std::vector<double> z{(r.features[0] - head.standardizer.mean[0]) / head.standardizer.std[0]};
    wrong += st.vote(z) != r.global_class;
  }
  EXPECT_EQ(wrong, 0u);
}

TEST(AdaBoost, ScoresAreVoteShares) {
  std::mt19937_64 rng(8);
  const auto pool = fptest::gaussian_pool(rng, 20, 3, 3, 1.0);
  const auto head = train(pool, config_for(HeadKind::kAdaBoost));
  const auto s = predict_scores(head, pool.records[0].features);
  double sum = 0;
  for (double v : s) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  for (std::size_t i = 0; i < head.adaboost.alphas.size(); ++i) EXPECT_GT(head.adaboost.alphas[i], 0.0);
}

TEST(Heads, DeterministicAcrossRunsAndJobs) {
  std::mt19937_64 rng(13);
  const auto pool = fptest::gaussian_pool(rng, 40, 5, 3, 1.2);
  for (auto kind : kAllKinds) {
    auto cfg = config_for(kind);
    const auto a = serialize_head(train(pool, cfg));
    const auto b = serialize_head(train(pool, cfg));
    cfg.jobs = 3;
    const auto threaded = train(pool, cfg);
    auto c = threaded;
    c.config.jobs = 1;
    EXPECT_EQ(a, b) << head_kind_name(kind);
    EXPECT_EQ(a, serialize_head(c)) << head_kind_name(kind);
    EXPECT_EQ(predict(threaded, pool, 1), predict(threaded, pool, 4));
  }
}

TEST(Heads, LearnSeparatedClusters) {
  std::mt19937_64 rng(17);
  const auto train_pool = fptest::gaussian_pool(rng, 40, 6, 3, 2.0);
  for (auto kind : kAllKinds) {
    EXPECT_GE(accuracy(train(train_pool, config_for(kind)), train_pool), 0.9) << head_kind_name(kind);
  }
}

TEST(Heads, TrainingPreconditions) {
  const auto one_class = pool_from({{0}, {1}}, {"A", "A"});
  EXPECT_FP_ERROR(train(one_class, config_for(HeadKind::kKnn)), ErrorCode::kInvalidArgument);
  auto missing = pool_from({{0}, {1}}, {"A", "B"});
  missing.labels.add("C");
  EXPECT_FP_ERROR(train(missing, config_for(HeadKind::kKnn)), ErrorCode::kInvalidArgument);
  auto cfg = config_for(HeadKind::kKnn);
  cfg.k = 0;
  EXPECT_FP_ERROR(train(pool_from({{0}, {1}}, {"A", "B"}), cfg), ErrorCode::kInvalidArgument);
  const auto head = train(pool_from({{0}, {1}}, {"A", "B"}), config_for(HeadKind::kKnn));
  EXPECT_FP_ERROR(predict(head, std::vector<float>{0, 1}), ErrorCode::kDimensionMismatch);
  EXPECT_FP_ERROR(parse_head_kind("forest"), ErrorCode::kInvalidArgument);
}

TEST(HeadFile, RoundTripEveryKind) {
  const auto dir = fptest::temp_dir("head");
  std::mt19937_64 rng(4);
  const auto pool = fptest::gaussian_pool(rng, 15, 4, 3, 1.5);
  for (auto kind : kAllKinds) {
    const auto head = train(pool, config_for(kind));
    const auto path = (dir / (std::string(head_kind_name(kind)) + ".head")).string();
    save_head(head, path);
    const auto back = load_head(path);
    EXPECT_EQ(back.kind, kind);
    EXPECT_EQ(back.class_names, head.class_names);
    EXPECT_EQ(back.standardizer, head.standardizer);
    EXPECT_EQ(serialize_head(back), serialize_head(head));
    EXPECT_EQ(predict(back, pool), predict(head, pool));
  }
  fs::remove_all(dir);
}

TEST(HeadFile, CorruptionIsDetected) {
  std::mt19937_64 rng(6);
  const auto head = train(fptest::gaussian_pool(rng, 10, 3, 2, 1.0), config_for(HeadKind::kSoftMax));
  const auto bytes = serialize_head(head);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FPH1");
  auto flipped = bytes;
  flipped[bytes.size() - 12] ^= 0x01;
  EXPECT_FP_ERROR(deserialize_head(flipped), ErrorCode::kChecksum);
  auto magic = bytes;
  magic[1] = 'Q';
  EXPECT_FP_ERROR(deserialize_head(magic), ErrorCode::kFormat);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 20);
  EXPECT_FP_ERROR(deserialize_head(cut), ErrorCode::kTruncated);
}
