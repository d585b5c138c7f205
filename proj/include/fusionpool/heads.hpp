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

#pragma once

// Training, prediction and persistence for the six classifier heads.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusionpool/detail/binary_io.hpp"
#include "fusionpool/error.hpp"
#include "fusionpool/fusion_pool.hpp"
#include "fusionpool/heads/adaboost.hpp"
#include "fusionpool/heads/knn.hpp"
#include "fusionpool/heads/linear.hpp"
#include "fusionpool/heads/naive_bayes.hpp"
#include "fusionpool/heads/types.hpp"

namespace fusionpool {

inline constexpr std::string_view kHeadMagic = "FPH1";
inline constexpr std::uint32_t kHeadVersion = 1;

namespace detail {

inline heads::Design make_design(const FeaturePool& pool, const Standardizer& s) {
  heads::Design d;
  d.n = pool.size();
  d.d = pool.dim();
  d.classes = pool.labels.size();
  d.z.resize(d.n * d.d);
  d.y.resize(d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    const auto& r = pool.records[i];
    s.apply(r.features, {d.z.data() + i * d.d, d.d});
    d.y[i] = r.global_class;
  }
  return d;
}

inline Standardizer fit_standardizer(const FeaturePool& pool) {
  std::vector<std::span<const float>> rows;
  rows.reserve(pool.size());
  for (const auto& r : pool.records) rows.emplace_back(r.features);
  return Standardizer::fit(rows, pool.dim());
}

inline void check_dim(const TrainedHead& head, std::size_t got) {
  if (got != head.dim) {
    fail(ErrorCode::kDimensionMismatch, "feature dimension " + std::to_string(got) +
                                            " does not match head dimension " +
                                            std::to_string(head.dim));
  }
}

}  // namespace detail

inline TrainedHead train(const FeaturePool& pool, const HeadConfig& config) {
  config.validate();
  if (pool.empty()) fail(ErrorCode::kInvalidArgument, "cannot train on an empty pool");
  if (pool.labels.size() < 2) fail(ErrorCode::kInvalidArgument, "training needs at least two classes");
  const auto counts = pool.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      fail(ErrorCode::kInvalidArgument, "class '" + pool.labels.classes[c] + "' has no records");
    }
  }

  TrainedHead head;
  head.kind = config.kind;
  head.class_names = pool.labels.classes;
  head.dim = static_cast<std::uint32_t>(pool.dim());
  head.config = config;
  head.standardizer = detail::fit_standardizer(pool);

  switch (config.kind) {
    case HeadKind::kKnn:
      head.knn.k = config.k;
      head.knn.labels.reserve(pool.size());
      head.knn.points.reserve(pool.size());
      for (const auto& r : pool.records) {
        head.knn.labels.push_back(r.global_class);
        head.knn.points.push_back(r.features);
      }
      break;
    case HeadKind::kLogReg:
    case HeadKind::kSoftMax:
    case HeadKind::kSvm: {
      const auto data = detail::make_design(pool, head.standardizer);
      head.linear = heads::train_linear(heads::linear_model_for(config.kind, data.classes), data,
                                        config, head.diagnostics, head.warnings);
      break;
    }
    case HeadKind::kAdaBoost: {
      const auto data = detail::make_design(pool, head.standardizer);
      head.adaboost = heads::train_adaboost(data, config, head.diagnostics, head.warnings);
      break;
    }
    case HeadKind::kNaiveBayes: {
      const auto data = detail::make_design(pool, head.standardizer);
      head.nb = heads::train_naive_bayes(data, config);
      break;
    }
  }
  return head;
}

// Per-class scores: probabilities for LogReg, SoftMax and NB, vote fractions
// for KNN, stage-weighted vote shares for AdaBoost, margins for SVM.
inline std::vector<double> predict_scores(const TrainedHead& head, std::span<const float> x) {
  detail::check_dim(head, x.size());
  const auto C = head.class_count();
  if (head.kind == HeadKind::kKnn) return heads::knn_scores(head.knn, head.standardizer, C, x);
  std::vector<double> z(head.dim);
  head.standardizer.apply(x, z);
  switch (head.kind) {
    case HeadKind::kLogReg:
    case HeadKind::kSoftMax:
    case HeadKind::kSvm:
      return heads::linear_scores(heads::linear_model_for(head.kind, C), head.linear, z);
    case HeadKind::kAdaBoost: return heads::adaboost_scores(head.adaboost, C, z);
    case HeadKind::kNaiveBayes: return heads::naive_bayes_scores(head.nb, z);
    case HeadKind::kKnn: break;
  }
  return {};
}

// Highest score; ties go to the lowest class index.
inline std::uint32_t predict(const TrainedHead& head, std::span<const float> x) {
  return heads::argmax_low(predict_scores(head, x));
}

inline std::vector<std::uint32_t> predict(const TrainedHead& head,
                                          const std::vector<std::vector<float>>& rows,
                                          int jobs = 1) {
  return detail::parallel_map<std::uint32_t>(rows.size(), jobs,
                                             [&](std::size_t i) { return predict(head, rows[i]); });
}

inline std::vector<std::uint32_t> predict(const TrainedHead& head, const FeaturePool& pool,
                                          int jobs = 1) {
  return detail::parallel_map<std::uint32_t>(
      pool.size(), jobs, [&](std::size_t i) { return predict(head, pool.records[i].features); });
}

// Worst relative gap between the analytic gradient of the training objective
// and central differences, at a random parameter point drawn from config.seed.
inline double gradient_check(HeadKind kind, const FeaturePool& pool, const HeadConfig& config) {
  if (!is_linear(kind)) {
    fail(ErrorCode::kUnsupportedHead, "gradient check needs a LogReg, SoftMax or SVM head");
  }
  const auto s = detail::fit_standardizer(pool);
  const auto data = detail::make_design(pool, s);
  return heads::gradient_check(heads::linear_model_for(kind, data.classes), data, data.classes,
                               config.lambda, config.seed);
}

// ---- .head files ----

inline std::vector<std::uint8_t> serialize_head(const TrainedHead& h) {
  detail::ByteWriter w;
  w.u32(kHeadVersion);
  w.u8(static_cast<std::uint8_t>(h.kind));
  w.u32(static_cast<std::uint32_t>(h.class_names.size()));
  for (const auto& c : h.class_names) w.short_string(c);
  w.u32(h.dim);
  w.u64(h.config.seed);
  w.u32(h.config.k);
  w.f64(h.config.lambda);
  w.f64(h.config.learning_rate);
  w.u32(h.config.epochs);
  w.u32(h.config.rounds);
  w.f64(h.config.var_floor);
  for (std::size_t j = 0; j < h.dim; ++j) {
    w.f64(h.standardizer.mean[j]);
    w.f64(h.standardizer.std[j]);
  }
  w.u32(static_cast<std::uint32_t>(h.warnings.size()));
  for (const auto& s : h.warnings) w.short_string(s);

  switch (h.kind) {
    case HeadKind::kKnn:
      w.u32(h.knn.k);
      w.u8(h.knn.metric);
      w.u64(h.knn.points.size());
      for (std::size_t i = 0; i < h.knn.points.size(); ++i) {
        w.u32(h.knn.labels[i]);
        w.f32_array(h.knn.points[i]);
      }
      break;
    case HeadKind::kLogReg:
    case HeadKind::kSoftMax:
    case HeadKind::kSvm:
      w.u32(static_cast<std::uint32_t>(h.linear.rows));
      w.u32(static_cast<std::uint32_t>(h.linear.cols));
      w.f64_array(h.linear.weights);
      w.f64_array(h.linear.bias);
      break;
    case HeadKind::kAdaBoost:
      w.u32(static_cast<std::uint32_t>(h.adaboost.stumps.size()));
      for (std::size_t t = 0; t < h.adaboost.stumps.size(); ++t) {
        const auto& s = h.adaboost.stumps[t];
        w.u32(s.feature);
        w.f64(s.threshold);
        w.u32(s.below);
        w.u32(s.above);
        w.f64(h.adaboost.alphas[t]);
      }
      break;
    case HeadKind::kNaiveBayes:
      w.f64_array(h.nb.log_priors);
      w.f64_array(h.nb.means);
      w.f64_array(h.nb.variances);
      w.f64(h.nb.var_floor);
      break;
  }
  return detail::seal(kHeadMagic, w.buffer());
}

namespace detail {

inline void check_head(const TrainedHead& h) {
  auto bad = [](const std::string& why) { fail(ErrorCode::kFormat, "head file: " + why); };
  const std::size_t C = h.class_names.size(), D = h.dim;
  if (C < 2) bad("fewer than two classes");
  for (double s : h.standardizer.std) {
    if (!(s > 0.0) || !std::isfinite(s)) bad("standardizer std must be positive");
  }
  switch (h.kind) {
    case HeadKind::kKnn:
      if (h.knn.k < 1) bad("k must be >= 1");
      for (auto l : h.knn.labels) {
        if (l >= C) bad("neighbour label out of range");
      }
      break;
    case HeadKind::kLogReg:
    case HeadKind::kSoftMax:
    case HeadKind::kSvm:
      if (h.linear.rows != C || h.linear.cols != D) bad("weight matrix shape");
      break;
    case HeadKind::kAdaBoost:
      for (std::size_t t = 0; t < h.adaboost.stumps.size(); ++t) {
        const auto& s = h.adaboost.stumps[t];
        if (s.feature >= D || s.below >= C || s.above >= C) bad("stump out of range");
        if (!std::isfinite(h.adaboost.alphas[t])) bad("non-finite stage weight");
      }
      break;
    case HeadKind::kNaiveBayes:
      for (double v : h.nb.variances) {
        if (!(v >= h.nb.var_floor) || !(v > 0.0)) bad("variance below floor");
      }
      break;
  }
}

}  // namespace detail

inline TrainedHead deserialize_head(std::span<const std::uint8_t> file) {
  const auto sealed = detail::unseal(kHeadMagic, file);
  detail::ByteReader r(sealed.payload);
  const auto version = r.u32();
  if (version != kHeadVersion) {
    fail(ErrorCode::kVersion, "head file version " + std::to_string(version) + ", expected " +
                                  std::to_string(kHeadVersion));
  }
  TrainedHead h;
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(HeadKind::kNaiveBayes)) {
    fail(ErrorCode::kFormat, "unknown head kind tag " + std::to_string(kind));
  }
  h.kind = static_cast<HeadKind>(kind);
  const auto C = r.u32();
  for (std::uint32_t c = 0; c < C; ++c) h.class_names.push_back(r.short_string());
  h.dim = r.u32();
  const std::size_t D = h.dim;
  h.config.kind = h.kind;
  h.config.seed = r.u64();
  h.config.k = r.u32();
  h.config.lambda = r.f64();
  h.config.learning_rate = r.f64();
  h.config.epochs = r.u32();
  h.config.rounds = r.u32();
  h.config.var_floor = r.f64();
  if (D > r.remaining() / 16) fail(ErrorCode::kTruncated, "head file too short for standardizer");
  h.standardizer.mean.resize(D);
  h.standardizer.std.resize(D);
  for (std::size_t j = 0; j < D; ++j) {
    h.standardizer.mean[j] = r.f64();
    h.standardizer.std[j] = r.f64();
  }
  const auto nwarn = r.u32();
  for (std::uint32_t i = 0; i < nwarn; ++i) h.warnings.push_back(r.short_string());

  auto sized = [&](std::uint64_t count, std::size_t unit) {
    if (unit != 0 && count > r.remaining() / unit) {
      fail(ErrorCode::kTruncated, "head file too short for its parameter block");
    }
    return static_cast<std::size_t>(count);
  };
  switch (h.kind) {
    case HeadKind::kKnn: {
      h.knn.k = r.u32();
      h.knn.metric = r.u8();
      const auto N = sized(r.u64(), 4 + 4 * D);
      h.knn.labels.resize(N);
      h.knn.points.assign(N, std::vector<float>(D));
      for (std::size_t i = 0; i < N; ++i) {
        h.knn.labels[i] = r.u32();
        r.f32_array(h.knn.points[i]);
      }
      break;
    }
    case HeadKind::kLogReg:
    case HeadKind::kSoftMax:
    case HeadKind::kSvm: {
      h.linear.rows = r.u32();
      h.linear.cols = r.u32();
      h.linear.weights.resize(sized(std::uint64_t{h.linear.rows} * h.linear.cols, 8));
      r.f64_array(h.linear.weights);
      h.linear.bias.resize(sized(h.linear.rows, 8));
      r.f64_array(h.linear.bias);
      break;
    }
    case HeadKind::kAdaBoost: {
      const auto T = sized(r.u32(), 28);
      h.adaboost.stumps.resize(T);
      h.adaboost.alphas.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        auto& s = h.adaboost.stumps[t];
        s.feature = r.u32();
        s.threshold = r.f64();
        s.below = r.u32();
        s.above = r.u32();
        h.adaboost.alphas[t] = r.f64();
      }
      break;
    }
    case HeadKind::kNaiveBayes:
      h.nb.log_priors.resize(sized(C, 8));
      r.f64_array(h.nb.log_priors);
      h.nb.means.resize(sized(std::uint64_t{C} * D, 8));
      r.f64_array(h.nb.means);
      h.nb.variances.resize(sized(std::uint64_t{C} * D, 8));
      r.f64_array(h.nb.variances);
      h.nb.var_floor = r.f64();
      break;
  }
  if (r.remaining() != 0) fail(ErrorCode::kFormat, "trailing bytes after head parameters");
  detail::verify_crc(sealed);
  detail::check_head(h);
  return h;
}

inline void save_head(const TrainedHead& head, const std::string& path) {
  detail::write_file(path, serialize_head(head));
}

inline TrainedHead load_head(const std::string& path) {
  return deserialize_head(detail::read_file(path));
}

}  // namespace fusionpool
