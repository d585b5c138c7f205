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

// Parameter types shared by the six classifier heads.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionpool/error.hpp"

namespace fusionpool {

enum class HeadKind : std::uint8_t {
  kKnn = 0,
  kLogReg = 1,
  kSoftMax = 2,
  kSvm = 3,
  kAdaBoost = 4,
  kNaiveBayes = 5,
};

inline std::string_view head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::kKnn: return "knn";
    case HeadKind::kLogReg: return "logreg";
    case HeadKind::kSoftMax: return "softmax";
    case HeadKind::kSvm: return "svm";
    case HeadKind::kAdaBoost: return "adaboost";
    case HeadKind::kNaiveBayes: return "nb";
  }
  return "?";
}

inline HeadKind parse_head_kind(std::string_view name) {
  for (auto k : {HeadKind::kKnn, HeadKind::kLogReg, HeadKind::kSoftMax, HeadKind::kSvm,
                 HeadKind::kAdaBoost, HeadKind::kNaiveBayes}) {
    if (head_kind_name(k) == name) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown head kind '" + std::string(name) + "'");
}

inline bool is_linear(HeadKind k) {
  return k == HeadKind::kLogReg || k == HeadKind::kSoftMax || k == HeadKind::kSvm;
}

struct HeadConfig {
  HeadKind kind = HeadKind::kKnn;
  std::uint32_t k = 5;             // KNN neighbours
  double lambda = 1e-4;            // L2 strength (LogReg, SoftMax, SVM)
  double learning_rate = 0.1;      // full-batch gradient descent step
  std::uint32_t epochs = 500;
  std::uint32_t rounds = 100;      // AdaBoost stages
  double var_floor = 1e-9;         // NB floor, relative to the largest feature variance
  std::uint64_t seed = 0;
  int jobs = 1;                    // worker threads; never changes results

  void validate() const {
    auto bad = [](const std::string& why) { fail(ErrorCode::kInvalidArgument, why); };
    if (k < 1) bad("k must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad("lambda must be finite and >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning rate must be > 0");
    if (epochs < 1) bad("epochs must be >= 1");
    if (rounds < 1) bad("rounds must be >= 1");
    if (!(var_floor >= 0.0) || !std::isfinite(var_floor)) bad("variance floor must be >= 0");
    if (jobs < 1) bad("jobs must be >= 1");
  }
};

// Per-dimension affine map fitted on the training pool.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dim() const { return mean.size(); }

  template <typename Rows>
  static Standardizer fit(const Rows& rows, std::size_t dim) {
    Standardizer s;
    s.mean.assign(dim, 0.0);
    s.std.assign(dim, 0.0);
    const double n = static_cast<double>(rows.size());
    if (rows.empty()) {
      s.std.assign(dim, 1.0);
      return s;
    }
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < dim; ++j) s.mean[j] += r[j];
    }
    for (auto& m : s.mean) m /= n;
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = r[j] - s.mean[j];
        s.std[j] += d * d;
      }
    }
    for (auto& v : s.std) {
      v = std::sqrt(v / n);
      if (!(v > 0.0) || !std::isfinite(v)) v = 1.0;  // constant dimension
    }
    return s;
  }

  static Standardizer identity(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  }

  void apply(std::span<const float> x, std::span<double> out) const {
    for (std::size_t j = 0; j < mean.size(); ++j) out[j] = (x[j] - mean[j]) / std[j];
  }

  bool operator==(const Standardizer&) const = default;
};

struct KnnParams {
  std::uint32_t k = 5;
  std::uint8_t metric = 0;  // 0 = Euclidean
  std::vector<std::uint32_t> labels;
  std::vector<std::vector<float>> points;  // raw (unstandardized) training features

  bool operator==(const KnnParams&) const = default;
};

// Rows are classes. SoftMax (and LogReg with two classes) use class 0 as the
// reference: its row and bias stay zero. LogReg with three or more classes is
// one-vs-rest, one row per class. SVM is one-vs-rest on margins.
struct LinearParams {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;  // rows × cols
  std::vector<double> bias;     // rows

  std::span<const double> row(std::size_t c) const { return {weights.data() + c * cols, cols}; }
  bool operator==(const LinearParams&) const = default;
};

// Depth-1 tree: x[feature] <= threshold votes `below`, otherwise `above`.
struct Stump {
  std::uint32_t feature = 0;
  double threshold = 0.0;
  std::uint32_t below = 0;
  std::uint32_t above = 0;

  std::uint32_t vote(std::span<const double> z) const {
    return z[feature] <= threshold ? below : above;
  }
  bool operator==(const Stump&) const = default;
};

struct AdaBoostParams {
  std::vector<Stump> stumps;
  std::vector<double> alphas;

  bool operator==(const AdaBoostParams&) const = default;
};

struct NaiveBayesParams {
  std::vector<double> log_priors;  // classes
  std::vector<double> means;       // classes × dim
  std::vector<double> variances;   // classes × dim, floored
  double var_floor = 0.0;

  bool operator==(const NaiveBayesParams&) const = default;
};

// Training trace kept in memory only.
struct TrainingDiagnostics {
  std::vector<double> loss_history;  // loss before each epoch's update, then the final loss
  std::vector<double> stage_errors;  // AdaBoost weighted error per stage
};

struct TrainedHead {
  HeadKind kind = HeadKind::kKnn;
  std::vector<std::string> class_names;
  std::uint32_t dim = 0;
  HeadConfig config;
  Standardizer standardizer;
  std::vector<std::string> warnings;

  KnnParams knn;
  LinearParams linear;
  AdaBoostParams adaboost;
  NaiveBayesParams nb;

  TrainingDiagnostics diagnostics;

  std::size_t class_count() const { return class_names.size(); }
};

}  // namespace fusionpool
