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

// Gaussian naive Bayes on standardized features.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "fusionpool/heads/linear.hpp"
#include "fusionpool/heads/types.hpp"

namespace fusionpool::heads {

inline NaiveBayesParams train_naive_bayes(const Design& data, const HeadConfig& cfg) {
  const std::size_t C = data.classes, D = data.d;
  NaiveBayesParams p;
  p.log_priors.assign(C, 0.0);
  p.means.assign(C * D, 0.0);
  p.variances.assign(C * D, 0.0);

  std::vector<double> counts(C, 0.0);
  for (std::size_t i = 0; i < data.n; ++i) {
    const auto c = data.y[i];
    counts[c] += 1.0;
    for (std::size_t j = 0; j < D; ++j) p.means[c * D + j] += data.z[i * D + j];
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t j = 0; j < D; ++j) p.means[c * D + j] /= counts[c];
  }
  for (std::size_t i = 0; i < data.n; ++i) {
    const auto c = data.y[i];
    for (std::size_t j = 0; j < D; ++j) {
      const double d = data.z[i * D + j] - p.means[c * D + j];
      p.variances[c * D + j] += d * d;
    }
  }

  // Largest whole-pool variance of any dimension.
  double max_var = 0.0;
  for (std::size_t j = 0; j < D; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) m += data.z[i * D + j];
    m /= static_cast<double>(data.n);
    for (std::size_t i = 0; i < data.n; ++i) {
      const double d = data.z[i * D + j] - m;
      v += d * d;
    }
    max_var = std::max(max_var, v / static_cast<double>(data.n));
  }
  if (!(max_var > 0.0)) fail(ErrorCode::kDegenerate, "every feature dimension has zero variance");
  p.var_floor = cfg.var_floor * max_var;

  for (std::size_t c = 0; c < C; ++c) {
    p.log_priors[c] = std::log(counts[c] / static_cast<double>(data.n));
    for (std::size_t j = 0; j < D; ++j) {
      double& v = p.variances[c * D + j];
      v /= counts[c];
      if (!(v > 0.0) && !(p.var_floor > 0.0)) {
        fail(ErrorCode::kDegenerate, "class " + std::to_string(c) + " has zero variance in dimension " +
                                         std::to_string(j) + " and no variance floor is set");
      }
      v = std::max(v, p.var_floor);
    }
  }
  return p;
}

// Posterior class probabilities.
inline std::vector<double> naive_bayes_scores(const NaiveBayesParams& p, std::span<const double> z) {
  const std::size_t C = p.log_priors.size(), D = z.size();
  std::vector<double> s(C);
  for (std::size_t c = 0; c < C; ++c) {
    double lj = p.log_priors[c];
    for (std::size_t j = 0; j < D; ++j) {
      const double v = p.variances[c * D + j];
      const double d = z[j] - p.means[c * D + j];
      lj -= 0.5 * (std::log(2.0 * std::numbers::pi * v) + d * d / v);
    }
    s[c] = lj;
  }
  softmax_inplace(s);
  return s;
}

}  // namespace fusionpool::heads
