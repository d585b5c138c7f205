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

// Multiclass AdaBoost (SAMME) over depth-1 decision stumps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fusionpool/heads/linear.hpp"
#include "fusionpool/heads/types.hpp"

namespace fusionpool::heads {

inline constexpr double kMinStageError = 1e-10;

inline std::uint32_t argmax_low(std::span<const double> v) {
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < v.size(); ++c) {
    if (v[c] > v[best]) best = c;
  }
  return best;
}

// Stump with the smallest weighted error. Candidate thresholds are midpoints
// between consecutive distinct values of each feature, plus one constant stump
// per feature; each side votes its weighted-majority class.
inline Stump best_stump(const Design& data, std::span<const double> w,
                        const std::vector<std::vector<std::uint32_t>>& order) {
  const std::size_t C = data.classes;
  std::vector<double> total(C, 0.0);
  for (std::size_t i = 0; i < data.n; ++i) total[data.y[i]] += w[i];
  const double wsum = std::accumulate(total.begin(), total.end(), 0.0);

  Stump best;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<double> left(C), right(C);
  for (std::uint32_t j = 0; j < data.d; ++j) {
    const auto& ord = order[j];
    std::fill(left.begin(), left.end(), 0.0);
    for (std::size_t p = 1; p <= data.n; ++p) {
      const auto i = ord[p - 1];
      left[data.y[i]] += w[i];
      const double v = data.z[i * data.d + j];
      const bool last = p == data.n;
      if (!last && data.z[ord[p] * data.d + j] == v) continue;
      for (std::size_t c = 0; c < C; ++c) right[c] = total[c] - left[c];
      const auto lc = argmax_low(left);
      const auto rc = last ? lc : argmax_low(right);
      const double err = last ? wsum - left[lc] : wsum - left[lc] - right[rc];
      if (err < best_err) {
        best_err = err;
        best.feature = j;
        best.threshold = last ? v : 0.5 * (v + data.z[ord[p] * data.d + j]);
        best.below = lc;
        best.above = rc;
      }
    }
  }
  return best;
}

inline AdaBoostParams train_adaboost(const Design& data, const HeadConfig& cfg,
                                     TrainingDiagnostics& diag, std::vector<std::string>& warnings) {
  const std::size_t C = data.classes;
  AdaBoostParams params;
  diag.stage_errors.clear();
  if (data.n == 0) return params;

  std::vector<std::vector<std::uint32_t>> order(data.d);
  for (std::size_t j = 0; j < data.d; ++j) {
    auto& ord = order[j];
    ord.resize(data.n);
    std::iota(ord.begin(), ord.end(), 0u);
    std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
      return data.z[a * data.d + j] < data.z[b * data.d + j];
    });
  }

  std::vector<double> w(data.n, 1.0 / static_cast<double>(data.n));
  const double chance = 1.0 - 1.0 / static_cast<double>(C);
  for (std::uint32_t t = 0; t < cfg.rounds; ++t) {
    const Stump s = best_stump(data, w, order);
    double err = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
      wsum += w[i];
      if (s.vote(data.row(i)) != data.y[i]) err += w[i];
    }
    const double eps = err / wsum;
    if (eps >= chance) {
      if (params.stumps.empty()) {
        warnings.push_back("no stump beats chance; the ensemble is empty");
      }
      break;
    }
    const double e = std::max(eps, kMinStageError);
    const double alpha = std::log((1.0 - e) / e) + std::log(static_cast<double>(C - 1));
    params.stumps.push_back(s);
    params.alphas.push_back(alpha);
    diag.stage_errors.push_back(eps);
    if (eps <= 0.0) break;

    const double up = std::exp(alpha);
    double norm = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
      if (s.vote(data.row(i)) != data.y[i]) w[i] *= up;
      norm += w[i];
    }
    for (auto& v : w) v /= norm;
  }
  return params;
}

// Stage-weighted vote shares; uniform when the ensemble is empty.
inline std::vector<double> adaboost_scores(const AdaBoostParams& p, std::size_t classes,
                                           std::span<const double> z) {
  std::vector<double> s(classes, 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < p.stumps.size(); ++t) {
    s[p.stumps[t].vote(z)] += p.alphas[t];
    total += p.alphas[t];
  }
  if (total > 0.0) {
    for (auto& v : s) v /= total;
  } else {
    std::fill(s.begin(), s.end(), 1.0 / static_cast<double>(classes));
  }
  return s;
}

}  // namespace fusionpool::heads
