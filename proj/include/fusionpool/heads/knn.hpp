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

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fusionpool/heads/types.hpp"

namespace fusionpool::heads {

// Squared Euclidean distance in standardized units: Σ ((q_j - p_j) / std_j)².
inline double knn_distance(std::span<const float> q, std::span<const float> p,
                           const Standardizer& s) {
  double d = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double t = (static_cast<double>(q[j]) - static_cast<double>(p[j])) / s.std[j];
    d += t * t;
  }
  return d;
}

// Indices of the k nearest stored points, nearest first; equal distances keep
// the lower training index first.
inline std::vector<std::size_t> knn_neighbours(const KnnParams& p, const Standardizer& s,
                                               std::span<const float> q) {
  std::vector<std::pair<double, std::size_t>> d(p.points.size());
  for (std::size_t i = 0; i < p.points.size(); ++i) d[i] = {knn_distance(q, p.points[i], s), i};
  const std::size_t k = std::min<std::size_t>(p.k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

// Vote fractions over min(k, N) neighbours.
inline std::vector<double> knn_scores(const KnnParams& p, const Standardizer& s,
                                      std::size_t classes, std::span<const float> q) {
  std::vector<double> votes(classes, 0.0);
  const auto nn = knn_neighbours(p, s, q);
  for (auto i : nn) votes[p.labels[i]] += 1.0;
  if (!nn.empty()) {
    for (auto& v : votes) v /= static_cast<double>(nn.size());
  }
  return votes;
}

}  // namespace fusionpool::heads
