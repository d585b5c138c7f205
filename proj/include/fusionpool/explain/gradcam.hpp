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

// Class activation maps for linear heads over pooled backbone features.
//
// A linear class score s_c = Σ_j w_cj · (x_j - mean_j) / std_j + b_c depends
// on each map cell through the pooled mean, so every cell of map k carries
// the same gradient w_ck / (std_k · h · w). Averaging that gradient over the
// grid gives the map importance analytically.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusionpool/error.hpp"
#include "fusionpool/extraction.hpp"
#include "fusionpool/fusion_pool.hpp"
#include "fusionpool/heads.hpp"

namespace fusionpool {

struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<double> grid;  // row-major, >= 0, max 1 unless all zero
  std::uint32_t class_index = 0;
  std::uint64_t source_id = 0;
  std::string backbone;

  double at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }
};

inline void require_linear_head(const TrainedHead& head) {
  if (!is_linear(head.kind)) {
    fail(ErrorCode::kUnsupportedHead,
         "class activation maps need a LogReg, SoftMax or SVM head, not " +
             std::string(head_kind_name(head.kind)));
  }
}

// Class-c weights over the full fused vector, in raw feature units. For the
// reference-class softmax the row is centred across classes so every class,
// including the reference, gets its own direction.
inline std::vector<double> class_weights(const TrainedHead& head, std::uint32_t c) {
  require_linear_head(head);
  if (c >= head.class_count()) fail(ErrorCode::kInvalidArgument, "class index out of range");
  const auto& p = head.linear;
  const auto model = heads::linear_model_for(head.kind, head.class_count());
  std::vector<double> w(p.cols);
  for (std::size_t j = 0; j < p.cols; ++j) {
    double v = p.weights[c * p.cols + j];
    if (model == heads::LinearModel::kReferenceSoftmax) {
      double mean = 0.0;
      for (std::size_t r = 0; r < p.rows; ++r) mean += p.weights[r * p.cols + j];
      v -= mean / static_cast<double>(p.rows);
    }
    w[j] = v / head.standardizer.std[j];
  }
  return w;
}

// The score the maps explain: the linear class score (centred logit for the
// reference-class softmax, margin or logit otherwise).
template <typename T>
double class_score(const TrainedHead& head, std::span<const T> x, std::uint32_t c) {
  require_linear_head(head);
  detail::check_dim(head, x.size());
  const auto& p = head.linear;
  const auto model = heads::linear_model_for(head.kind, head.class_count());
  std::vector<double> z(head.dim), logits(p.rows);
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = (static_cast<double>(x[j]) - head.standardizer.mean[j]) / head.standardizer.std[j];
  }
  heads::linear_logits(p, z, logits);
  if (model != heads::LinearModel::kReferenceSoftmax) return logits[c];
  double mean = 0.0;
  for (double v : logits) mean += v;
  return logits[c] - mean / static_cast<double>(p.rows);
}

// Weighted, rectified sum of one backbone's maps for class c, scaled so the
// largest cell is 1.
inline Heatmap grad_cam(const FeatureMaps& maps, const TrainedHead& head, std::uint32_t c,
                        const Schema& schema, std::string_view backbone) {
  require_linear_head(head);
  const auto offset = schema_offset(schema, backbone);
  std::size_t dim = 0;
  for (const auto& e : schema) {
    if (e.backbone == backbone) dim = e.dim;
  }
  if (static_cast<std::size_t>(maps.map_count) != dim) {
    fail(ErrorCode::kDimensionMismatch, "backbone '" + std::string(backbone) + "' has " +
                                            std::to_string(dim) + " features but the maps have " +
                                            std::to_string(maps.map_count));
  }
  if (schema_dim(schema) != head.dim) {
    fail(ErrorCode::kSchemaMismatch, "schema dimension does not match the head");
  }
  const auto w = class_weights(head, c);

  Heatmap h;
  h.height = maps.map_height;
  h.width = maps.map_width;
  h.class_index = c;
  h.source_id = maps.source_id;
  h.backbone = std::string(backbone);
  const std::size_t cells = static_cast<std::size_t>(h.height) * h.width;
  h.grid.assign(cells, 0.0);
  for (int k = 0; k < maps.map_count; ++k) {
    const double wk = w[offset + k];
    if (wk == 0.0) continue;
    const auto a = maps.map(k);
    for (std::size_t i = 0; i < cells; ++i) h.grid[i] += wk * a[i];
  }
  double peak = 0.0;
  for (auto& v : h.grid) {
    v = std::max(v, 0.0);
    peak = std::max(peak, v);
  }
  if (peak > 0.0) {
    for (auto& v : h.grid) v /= peak;
  }
  return h;
}

}  // namespace fusionpool
