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

#include <cstdint>
#include <string>
#include <string_view>

#include "fusionpool/error.hpp"

namespace fusionpool {

enum class Normalization : std::uint8_t {
  kScalePm1 = 0,          // x / 127.5 - 1
  kImagenetStandard = 1,  // (x / 255 - mean_c) / std_c
};

inline std::string_view normalization_name(Normalization n) {
  return n == Normalization::kScalePm1 ? "scale_pm1" : "imagenet_standard";
}

inline Normalization parse_normalization(std::string_view name) {
  if (name == "scale_pm1") return Normalization::kScalePm1;
  if (name == "imagenet_standard") return Normalization::kImagenetStandard;
  fail(ErrorCode::kInvalidArgument, "unknown normalization '" + std::string(name) + "'");
}

// Declared shape of one frozen backbone. The pooled vector is the GAP of the
// final-stage maps, so feature_dim always equals map_count.
struct BackboneSpec {
  std::string name;
  int input_size = 224;
  int feature_dim = 0;
  int map_count = 0;
  int map_height = 0;
  int map_width = 0;
  Normalization normalization = Normalization::kScalePm1;
  // Either a model-graph path or "synthetic:<seed>".
  std::string source;

  void validate() const {
    if (name.empty()) fail(ErrorCode::kInvalidArgument, "backbone name is empty");
    if (input_size <= 0 || map_height <= 0 || map_width <= 0 || map_count <= 0) {
      fail(ErrorCode::kInvalidArgument,
           "backbone '" + name + "': input size and map dims must be positive");
    }
    if (feature_dim != map_count) {
      fail(ErrorCode::kDimensionMismatch,
           "backbone '" + name + "': feature_dim " + std::to_string(feature_dim) +
               " != map_count " + std::to_string(map_count));
    }
  }

  bool is_synthetic() const { return source.rfind("synthetic:", 0) == 0; }
};

}  // namespace fusionpool
