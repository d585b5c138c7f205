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

// Frozen backbones as feature extractors. Each extract call yields the final
// convolutional stage (K maps of h × w) and its global average pool.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusionpool/backbone_spec.hpp"
#include "fusionpool/detail/binary_io.hpp"
#include "fusionpool/detail/parallel.hpp"
#include "fusionpool/error.hpp"
#include "fusionpool/ingest.hpp"
#include "fusionpool/onnx/runtime.hpp"

namespace fusionpool {

struct FeatureMaps {
  int map_count = 0;
  int map_height = 0;
  int map_width = 0;
  std::vector<float> maps;    // map_count × map_height × map_width
  std::vector<float> pooled;  // map_count
  std::uint64_t source_id = 0;

  std::span<const float> map(int k) const {
    const auto cells = static_cast<std::size_t>(map_height) * map_width;
    return {maps.data() + k * cells, cells};
  }
  bool operator==(const FeatureMaps&) const = default;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1) from a 64-bit key.
inline double unit_from(std::uint64_t key) {
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-52 - 1.0;
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

inline void fill_pooled(FeatureMaps& fm) {
  const auto cells = static_cast<std::size_t>(fm.map_height) * fm.map_width;
  fm.pooled.assign(fm.map_count, 0.0f);
  for (int k = 0; k < fm.map_count; ++k) {
    double s = 0.0;
    for (std::size_t c = 0; c < cells; ++c) s += fm.maps[k * cells + c];
    fm.pooled[k] = static_cast<float>(s / static_cast<double>(cells));
  }
}

inline void check_finite(const FeatureMaps& fm, const std::string& backbone) {
  for (float v : fm.maps) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::kNonFinite, "backbone '" + backbone + "' produced a non-finite activation");
    }
  }
}

}  // namespace detail

// Deterministic stand-in for a CNN backbone. Each map cell is a squashed
// random linear response to the mean colour of the frame region under it,
// plus a small term keyed on a hash of (seed, frame bytes, map, cell); maps
// are then box-smoothed. The response weights depend on the seed only, so a
// seed behaves like a fixed network.
inline FeatureMaps synthetic_extract(std::uint64_t seed, const FrameTensor& frame, int map_count,
                                     int map_height, int map_width) {
  if (map_count <= 0 || map_height <= 0 || map_width <= 0) {
    fail(ErrorCode::kInvalidArgument, "synthetic extractor needs positive dims");
  }
  detail::Fnv1a64 h;
  h.update_pod(seed);
  h.update({reinterpret_cast<const std::uint8_t*>(frame.values.data()),
            frame.values.size() * sizeof(float)});
  h.update_pod(frame.height).update_pod(frame.width).update_pod(frame.channels);
  const std::uint64_t digest = h.digest();

  const int channels = std::max(frame.channels, 1);
  const auto cells = static_cast<std::size_t>(map_height) * map_width;
  // Region means per cell and channel.
  std::vector<double> region(cells * channels, 0.0);
  for (int i = 0; i < map_height; ++i) {
    const int y0 = i * frame.height / map_height;
    const int y1 = std::max(y0 + 1, (i + 1) * frame.height / map_height);
    for (int j = 0; j < map_width; ++j) {
      const int x0 = j * frame.width / map_width;
      const int x1 = std::max(x0 + 1, (j + 1) * frame.width / map_width);
      for (int c = 0; c < frame.channels; ++c) {
        double s = 0.0;
        int n = 0;
        for (int y = y0; y < std::min(y1, frame.height); ++y) {
          for (int x = x0; x < std::min(x1, frame.width); ++x) {
            s += frame.at(y, x, c);
            ++n;
          }
        }
        region[(i * map_width + j) * channels + c] = n > 0 ? s / n : 0.0;
      }
    }
  }

  FeatureMaps fm;
  fm.map_count = map_count;
  fm.map_height = map_height;
  fm.map_width = map_width;
  fm.source_id = frame.source_id;
  fm.maps.resize(cells * map_count);
  std::vector<double> raw(cells);
  for (int k = 0; k < map_count; ++k) {
    const std::uint64_t map_key = detail::mix(seed, static_cast<std::uint64_t>(k));
    const double bias = 0.5 * detail::unit_from(detail::mix(map_key, 0xb1a5ull));
    for (std::size_t cell = 0; cell < cells; ++cell) {
      double z = bias;
      for (int c = 0; c < frame.channels; ++c) {
        z += 2.0 * detail::unit_from(detail::mix(map_key, 0x100ull + c)) *
             region[cell * channels + c];
      }
      z += 0.05 * detail::unit_from(detail::mix(detail::mix(digest, k), cell));
      raw[cell] = std::tanh(z);
    }
    // 3×3 box smoothing over in-bounds neighbours.
    for (int i = 0; i < map_height; ++i) {
      for (int j = 0; j < map_width; ++j) {
        double s = 0.0;
        int n = 0;
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            const int y = i + di, x = j + dj;
            if (y < 0 || y >= map_height || x < 0 || x >= map_width) continue;
            s += raw[static_cast<std::size_t>(y) * map_width + x];
            ++n;
          }
        }
        fm.maps[k * cells + static_cast<std::size_t>(i) * map_width + j] =
            static_cast<float>(s / n);
      }
    }
  }
  detail::fill_pooled(fm);
  return fm;
}

inline std::uint64_t parse_synthetic_seed(const std::string& source) {
  const std::string digits = source.substr(std::string("synthetic:").size());
  std::uint64_t seed = 0;
  if (!detail::parse_int(std::string_view(digits), seed)) {
    fail(ErrorCode::kInvalidArgument, "bad synthetic source '" + source + "'");
  }
  return seed;
}

// Model paths that do not exist as given are looked up under
// $FUSIONPOOL_MODEL_DIR.
inline std::string resolve_model_path(const std::string& source) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(source, ec)) return source;
  if (const char* dir = std::getenv("FUSIONPOOL_MODEL_DIR"); dir && *dir) {
    const auto candidate = fs::path(dir) / source;
    if (fs::exists(candidate, ec)) return candidate.string();
  }
  fail(ErrorCode::kIo, "model file '" + source + "' not found");
}

// Reads the key=value sidecar written next to exported graphs
// (input_size, K, h, w, normalization).
inline BackboneSpec read_backbone_meta(const std::string& meta_path, const std::string& name,
                                       const std::string& source) {
  std::ifstream in(meta_path);
  if (!in) fail(ErrorCode::kIo, "metadata sidecar '" + meta_path + "' not found");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kFormat, meta_path + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get_int = [&](const char* key) {
    int v = 0;
    auto it = kv.find(key);
    if (it == kv.end() || !detail::parse_int(std::string_view(it->second), v)) {
      fail(ErrorCode::kFormat, meta_path + ": missing or bad '" + key + "'");
    }
    return v;
  };
  BackboneSpec spec;
  spec.name = name;
  spec.source = source;
  spec.input_size = get_int("input_size");
  spec.map_count = get_int("K");
  spec.feature_dim = spec.map_count;
  spec.map_height = get_int("h");
  spec.map_width = get_int("w");
  if (auto it = kv.find("normalization"); it != kv.end()) {
    spec.normalization = parse_normalization(it->second);
  }
  return spec;
}

class Extractor;
inline Extractor load_backbone(const BackboneSpec& spec);

// Immutable after load; extract may be called concurrently.
class Extractor {
 public:
  const BackboneSpec& spec() const { return spec_; }
  int feature_dim() const { return spec_.feature_dim; }

  FeatureMaps extract_one(const FrameTensor& frame) const {
    if (frame.height != spec_.input_size || frame.width != spec_.input_size ||
        frame.channels != 3) {
      fail(ErrorCode::kDimensionMismatch,
           "frame " + std::to_string(frame.height) + "x" + std::to_string(frame.width) + "x" +
               std::to_string(frame.channels) + " does not match backbone '" + spec_.name +
               "' input " + std::to_string(spec_.input_size));
    }
    FeatureMaps fm;
    if (graph_) {
      fm = run_graph(frame);
    } else {
      fm = synthetic_extract(seed_, frame, spec_.map_count, spec_.map_height, spec_.map_width);
    }
    detail::check_finite(fm, spec_.name);
    return fm;
  }

  // Order-preserving; `jobs` > 1 spreads frames over worker threads.
  std::vector<FeatureMaps> extract(std::span<const FrameTensor> frames, int jobs = 1) const {
    return detail::parallel_map<FeatureMaps>(
        frames.size(), jobs, [&](std::size_t i) { return extract_one(frames[i]); });
  }

 private:
  friend Extractor load_backbone(const BackboneSpec& spec);

  FeatureMaps run_graph(const FrameTensor& frame) const {
    const int S = spec_.input_size;
    std::vector<float> chw(static_cast<std::size_t>(3) * S * S);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
          chw[(static_cast<std::size_t>(c) * S + y) * S + x] = frame.at(y, x, c);
        }
      }
    }
    std::unordered_map<std::string, onnx::Tensor> feeds;
    feeds.emplace(input_name_, onnx::Tensor::floats({1, 3, S, S}, std::move(chw)));
    auto outputs = graph_->run(std::move(feeds));
    const auto& maps = outputs.at(maps_name_);
    const auto& pooled = outputs.at(pooled_name_);
    const std::vector<std::int64_t> want_maps{1, spec_.map_count, spec_.map_height,
                                              spec_.map_width};
    if (maps.shape != want_maps || maps.integer) {
      fail(ErrorCode::kDimensionMismatch,
           "backbone '" + spec_.name + "' emitted feature maps of unexpected shape");
    }
    if (pooled.numel() != spec_.map_count || pooled.integer) {
      fail(ErrorCode::kDimensionMismatch, "backbone '" + spec_.name + "' emitted " +
                                              std::to_string(pooled.numel()) +
                                              " pooled values, spec declares " +
                                              std::to_string(spec_.map_count));
    }
    FeatureMaps fm;
    fm.map_count = spec_.map_count;
    fm.map_height = spec_.map_height;
    fm.map_width = spec_.map_width;
    fm.maps = maps.data;
    fm.source_id = frame.source_id;
    detail::check_finite(fm, spec_.name);
    detail::fill_pooled(fm);
    for (int k = 0; k < fm.map_count; ++k) {
      const double own = fm.pooled[k];
      const double graph = pooled.data[k];
      if (!std::isfinite(graph)) {
        fail(ErrorCode::kNonFinite, "backbone '" + spec_.name + "' produced a non-finite pooled value");
      }
      if (std::abs(own - graph) > 1e-4 * (1.0 + std::abs(own))) {
        fail(ErrorCode::kFormat, "backbone '" + spec_.name +
                                     "': pooled output is not the global average of its maps");
      }
    }
    return fm;
  }

  BackboneSpec spec_;
  std::uint64_t seed_ = 0;
  std::shared_ptr<const onnx::Graph> graph_;
  std::string input_name_, maps_name_, pooled_name_;
};

namespace detail {

struct GraphSignature {
  std::string input, maps, pooled;
  std::vector<std::int64_t> input_shape, maps_shape, pooled_shape;
};

// The contract: one NCHW float input; outputs (N,K,h,w) and (N,K).
inline GraphSignature graph_signature(const onnx::Graph& g, const std::string& who) {
  const auto inputs = g.runtime_inputs();
  if (inputs.size() != 1) {
    fail(ErrorCode::kFormat, who + ": graph must have exactly one input, has " +
                                 std::to_string(inputs.size()));
  }
  GraphSignature sig;
  sig.input = inputs[0].name;
  sig.input_shape = inputs[0].shape;
  if (inputs[0].has_shape && inputs[0].shape.size() != 4) {
    fail(ErrorCode::kFormat, who + ": graph input must be (N,3,H,W)");
  }
  const auto& outs = g.outputs();
  if (outs.size() != 2) {
    fail(ErrorCode::kFormat, who + ": graph must declare two outputs (maps, pooled), has " +
                                 std::to_string(outs.size()));
  }
  int maps_index = 0;
  if (outs[0].has_shape && outs[1].has_shape) {
    if (outs[0].shape.size() == 2 && outs[1].shape.size() == 4) maps_index = 1;
  }
  sig.maps = outs[maps_index].name;
  sig.pooled = outs[1 - maps_index].name;
  sig.maps_shape = outs[maps_index].shape;
  sig.pooled_shape = outs[1 - maps_index].shape;
  return sig;
}

inline bool known(const std::vector<std::int64_t>& shape, std::size_t i) {
  return i < shape.size() && shape[i] > 0;
}

}  // namespace detail

inline Extractor load_backbone(const BackboneSpec& spec) {
  spec.validate();
  Extractor ex;
  ex.spec_ = spec;
  if (spec.is_synthetic()) {
    ex.seed_ = parse_synthetic_seed(spec.source);
    return ex;
  }
  const auto path = resolve_model_path(spec.source);
  auto graph = std::make_shared<onnx::Graph>(onnx::Graph::load(path));
  const auto sig = detail::graph_signature(*graph, "backbone '" + spec.name + "'");
  ex.input_name_ = sig.input;
  ex.maps_name_ = sig.maps;
  ex.pooled_name_ = sig.pooled;

  auto mismatch = [&](const std::string& what, std::int64_t declared, std::int64_t graph_dim) {
    fail(ErrorCode::kDimensionMismatch, "backbone '" + spec.name + "': spec " + what + " " +
                                            std::to_string(declared) + " vs graph " +
                                            std::to_string(graph_dim));
  };
  if (detail::known(sig.input_shape, 1) && sig.input_shape[1] != 3) {
    mismatch("input channels", 3, sig.input_shape[1]);
  }
  if (detail::known(sig.input_shape, 2) && sig.input_shape[2] != spec.input_size) {
    mismatch("input size", spec.input_size, sig.input_shape[2]);
  }
  if (detail::known(sig.input_shape, 3) && sig.input_shape[3] != spec.input_size) {
    mismatch("input size", spec.input_size, sig.input_shape[3]);
  }
  if (detail::known(sig.pooled_shape, 1) && sig.pooled_shape[1] != spec.feature_dim) {
    mismatch("feature_dim", spec.feature_dim, sig.pooled_shape[1]);
  }
  if (detail::known(sig.maps_shape, 1) && sig.maps_shape[1] != spec.map_count) {
    mismatch("map_count", spec.map_count, sig.maps_shape[1]);
  }
  if (detail::known(sig.maps_shape, 2) && sig.maps_shape[2] != spec.map_height) {
    mismatch("map height", spec.map_height, sig.maps_shape[2]);
  }
  if (detail::known(sig.maps_shape, 3) && sig.maps_shape[3] != spec.map_width) {
    mismatch("map width", spec.map_width, sig.maps_shape[3]);
  }
  const bool fully_declared = detail::known(sig.pooled_shape, 1) &&
                              detail::known(sig.maps_shape, 1) &&
                              detail::known(sig.maps_shape, 2) &&
                              detail::known(sig.maps_shape, 3);
  ex.graph_ = std::move(graph);
  if (!fully_declared) {
    // Probe once so a shape disagreement surfaces at load time.
    FrameTensor probe;
    probe.height = probe.width = spec.input_size;
    probe.values.assign(static_cast<std::size_t>(3) * spec.input_size * spec.input_size, 0.0f);
    ex.extract_one(probe);
  }
  return ex;
}

// Builds a spec for a model file: the sidecar `<stem>.meta` when present,
// otherwise the graph's declared input/output shapes.
inline BackboneSpec spec_from_model(const std::string& name, const std::string& source) {
  namespace fs = std::filesystem;
  const auto path = resolve_model_path(source);
  const auto meta = fs::path(path).replace_extension(".meta");
  std::error_code ec;
  if (fs::exists(meta, ec)) return read_backbone_meta(meta.string(), name, source);

  const auto graph = onnx::Graph::load(path);
  const auto sig = detail::graph_signature(graph, "model '" + path + "'");
  if (!detail::known(sig.input_shape, 2) || !detail::known(sig.maps_shape, 1) ||
      !detail::known(sig.maps_shape, 2) || !detail::known(sig.maps_shape, 3)) {
    fail(ErrorCode::kFormat, "model '" + path +
                                 "' has symbolic shapes and no .meta sidecar; dims unknown");
  }
  BackboneSpec spec;
  spec.name = name;
  spec.source = source;
  spec.input_size = static_cast<int>(sig.input_shape[2]);
  spec.map_count = static_cast<int>(sig.maps_shape[1]);
  spec.feature_dim = spec.map_count;
  spec.map_height = static_cast<int>(sig.maps_shape[2]);
  spec.map_width = static_cast<int>(sig.maps_shape[3]);
  return spec;
}

}  // namespace fusionpool
