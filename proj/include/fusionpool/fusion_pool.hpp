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

// Fused feature pools: per-backbone pooled vectors concatenated in schema
// order, labelled against a label space that may span several tasks.
//
// Pool file (.fpl), little-endian:
//   "FPL1"
//   u32 version (= 1)
//   u32 B, then B × (u16 len, name, u32 dim)
//   u32 C, then C × (u16 len, class name)
//   u32 T, then T × (u32 task_id, u16 len, dataset name)
//   u64 N, then N × (u64 sample_id, u32 task_id, u32 global_class, D × f32)
//   u32 CRC32 of every byte after the magic

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fusionpool/detail/binary_io.hpp"
#include "fusionpool/error.hpp"
#include "fusionpool/extraction.hpp"

namespace fusionpool {

inline constexpr std::string_view kPoolMagic = "FPL1";
inline constexpr std::uint32_t kPoolVersion = 1;

struct SchemaEntry {
  std::string backbone;
  std::uint32_t dim = 0;

  bool operator==(const SchemaEntry&) const = default;
};

using Schema = std::vector<SchemaEntry>;

inline std::size_t schema_dim(const Schema& schema) {
  std::size_t d = 0;
  for (const auto& e : schema) d += e.dim;
  return d;
}

// Offset of a backbone's slice within the fused vector.
inline std::size_t schema_offset(const Schema& schema, std::string_view backbone) {
  std::size_t offset = 0;
  for (const auto& e : schema) {
    if (e.backbone == backbone) return offset;
    offset += e.dim;
  }
  fail(ErrorCode::kSchemaMismatch, "backbone '" + std::string(backbone) + "' not in schema");
}

// How local class names map onto global classes when label spaces meet.
// Names are compared case-folded; an alias rewrites a local name to a
// canonical one before comparison.
struct MergePolicy {
  std::map<std::string, std::string> aliases;  // folded local name -> canonical name

  static MergePolicy by_name() { return {}; }
  bool is_by_name() const { return aliases.empty(); }

  MergePolicy& alias(std::string_view local, std::string canonical) {
    aliases[detail::ascii_fold(local)] = std::move(canonical);
    return *this;
  }
  std::string resolve(std::string_view name) const {
    auto it = aliases.find(detail::ascii_fold(name));
    return it == aliases.end() ? std::string(name) : it->second;
  }
};

// Ordered global classes; indices are first-seen and never renumbered.
struct LabelSpace {
  std::vector<std::string> classes;

  std::size_t size() const { return classes.size(); }

  std::optional<std::uint32_t> find(std::string_view name) const {
    const auto key = detail::ascii_fold(name);
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (detail::ascii_fold(classes[i]) == key) return static_cast<std::uint32_t>(i);
    }
    return std::nullopt;
  }
  std::uint32_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    fail(ErrorCode::kUnknownLabel, "label '" + std::string(name) + "' is not in the label space");
  }
  std::uint32_t add(std::string_view name) {
    if (name.empty()) fail(ErrorCode::kInvalidArgument, "empty class name");
    if (auto i = find(name)) return *i;
    classes.emplace_back(name);
    return static_cast<std::uint32_t>(classes.size() - 1);
  }

  template <typename Range>
  static LabelSpace first_seen(const Range& names) {
    LabelSpace ls;
    for (const auto& n : names) ls.add(n);
    return ls;
  }

  bool operator==(const LabelSpace&) const = default;
};

struct TaskInfo {
  std::uint32_t task_id = 0;
  std::string dataset_name;

  bool operator==(const TaskInfo&) const = default;
};

struct FeatureRecord {
  std::uint64_t sample_id = 0;
  std::uint32_t task_id = 0;
  std::uint32_t global_class = 0;
  std::vector<float> features;

  bool operator==(const FeatureRecord&) const = default;
};

struct FeaturePool {
  Schema schema;
  LabelSpace labels;
  std::vector<TaskInfo> tasks;
  std::vector<FeatureRecord> records;
  std::uint32_t checksum = 0;

  std::size_t dim() const { return schema_dim(schema); }
  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  const TaskInfo* task(std::uint32_t id) const {
    for (const auto& t : tasks) {
      if (t.task_id == id) return &t;
    }
    return nullptr;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& r : records) ++counts[r.global_class];
    return counts;
  }

  // Global classes that occur in a task's records.
  std::vector<std::uint32_t> task_classes(std::uint32_t task_id) const {
    std::vector<bool> seen(labels.size(), false);
    for (const auto& r : records) {
      if (r.task_id == task_id) seen[r.global_class] = true;
    }
    std::vector<std::uint32_t> out;
    for (std::uint32_t c = 0; c < seen.size(); ++c) {
      if (seen[c]) out.push_back(c);
    }
    return out;
  }

  bool operator==(const FeaturePool&) const = default;
};

inline std::vector<std::uint8_t> serialize_payload(const FeaturePool& pool) {
  detail::ByteWriter w;
  w.u32(kPoolVersion);
  w.u32(static_cast<std::uint32_t>(pool.schema.size()));
  for (const auto& e : pool.schema) {
    w.short_string(e.backbone);
    w.u32(e.dim);
  }
  w.u32(static_cast<std::uint32_t>(pool.labels.size()));
  for (const auto& c : pool.labels.classes) w.short_string(c);
  w.u32(static_cast<std::uint32_t>(pool.tasks.size()));
  for (const auto& t : pool.tasks) {
    w.u32(t.task_id);
    w.short_string(t.dataset_name);
  }
  w.u64(pool.records.size());
  for (const auto& r : pool.records) {
    w.u64(r.sample_id);
    w.u32(r.task_id);
    w.u32(r.global_class);
    w.f32_array(r.features);
  }
  return std::move(w.buffer());
}

// Checks schema, label and identity invariants.
inline void validate_pool(const FeaturePool& pool) {
  const auto D = pool.dim();
  std::unordered_set<std::uint64_t> ids;
  std::unordered_set<std::uint32_t> task_ids;
  for (const auto& t : pool.tasks) {
    if (!task_ids.insert(t.task_id).second) {
      fail(ErrorCode::kTaskReuse, "task id " + std::to_string(t.task_id) + " registered twice");
    }
  }
  for (const auto& r : pool.records) {
    if (r.features.size() != D) {
      fail(ErrorCode::kDimensionMismatch, "record has " + std::to_string(r.features.size()) +
                                              " features, pool dimension is " + std::to_string(D));
    }
    if (r.global_class >= pool.labels.size()) {
      fail(ErrorCode::kUnknownLabel, "record class " + std::to_string(r.global_class) +
                                         " outside label space");
    }
    if (!task_ids.contains(r.task_id)) {
      fail(ErrorCode::kFormat, "record task " + std::to_string(r.task_id) + " is not registered");
    }
    if (!ids.insert(r.sample_id).second) {
      fail(ErrorCode::kCollision, "sample id " + std::to_string(r.sample_id) + " appears twice");
    }
    for (float v : r.features) {
      if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "non-finite feature value");
    }
  }
}

// Recomputes the integrity word after a mutation.
inline void finalize_pool(FeaturePool& pool) {
  pool.checksum = detail::crc32(serialize_payload(pool));
}

// Concatenates per-backbone pooled vectors in schema order.
inline std::vector<float> fuse(std::span<const std::span<const float>> per_backbone,
                               const Schema& schema) {
  if (per_backbone.size() != schema.size()) {
    fail(ErrorCode::kDimensionMismatch, "fuse: " + std::to_string(per_backbone.size()) +
                                            " backbone vectors for a " +
                                            std::to_string(schema.size()) + "-backbone schema");
  }
  std::vector<float> out;
  out.reserve(schema_dim(schema));
  for (std::size_t b = 0; b < schema.size(); ++b) {
    if (per_backbone[b].size() != schema[b].dim) {
      fail(ErrorCode::kDimensionMismatch,
           "fuse: backbone '" + schema[b].backbone + "' vector has " +
               std::to_string(per_backbone[b].size()) + " values, schema says " +
               std::to_string(schema[b].dim));
    }
    out.insert(out.end(), per_backbone[b].begin(), per_backbone[b].end());
  }
  return out;
}

inline std::vector<float> fuse(const std::vector<std::vector<float>>& per_backbone,
                               const Schema& schema) {
  std::vector<std::span<const float>> views(per_backbone.begin(), per_backbone.end());
  return fuse(std::span<const std::span<const float>>(views), schema);
}

inline Schema schema_of(std::span<const BackboneSpec> backbones) {
  Schema s;
  for (const auto& b : backbones) s.push_back({b.name, static_cast<std::uint32_t>(b.feature_dim)});
  return s;
}

// A fused, labelled sample not yet assigned to a pool.
struct LabeledFeatures {
  std::uint64_t sample_id = 0;
  std::uint32_t task_id = 0;
  std::string label;
  std::vector<float> features;
};

// Per-backbone extractor output for one sample.
struct ExtractedSample {
  std::uint64_t sample_id = 0;
  std::vector<FeatureMaps> per_backbone;  // schema order
  std::string label;
};

// General form: samples may belong to any of the listed tasks.
inline FeaturePool build_pool(const Schema& schema, const LabelSpace& labels,
                              std::vector<TaskInfo> tasks,
                              std::span<const LabeledFeatures> samples) {
  FeaturePool pool;
  pool.schema = schema;
  pool.labels = labels;
  pool.tasks = std::move(tasks);
  pool.records.reserve(samples.size());
  const auto D = schema_dim(schema);
  for (const auto& s : samples) {
    if (s.features.size() != D) {
      fail(ErrorCode::kDimensionMismatch, "sample " + std::to_string(s.sample_id) + " has " +
                                              std::to_string(s.features.size()) +
                                              " features, schema needs " + std::to_string(D));
    }
    pool.records.push_back({s.sample_id, s.task_id, labels.index_of(s.label), s.features});
  }
  validate_pool(pool);
  finalize_pool(pool);
  return pool;
}

// Single-task form over raw extractor output.
inline FeaturePool build_pool(const Schema& schema, std::span<const ExtractedSample> extracted,
                              const TaskInfo& task, const LabelSpace& labels) {
  std::vector<LabeledFeatures> fused;
  fused.reserve(extracted.size());
  for (const auto& s : extracted) {
    if (s.per_backbone.size() != schema.size()) {
      fail(ErrorCode::kDimensionMismatch,
           "sample " + std::to_string(s.sample_id) + " is missing backbone output (" +
               std::to_string(s.per_backbone.size()) + " of " + std::to_string(schema.size()) + ")");
    }
    std::vector<std::span<const float>> views;
    for (const auto& fm : s.per_backbone) views.emplace_back(fm.pooled);
    fused.push_back({s.sample_id, task.task_id, s.label,
                     fuse(std::span<const std::span<const float>>(views), schema)});
  }
  return build_pool(schema, labels, {task}, fused);
}

// Appends b to a. a's records and class indices are untouched; b's classes
// are matched by (aliased, case-folded) name and new ones appended in b's
// order.
inline FeaturePool merge_pools(const FeaturePool& a, const FeaturePool& b,
                               const MergePolicy& policy = MergePolicy::by_name()) {
  if (!(a.schema == b.schema)) {
    fail(ErrorCode::kSchemaMismatch, "cannot merge pools with different schemas");
  }
  for (const auto& [from, to] : policy.aliases) {
    (void)to;
    if (!a.labels.find(from) && !b.labels.find(from)) {
      fail(ErrorCode::kUnknownLabel, "alias table references unknown class '" + from + "'");
    }
  }
  FeaturePool out;
  out.schema = a.schema;
  out.labels = a.labels;
  out.tasks = a.tasks;
  for (const auto& t : b.tasks) {
    if (const auto* existing = a.task(t.task_id)) {
      if (existing->dataset_name != t.dataset_name) {
        fail(ErrorCode::kTaskReuse, "task id " + std::to_string(t.task_id) + " means '" +
                                        existing->dataset_name + "' in one pool and '" +
                                        t.dataset_name + "' in the other");
      }
      continue;
    }
    out.tasks.push_back(t);
  }
  std::vector<std::uint32_t> remap(b.labels.size());
  for (std::size_t c = 0; c < b.labels.size(); ++c) {
    const auto canonical = policy.resolve(b.labels.classes[c]);
    remap[c] = out.labels.add(canonical);
  }
  std::unordered_set<std::uint64_t> ids;
  ids.reserve(a.records.size());
  for (const auto& r : a.records) ids.insert(r.sample_id);
  out.records.reserve(a.records.size() + b.records.size());
  out.records = a.records;
  for (const auto& r : b.records) {
    if (ids.contains(r.sample_id)) {
      fail(ErrorCode::kCollision, "sample id " + std::to_string(r.sample_id) +
                                      " present in both pools");
    }
    FeatureRecord copy = r;
    copy.global_class = remap[r.global_class];
    out.records.push_back(std::move(copy));
  }
  finalize_pool(out);
  return out;
}

// Registers a new task and appends its samples; nothing already in the pool
// changes. Equivalent to merge_pools(pool, build_pool(new data)).
inline FeaturePool add_task(const FeaturePool& pool, std::span<const LabeledFeatures> samples,
                            const TaskInfo& task,
                            const MergePolicy& policy = MergePolicy::by_name()) {
  if (pool.task(task.task_id)) {
    fail(ErrorCode::kTaskReuse, "task id " + std::to_string(task.task_id) + " already in pool");
  }
  std::vector<std::string> names;
  for (const auto& s : samples) {
    if (s.task_id != task.task_id) {
      fail(ErrorCode::kInvalidArgument, "sample " + std::to_string(s.sample_id) +
                                            " carries task " + std::to_string(s.task_id) +
                                            ", expected " + std::to_string(task.task_id));
    }
    names.push_back(s.label);
  }
  const auto fresh = build_pool(pool.schema, LabelSpace::first_seen(names), {task}, samples);
  return merge_pools(pool, fresh, policy);
}

inline std::vector<std::uint8_t> serialize_pool(const FeaturePool& pool) {
  return detail::seal(kPoolMagic, serialize_payload(pool));
}

inline FeaturePool deserialize_pool(std::span<const std::uint8_t> file) {
  const auto sealed = detail::unseal(kPoolMagic, file);
  detail::ByteReader r(sealed.payload);
  const auto version = r.u32();
  if (version != kPoolVersion) {
    fail(ErrorCode::kVersion, "pool file version " + std::to_string(version) + ", expected " +
                                  std::to_string(kPoolVersion));
  }
  FeaturePool pool;
  const auto B = r.u32();
  for (std::uint32_t i = 0; i < B; ++i) {
    SchemaEntry e;
    e.backbone = r.short_string();
    e.dim = r.u32();
    pool.schema.push_back(std::move(e));
  }
  const auto C = r.u32();
  for (std::uint32_t i = 0; i < C; ++i) pool.labels.classes.push_back(r.short_string());
  const auto T = r.u32();
  for (std::uint32_t i = 0; i < T; ++i) {
    TaskInfo t;
    t.task_id = r.u32();
    t.dataset_name = r.short_string();
    pool.tasks.push_back(std::move(t));
  }
  const auto N = r.u64();
  const auto D = pool.dim();
  const std::size_t record_bytes = 16 + D * 4;
  if (N > r.remaining() / record_bytes) {
    fail(ErrorCode::kTruncated, "pool file declares " + std::to_string(N) +
                                    " records but is too short");
  }
  pool.records.resize(static_cast<std::size_t>(N));
  for (auto& rec : pool.records) {
    rec.sample_id = r.u64();
    rec.task_id = r.u32();
    rec.global_class = r.u32();
    rec.features.resize(D);
    r.f32_array(rec.features);
  }
  if (r.remaining() != 0) {
    fail(ErrorCode::kFormat, "trailing bytes after pool records");
  }
  detail::verify_crc(sealed);
  pool.checksum = sealed.stored_crc;
  validate_pool(pool);
  return pool;
}

inline void save_pool(const FeaturePool& pool, const std::string& path) {
  detail::write_file(path, serialize_pool(pool));
}

inline FeaturePool load_pool(const std::string& path) {
  return deserialize_pool(detail::read_file(path));
}

}  // namespace fusionpool
